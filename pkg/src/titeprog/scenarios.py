"""Latent outcome generation and the built-in scenario grid.

Outcomes follow a conditional-uniform model: the presence of each event
inside the observation window is a Bernoulli draw on its marginal
probability, and present events get a uniform time on (0, window]. Toxicity
and progression are independent; the observed patient course is whichever
comes first.

Each patient consumes one row of four uniform primitives, so replaying the
same primitives at a different dose yields coherent counterfactual outcomes.
That is what lets the simulator compare strategies on matched draws.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScenarioSpec:
    """Marginal event probabilities by the end of the window, per dose."""

    label: str
    tox_label: str
    prog_label: str
    tox_probs: tuple
    prog_probs: tuple
    true_mtd: int

    def __post_init__(self):
        if len(self.tox_probs) != len(self.prog_probs):
            raise ValueError("toxicity and progression vectors differ in length")
        for p in self.tox_probs + self.prog_probs:
            if not 0.0 <= p <= 1.0:
                raise ValueError("scenario probabilities must lie in [0, 1]")
        if not 1 <= self.true_mtd <= len(self.tox_probs):
            raise ValueError("true_mtd out of dose range")


@dataclass(frozen=True)
class LatentOutcome:
    """Latent event times on (0, window]; None when the event never occurs."""

    tox_time: float | None
    prog_time: float | None


def true_mtd_for(tox_probs, target: float) -> int:
    """Dose whose true toxicity sits closest to the target (ties to lower)."""
    diffs = [abs(p - target) for p in tox_probs]
    return diffs.index(min(diffs)) + 1


def make_scenario(tox_probs, prog_probs, target, label="custom",
                  tox_label="", prog_label="") -> ScenarioSpec:
    return ScenarioSpec(
        label=label,
        tox_label=tox_label or label,
        prog_label=prog_label or label,
        tox_probs=tuple(float(p) for p in tox_probs),
        prog_probs=tuple(float(p) for p in prog_probs),
        true_mtd=true_mtd_for(tox_probs, target),
    )


TOX_ROWS = (
    ("tox1", (0.00, 0.01, 0.05, 0.10, 0.25)),
    ("tox2", (0.01, 0.05, 0.10, 0.25, 0.40)),
    ("tox3", (0.05, 0.10, 0.25, 0.40, 0.55)),
    ("tox4", (0.10, 0.25, 0.40, 0.55, 0.65)),
    ("tox5", (0.25, 0.40, 0.55, 0.65, 0.70)),
)

PROG_ROWS = (
    ("const00", (0.00, 0.00, 0.00, 0.00, 0.00)),
    ("const20", (0.20, 0.20, 0.20, 0.20, 0.20)),
    ("const40", (0.40, 0.40, 0.40, 0.40, 0.40)),
    ("const60", (0.60, 0.60, 0.60, 0.60, 0.60)),
    ("const80", (0.80, 0.80, 0.80, 0.80, 0.80)),
    ("decreasing", (0.60, 0.50, 0.40, 0.30, 0.20)),
    ("step2", (0.60, 0.40, 0.40, 0.40, 0.40)),
    ("step3", (0.60, 0.60, 0.40, 0.40, 0.40)),
    ("step4", (0.60, 0.60, 0.60, 0.40, 0.40)),
    ("step5", (0.60, 0.60, 0.60, 0.60, 0.40)),
    ("ushape", (0.60, 0.50, 0.40, 0.50, 0.60)),
)


def scenario_library(target: float = 0.25) -> list:
    """All toxicity-by-progression combinations of the built-in grid (55)."""
    specs = []
    for tox_label, tox in TOX_ROWS:
        for prog_label, prog in PROG_ROWS:
            specs.append(
                make_scenario(
                    tox, prog, target,
                    label=f"{tox_label}-{prog_label}",
                    tox_label=tox_label,
                    prog_label=prog_label,
                )
            )
    return specs


def find_scenario(label: str, target: float = 0.25) -> ScenarioSpec:
    for spec in scenario_library(target):
        if spec.label == label:
            return spec
    raise KeyError(f"no built-in scenario named {label!r}")


def draw_primitives(rng: np.random.Generator, n: int) -> np.ndarray:
    """n rows of (tox presence u, tox time u, prog presence u, prog time u)."""
    return rng.random((n, 4))


def outcome_from_primitives(
    scenario: ScenarioSpec, dose: int, primitives, window: float
) -> LatentOutcome:
    """Latent outcome at ``dose`` for one primitive row."""
    u_tox, t_tox, u_prog, t_prog = primitives
    tox_time = None
    prog_time = None
    if u_tox < scenario.tox_probs[dose - 1]:
        tox_time = window * (1.0 - t_tox)  # uniform on (0, window]
    if u_prog < scenario.prog_probs[dose - 1]:
        prog_time = window * (1.0 - t_prog)
    return LatentOutcome(tox_time, prog_time)


def draw_outcome(
    scenario: ScenarioSpec, dose: int, rng: np.random.Generator, window: float = 8.0
) -> LatentOutcome:
    """Draw one latent outcome for a patient treated at ``dose``."""
    if not 1 <= dose <= len(scenario.tox_probs):
        raise ValueError("dose out of range")
    return outcome_from_primitives(scenario, dose, draw_primitives(rng, 1)[0], window)


def observed_course(outcome: LatentOutcome, window: float, round_to_week: bool = False):
    """What the trial records for one patient: ('dlt'|'progression'|'complete', time).

    The first latent event wins on the true (continuous) timeline; treatment
    stops there, so the later event is never seen. With ``round_to_week`` the
    winning event surfaces at the next whole-week assessment visit; a
    progression surfacing at the final visit is indistinguishable from a
    completed window and is recorded as such.
    """
    u = outcome.tox_time if outcome.tox_time is not None else math.inf
    p = outcome.prog_time if outcome.prog_time is not None else math.inf
    if u <= p and u <= window:
        return "dlt", float(math.ceil(u)) if round_to_week else u
    if p < window:
        detected = float(math.ceil(p)) if round_to_week else p
        if detected >= window:
            return "complete", window
        return "progression", detected
    return "complete", window


def draw_outcomes(
    scenario: ScenarioSpec, dose: int, rng: np.random.Generator, n: int,
    window: float = 8.0,
):
    """Vectorised batch draw; returns (tox_times, prog_times) with NaN for absent."""
    prims = draw_primitives(rng, n)
    tox_times = np.where(
        prims[:, 0] < scenario.tox_probs[dose - 1], window * (1.0 - prims[:, 1]), np.nan
    )
    prog_times = np.where(
        prims[:, 2] < scenario.prog_probs[dose - 1], window * (1.0 - prims[:, 3]), np.nan
    )
    return tox_times, prog_times


class PrimitiveStream:
    """Lazily grown table of per-patient primitives for one replicate.

    Row i belongs to the i-th enrolled patient. Growth happens in fixed-size
    chunks drawn from the stream's own generator, so the rows any two
    strategy arms see are identical no matter how many patients each enrolls.
    """

    CHUNK = 64

    def __init__(self, seed_seq: np.random.SeedSequence):
        self._rng = np.random.default_rng(seed_seq)
        self._rows = self._rng.random((self.CHUNK, 4))

    def row(self, index: int) -> np.ndarray:
        while index >= self._rows.shape[0]:
            self._rows = np.vstack([self._rows, self._rng.random((self.CHUNK, 4))])
        return self._rows[index]
