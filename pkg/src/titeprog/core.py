"""Stateless dose-toxicity model mathematics.

Skeleton construction, the one-parameter power model, the follow-up-weighted
likelihood, posterior summarisation by deterministic quadrature, and dose
recommendation. Everything here is a pure function of its arguments and safe
to call from any number of threads.

Dose levels are 1-based throughout (dose k refers to ``probs[k-1]``).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import CLAMP_EPS, posterior_mean_for

DEFAULT_PRIOR_VAR = 1.34


@dataclass(frozen=True)
class DesignConfig:
    """Static design parameters of one dose-finding trial."""

    num_doses: int
    target: float
    window: float
    sample_size: int
    phi: float
    start_dose: int = 1
    prior_sd: float = math.sqrt(DEFAULT_PRIOR_VAR)
    halfwidth: float = 0.10
    prior_mtd: int = 3
    accrual_interval: float = 4.0

    def __post_init__(self):
        if self.num_doses < 1:
            raise ValueError("num_doses must be >= 1")
        if not 0.0 < self.target < 1.0:
            raise ValueError("target must lie strictly in (0, 1)")
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError("phi must lie in [0, 1]")
        if not 0.0 < self.halfwidth < min(self.target, 1.0 - self.target):
            raise ValueError("halfwidth must satisfy 0 < delta < min(theta, 1-theta)")
        if not 1 <= self.prior_mtd <= self.num_doses:
            raise ValueError("prior_mtd out of dose range")
        if not 1 <= self.start_dose <= self.num_doses:
            raise ValueError("start_dose out of dose range")
        if self.window <= 0.0:
            raise ValueError("window must be positive")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")
        if self.prior_sd <= 0.0:
            raise ValueError("prior_sd must be positive")
        if self.accrual_interval <= 0.0:
            raise ValueError("accrual_interval must be positive")


@dataclass(frozen=True)
class Skeleton:
    """Prior per-dose toxicity probabilities anchored at the prior MTD."""

    probs: tuple
    target: float
    halfwidth: float
    anchor: int

    def __post_init__(self):
        if not 1 <= self.anchor <= len(self.probs):
            raise ValueError("anchor out of range")
        if any(not 0.0 < p < 1.0 for p in self.probs):
            raise ValueError("skeleton probabilities must lie in (0, 1)")
        if any(a >= b for a, b in zip(self.probs, self.probs[1:])):
            raise ValueError("skeleton must be strictly increasing")
        if self.probs[self.anchor - 1] != self.target:
            raise ValueError("skeleton must equal the target at the anchor dose")


@dataclass(frozen=True)
class Observation:
    """One (dose, toxicity indicator, weight) likelihood contribution."""

    dose: int
    tox: bool
    weight: float

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError("weight must lie in [0, 1]")
        if self.tox and self.weight != 1.0:
            raise ValueError("a toxicity observation carries full weight")


def build_skeleton(target: float, halfwidth: float, anchor: int, num_doses: int) -> Skeleton:
    """Construct the skeleton by indifference-interval spacing.

    The anchor dose gets the target probability exactly. Walking up, each
    next probability solves p_next^exp(b) = target+halfwidth where b makes
    the current dose hit target-halfwidth; walking down, the mirrored pair.
    """
    if not 0.0 < target < 1.0:
        raise ValueError("target must lie strictly in (0, 1)")
    if not 0.0 < halfwidth < min(target, 1.0 - target):
        raise ValueError("halfwidth must satisfy 0 < delta < min(theta, 1-theta)")
    if not 1 <= anchor <= num_doses:
        raise ValueError("anchor out of dose range")
    lo = math.log(target - halfwidth)
    hi = math.log(target + halfwidth)
    probs = [0.0] * num_doses
    probs[anchor - 1] = target
    for k in range(anchor, num_doses):
        probs[k] = math.exp(hi * math.log(probs[k - 1]) / lo)
    for k in range(anchor - 2, -1, -1):
        probs[k] = math.exp(lo * math.log(probs[k + 1]) / hi)
    # Very wide intervals push low-dose terms below float range; reject rather
    # than hand back a degenerate skeleton.
    if any(not 0.0 < p < 1.0 for p in probs):
        raise ValueError("indifference steps not representable for these parameters")
    skeleton = Skeleton(tuple(probs), target, halfwidth, anchor)
    assert all(a < b for a, b in zip(probs, probs[1:])), "skeleton not monotone"
    return skeleton


def prob_tox(skeleton: Skeleton, dose: int, beta: float) -> float:
    """Model toxicity probability p_dose^exp(beta)."""
    if not 1 <= dose <= len(skeleton.probs):
        raise ValueError("dose out of range")
    if not math.isfinite(beta):
        raise ValueError("beta must be finite")
    return skeleton.probs[dose - 1] ** math.exp(beta)


def dose_tox_curve(skeleton: Skeleton, beta: float) -> np.ndarray:
    """Model toxicity probabilities at every dose for slope ``beta``."""
    return np.asarray(skeleton.probs, dtype=np.float64) ** math.exp(beta)


def weight_of(followup: float, window: float, had_dlt: bool) -> float:
    """Linear follow-up weight: full for a DLT, else followup/window capped at 1."""
    if followup < 0.0:
        raise ValueError("followup must be non-negative")
    if window <= 0.0:
        raise ValueError("window must be positive")
    if had_dlt:
        return 1.0
    return min(followup / window, 1.0)


def log_weighted_likelihood(observations, skeleton: Skeleton, beta: float) -> float:
    """Weighted log-likelihood sum over observations at slope ``beta``.

    Each term is y*log(w*psi) + (1-y)*log(1 - w*psi) with w*psi clamped to
    [CLAMP_EPS, 1-CLAMP_EPS] so extreme slopes stay finite. Weight-zero
    non-toxicity observations contribute exactly zero.
    """
    total = 0.0
    for obs in observations:
        if obs.tox and obs.weight == 0.0:
            raise ValueError("toxicity with zero weight is contradictory")
        if obs.weight == 0.0:
            continue
        x = obs.weight * prob_tox(skeleton, obs.dose, beta)
        x = min(max(x, CLAMP_EPS), 1.0 - CLAMP_EPS)
        total += math.log(x) if obs.tox else math.log1p(-x)
    return total


def group_observations(observations, num_doses: int):
    """Split observations into collapsed full-weight groups and partial terms.

    Returns (tox_counts, cens_counts, part_dose, part_w) where tox_counts[k-1]
    counts weight-1 toxicities at dose k, cens_counts[k-1] counts weight-1
    non-toxicities, and the partial arrays hold 0 < w < 1 non-toxicity terms
    (0-based dose index). Weight-0 non-toxicity observations vanish.
    """
    tox_counts = np.zeros(num_doses)
    cens_counts = np.zeros(num_doses)
    part_dose = []
    part_w = []
    for obs in observations:
        if obs.tox:
            tox_counts[obs.dose - 1] += 1.0
        elif obs.weight >= 1.0:
            cens_counts[obs.dose - 1] += 1.0
        elif obs.weight > 0.0:
            part_dose.append(obs.dose - 1)
            part_w.append(obs.weight)
    return (
        tox_counts,
        cens_counts,
        np.asarray(part_dose, dtype=np.int64),
        np.asarray(part_w, dtype=np.float64),
    )


def posterior_beta_mean(observations, skeleton: Skeleton, prior_sd: float) -> float:
    """Posterior mean of the slope under a centred normal prior.

    Computed by fixed 191-node Gauss-Hermite quadrature; deterministic and
    reproducible for fixed inputs and backend.
    """
    if prior_sd <= 0.0:
        raise ValueError("prior_sd must be positive")
    groups = group_observations(observations, len(skeleton.probs))
    return posterior_mean_for(*groups, skeleton.probs, prior_sd)


def _posterior_mean_grouped(groups, skeleton: Skeleton, prior_sd: float) -> float:
    return posterior_mean_for(*groups, skeleton.probs, prior_sd)


def _pick_dose(curve: np.ndarray, target: float) -> int:
    # argmin of |curve - target|; np.argmin takes the first (lowest) on ties
    return int(np.argmin(np.abs(curve - target))) + 1


def recommend_dose(
    observations,
    skeleton: Skeleton,
    design: DesignConfig,
    highest_tried: int,
    escalating: bool = True,
) -> int:
    """Dose whose estimated toxicity is closest to the target.

    Ties break to the lower dose. While escalating, the result is capped at
    one level above the highest dose already tried, and the very first
    patient receives the design's start dose. With ``escalating=False`` the
    unconstrained choice over all doses is returned (final MTD selection).
    """
    if not 0 <= highest_tried <= design.num_doses:
        raise ValueError("highest_tried out of range")
    if escalating and highest_tried == 0:
        return design.start_dose
    groups = group_observations(observations, design.num_doses)
    return _recommend_grouped(groups, skeleton, design, highest_tried, escalating)


def _recommend_grouped(groups, skeleton, design, highest_tried, escalating):
    if design.num_doses == 1:
        return 1
    beta = _posterior_mean_grouped(groups, skeleton, design.prior_sd)
    dose = _pick_dose(dose_tox_curve(skeleton, beta), design.target)
    if escalating:
        dose = min(dose, highest_tried + 1)
    return dose


@dataclass(frozen=True)
class PosteriorSummary:
    """Posterior snapshot used for audit trails and the conduct service."""

    beta_hat: float
    prob_curve: tuple
    recommended: int
    highest_tried: int = 0
    escalating: bool = True
    observations: tuple = field(default_factory=tuple)


def posterior_summary(
    observations,
    skeleton: Skeleton,
    design: DesignConfig,
    highest_tried: int,
    escalating: bool = True,
) -> PosteriorSummary:
    """Full recommendation bundle: slope estimate, curve, and chosen dose."""
    beta = posterior_beta_mean(observations, skeleton, design.prior_sd)
    curve = dose_tox_curve(skeleton, beta)
    dose = _pick_dose(curve, design.target)
    if escalating:
        if highest_tried == 0:
            dose = design.start_dose
        else:
            dose = min(dose, highest_tried + 1)
    return PosteriorSummary(
        beta_hat=beta,
        prob_curve=tuple(float(p) for p in curve),
        recommended=dose,
        highest_tried=highest_tried,
        escalating=escalating,
        observations=tuple(observations),
    )
