"""Replicate runner and operating-characteristics aggregation.

One replicate plays a whole trial: candidates arrive on a fixed accrual grid,
enroll while the gate is open, latent outcomes are drawn at enrollment, and
events fold through the trial engine in time order until every patient
resolves. Strategies are compared on matched primitive streams keyed by
(base seed, scenario index, replicate), so arms diverge only where dose
assignments diverge.

Aggregation is a commutative fold over per-replicate records; worker
scheduling cannot change any reported number.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from heapq import heappop, heappush

import multiprocessing
import numpy as np

from .core import DesignConfig, build_skeleton
from .engine import (
    EventKind,
    Strategy,
    TrialEvent,
    assign_next_patient,
    enrollment_gate,
    finalize_trial,
    new_trial,
    process_event,
)
from .scenarios import PrimitiveStream, ScenarioSpec, observed_course, outcome_from_primitives
from . import quadrature


@dataclass(frozen=True)
class StudyConfig:
    design: DesignConfig
    scenarios: tuple
    strategies: tuple = (Strategy.A, Strategy.B, Strategy.C)
    phis: tuple = ()
    replicates: int = 1000
    base_seed: int = 20170816
    round_to_week: bool = False
    workers: int | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.scenarios:
            raise ValueError("at least one scenario required")
        object.__setattr__(self, "strategies", tuple(Strategy(s) for s in self.strategies))
        phis = tuple(self.phis) if self.phis else (self.design.phi,)
        object.__setattr__(self, "phis", phis)


@dataclass(frozen=True)
class ReplicateResult:
    mtd: int
    enrolled: int
    added: int
    duration: float
    dlt_count: int
    dose_assignments: tuple
    events: tuple = ()


_COURSE_KINDS = {
    "dlt": EventKind.DLT,
    "progression": EventKind.PROGRESSION,
    "complete": EventKind.WINDOW_COMPLETE,
}


def _schedule_outcome(outcome, enroll_time, patient_id, window, seq, round_to_week):
    """Terminal event for one patient per the observed course of its outcome."""
    course, time = observed_course(outcome, window, round_to_week)
    return (enroll_time + time, seq, patient_id, _COURSE_KINDS[course])


def simulate_trial(
    design: DesignConfig,
    skeleton,
    scenario: ScenarioSpec,
    strategy: Strategy,
    prims: PrimitiveStream,
    round_to_week: bool = False,
    collect_events: bool = False,
) -> ReplicateResult:
    """Run one trial to completion and return its per-trial metrics."""
    state = new_trial(design, skeleton, strategy)
    window = design.window
    interval = design.accrual_interval
    heap = []
    seq = 0
    trace = [] if collect_events else None
    tick_index = 0
    while True:
        now = tick_index * interval
        while heap and heap[0][0] <= now:
            time, _, pid, kind = heappop(heap)
            event = TrialEvent(time, pid, kind)
            state = process_event(state, event)
            if trace is not None:
                trace.append(event)
        if enrollment_gate(state):
            state, dose = assign_next_patient(state, now)
            pid = len(state.patients)
            if trace is not None:
                trace.append(TrialEvent(now, pid, EventKind.ENROLLED, dose))
            outcome = outcome_from_primitives(scenario, dose, prims.row(pid - 1), window)
            seq += 1
            heappush(heap, _schedule_outcome(outcome, now, pid, window, seq, round_to_week))
        elif not heap:
            break
        tick_index += 1
    mtd, metrics = finalize_trial(state)
    return ReplicateResult(
        mtd=mtd,
        enrolled=metrics.enrolled,
        added=metrics.added_patients,
        duration=metrics.duration,
        dlt_count=metrics.dlt_count,
        dose_assignments=metrics.dose_assignments,
        events=tuple(trace) if trace is not None else (),
    )


def replicate_seed(base_seed: int, scenario_index: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base_seed, scenario_index, rep])


def run_replicate(
    design: DesignConfig,
    scenario: ScenarioSpec,
    strategy: Strategy,
    seed,
    round_to_week: bool = False,
    collect_events: bool = False,
) -> ReplicateResult:
    """Run a single replicate from an integer seed or SeedSequence."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    skeleton = build_skeleton(
        design.target, design.halfwidth, design.prior_mtd, design.num_doses
    )
    prims = PrimitiveStream(seed)
    return simulate_trial(
        design, skeleton, scenario, strategy, prims, round_to_week, collect_events
    )


@dataclass(frozen=True)
class CellResult:
    """Per-replicate records of one (scenario, strategy, phi) cell."""

    scenario: ScenarioSpec
    strategy: Strategy
    phi: float
    selected: np.ndarray
    enrolled: np.ndarray
    duration: np.ndarray
    dlt_count: np.ndarray


@dataclass(frozen=True)
class OperatingCharacteristics:
    pcs: float
    pos: float | None
    mean_added: float
    pct_added: float
    mean_duration: float
    selection_pct: tuple
    mc_se_pcs: float
    mc_se_pos: float | None
    mc_se_added: float
    replicates: int


def summarize_cell(cell: CellResult, design: DesignConfig) -> OperatingCharacteristics:
    r = cell.selected.size
    k = len(cell.scenario.tox_probs)
    counts = np.bincount(cell.selected, minlength=k + 1)[1:]
    selection_pct = tuple(100.0 * c / r for c in counts)
    mtd = cell.scenario.true_mtd
    p_cs = counts[mtd - 1] / r
    added = cell.enrolled - design.sample_size
    if mtd < k:
        p_os = counts[mtd:].sum() / r
        pos = 100.0 * p_os
        se_pos = 100.0 * math.sqrt(p_os * (1.0 - p_os) / r)
    else:
        pos = None
        se_pos = None
    return OperatingCharacteristics(
        pcs=100.0 * p_cs,
        pos=pos,
        mean_added=float(added.mean()),
        pct_added=100.0 * float(added.mean()) / design.sample_size,
        mean_duration=float(cell.duration.mean()),
        selection_pct=selection_pct,
        mc_se_pcs=100.0 * math.sqrt(p_cs * (1.0 - p_cs) / r),
        mc_se_pos=se_pos,
        mc_se_added=float(added.std(ddof=1) / math.sqrt(r)) if r > 1 else 0.0,
        replicates=r,
    )


def _run_cell(args):
    (design, scenario, scenario_index, strategy, phi, replicates, base_seed,
     round_to_week) = args
    cell_design = replace(design, phi=phi)
    skeleton = build_skeleton(
        cell_design.target, cell_design.halfwidth, cell_design.prior_mtd,
        cell_design.num_doses,
    )
    selected = np.empty(replicates, dtype=np.int16)
    enrolled = np.empty(replicates, dtype=np.int32)
    duration = np.empty(replicates, dtype=np.float64)
    dlts = np.empty(replicates, dtype=np.int32)
    for rep in range(replicates):
        prims = PrimitiveStream(replicate_seed(base_seed, scenario_index, rep))
        result = simulate_trial(
            cell_design, skeleton, scenario, strategy, prims, round_to_week
        )
        selected[rep] = result.mtd
        enrolled[rep] = result.enrolled
        duration[rep] = result.duration
        dlts[rep] = result.dlt_count
    return CellResult(
        scenario=scenario,
        strategy=strategy,
        phi=phi,
        selected=selected,
        enrolled=enrolled,
        duration=duration,
        dlt_count=dlts,
    )


@dataclass
class StudyResult:
    config: StudyConfig
    cells: dict = field(default_factory=dict)  # (label, strategy, phi) -> CellResult
    summaries: dict = field(default_factory=dict)

    def cell(self, label: str, strategy, phi: float) -> CellResult:
        return self.cells[(label, Strategy(strategy), phi)]

    def summary(self, label: str, strategy, phi: float) -> OperatingCharacteristics:
        return self.summaries[(label, Strategy(strategy), phi)]


def run_study(config: StudyConfig) -> StudyResult:
    """Run every (scenario, strategy, phi) cell of the study.

    Strategy A ignores phi, so its cells are computed once per scenario and
    shared across phi values. Cells are independent work items; results are
    keyed, not ordered, so parallel scheduling cannot change them.
    """
    jobs = []
    for index, scenario in enumerate(config.scenarios):
        for strategy in config.strategies:
            phis = config.phis if strategy is not Strategy.A else config.phis[:1]
            for phi in phis:
                jobs.append(
                    (config.design, scenario, index, strategy, phi,
                     config.replicates, config.base_seed, config.round_to_week)
                )
    workers = config.workers or min(os.cpu_count() or 1, len(jobs))
    if workers > 1 and len(jobs) > 1:
        quadrature.warmup()  # compile before forking so children reuse the JIT
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            cell_results = list(pool.map(_run_cell, jobs, chunksize=1))
    else:
        cell_results = [_run_cell(job) for job in jobs]

    result = StudyResult(config=config)
    for cell in cell_results:
        for phi in config.phis:
            if cell.strategy is not Strategy.A and phi != cell.phi:
                continue
            key = (cell.scenario.label, cell.strategy, phi)
            stored = cell if cell.strategy is not Strategy.A else replace(cell, phi=phi)
            result.cells[key] = stored
            result.summaries[key] = summarize_cell(stored, config.design)
    return result


@dataclass(frozen=True)
class OrderingCheck:
    """Overdose-ordering comparison for one scenario/phi on matched draws."""

    label: str
    phi: float
    pos_a: float | None
    pos_b: float | None
    pos_c: float | None
    c_minus_b_se: float
    b_minus_a_se: float
    violates_c_le_b: bool
    violates_b_le_a: bool


def _overdose_indicator(cell: CellResult) -> np.ndarray:
    return (cell.selected > cell.scenario.true_mtd).astype(np.float64)


def _matched_excess(x: np.ndarray, y: np.ndarray):
    """Mean difference and its matched-pair standard error."""
    d = x - y
    se = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0
    return float(d.mean()), se


def compare_strategies(result: StudyResult, z: float = 3.0) -> list:
    """Per-cell strategy comparison; flags overdose-ordering violations.

    Expected ordering is POS_C <= POS_B <= POS_A; a violation is flagged when
    the matched-pair excess exceeds ``z`` standard errors.
    """
    checks = []
    for scenario in result.config.scenarios:
        for phi in result.config.phis:
            cells = {}
            for strategy in result.config.strategies:
                key = (scenario.label, Strategy(strategy), phi)
                if key not in result.cells:
                    raise KeyError(f"missing cell {key}")
                cells[Strategy(strategy)] = result.cells[key]
            if scenario.true_mtd == len(scenario.tox_probs):
                checks.append(
                    OrderingCheck(scenario.label, phi, None, None, None,
                                  0.0, 0.0, False, False)
                )
                continue
            ind = {s: _overdose_indicator(c) for s, c in cells.items()}
            cb_mean, cb_se = _matched_excess(ind[Strategy.C], ind[Strategy.B])
            ba_mean, ba_se = _matched_excess(ind[Strategy.B], ind[Strategy.A])
            checks.append(
                OrderingCheck(
                    label=scenario.label,
                    phi=phi,
                    pos_a=100.0 * float(ind[Strategy.A].mean()),
                    pos_b=100.0 * float(ind[Strategy.B].mean()),
                    pos_c=100.0 * float(ind[Strategy.C].mean()),
                    c_minus_b_se=cb_se,
                    b_minus_a_se=ba_se,
                    violates_c_le_b=cb_mean > z * cb_se,
                    violates_b_le_a=ba_mean > z * ba_se,
                )
            )
    return checks


def calibrate_halfwidth(
    design: DesignConfig,
    scenarios,
    halfwidths,
    replicates: int = 2000,
    base_seed: int = 20170816,
    round_to_week: bool = False,
    strategy: Strategy = Strategy.A,
    workers: int | None = None,
):
    """Grid-search the indifference half-width by average correct selection.

    Thin wrapper over ``run_study``: one study per candidate half-width on the
    given scenarios, scored by mean PCS. Returns (best_halfwidth, scores)
    where scores maps each candidate to its mean PCS.
    """
    scores = {}
    for halfwidth in halfwidths:
        cfg = StudyConfig(
            design=replace(design, halfwidth=halfwidth),
            scenarios=tuple(scenarios),
            strategies=(strategy,),
            replicates=replicates,
            base_seed=base_seed,
            round_to_week=round_to_week,
            workers=workers,
        )
        result = run_study(cfg)
        pcs = [
            result.summary(s.label, strategy, cfg.phis[0]).pcs for s in cfg.scenarios
        ]
        scores[halfwidth] = sum(pcs) / len(pcs)
    best = max(scores, key=lambda h: (scores[h], -h))
    return best, scores


RESULTS_COLUMNS = (
    "scenario_label", "tox_row", "prog_row", "strategy", "phi", "N",
    "PCS", "POS", "mean_added", "pct_added", "mean_duration", "mc_se_pcs",
)

SELECTION_COLUMNS = (
    "scenario_label", "tox_row", "prog_row", "strategy", "phi", "N",
    "dose", "selection_pct",
)


def _fmt(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, float):
        return f"{x:.4f}"
    return str(x)


def _prob_row(probs) -> str:
    return ";".join(f"{100 * p:g}" for p in probs)


def results_rows(result: StudyResult):
    """Long-format summary rows in deterministic scenario/strategy/phi order."""
    rows = []
    n = result.config.design.sample_size
    for scenario in result.config.scenarios:
        for strategy in result.config.strategies:
            for phi in result.config.phis:
                oc = result.summary(scenario.label, strategy, phi)
                rows.append((
                    scenario.label, _prob_row(scenario.tox_probs),
                    _prob_row(scenario.prog_probs), strategy.value, _fmt(phi),
                    str(n), _fmt(oc.pcs), _fmt(oc.pos), _fmt(oc.mean_added),
                    _fmt(oc.pct_added), _fmt(oc.mean_duration), _fmt(oc.mc_se_pcs),
                ))
    return rows


def selection_rows(result: StudyResult):
    rows = []
    n = result.config.design.sample_size
    for scenario in result.config.scenarios:
        for strategy in result.config.strategies:
            for phi in result.config.phis:
                oc = result.summary(scenario.label, strategy, phi)
                for dose, pct in enumerate(oc.selection_pct, start=1):
                    rows.append((
                        scenario.label, _prob_row(scenario.tox_probs),
                        _prob_row(scenario.prog_probs), strategy.value,
                        _fmt(phi), str(n), str(dose), _fmt(pct),
                    ))
    return rows


def write_csv(path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
