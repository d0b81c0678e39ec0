"""
Error norms, convergence orders, refinement studies, stability audits and
report writers.
"""

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .compact import apply_Hh, solve_compact
from .exceptions import ArgumentError, FracstepError, StudyError
from .models import (
    ConvergenceReport,
    CouplingKind,
    LevelResult,
    ProblemSpec,
    SchemeType,
    SolutionHistory,
)
from .norms import l2_norm, max_norm
from .problems import make_test1, make_test2, sample
from .solver import solve

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["scheme", "b", "alpha", "N", "M", "h", "tau",
               "err_l2", "co_l2", "err_max", "co_max"]

_GRID_TOL = 1e-9


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

def exact_on_grid(problem: ProblemSpec, history: SolutionHistory) -> np.ndarray:
    """Exact solution at every node and level of the history."""
    nodes = history.grid.nodes
    exact = np.array([sample(problem.exact, nodes, t) for t in history.times])
    exact[:, 0] = exact[:, -1] = 0.0
    return exact


def error_norms(z: np.ndarray, h: float) -> Tuple[float, float]:
    """(max_n ||z^n||_0, ||z||_C) for a space-time error array with rows per level."""
    err_l2 = max(l2_norm(layer[1:-1], h) for layer in z)
    return err_l2, max_norm(z)


def level_errors(history: SolutionHistory, problem: ProblemSpec) -> Tuple[float, float]:
    """Errors z = y - u of a completed run in both norms."""
    if problem.exact is None:
        raise ArgumentError(f"problem {problem.name} has no exact solution")
    z = history.layers - exact_on_grid(problem, history)
    return error_norms(z, history.grid.h)


def convergence_order(e1: Optional[float], e2: Optional[float], d1: float, d2: float) -> Optional[float]:
    """log_{d1/d2}(e1/e2); None when either error is missing or not positive."""
    if e1 is None or e2 is None or e1 <= 0 or e2 <= 0 or d1 == d2:
        return None
    return math.log(e1 / e2) / math.log(d1 / d2)


# ---------------------------------------------------------------------------
# Coupling rules
# ---------------------------------------------------------------------------

def parse_step(value: Union[str, float, int]) -> float:
    """Accept 0.1, "0.1" or "1/10"."""
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as e:
            raise ArgumentError(f"cannot read step {value!r}") from e
    return float(value)


@dataclass(frozen=True)
class Coupling:
    """
    How (h, tau) are chosen per level.

    Attributes:
        kind: Coupling rule
        constant: c in tau = c h or tau = c h^2
        fixed: The step held fixed by FIX_H / FIX_TAU
        drive: The step the level list gives ("tau" or "h"); CO is taken against it
        rounding: "exact" rejects non-integer grids, "nearest" rounds them
    """
    kind: CouplingKind
    constant: float = 1.0
    fixed: Optional[float] = None
    drive: str = "tau"
    rounding: str = "exact"

    def __post_init__(self):
        if self.drive not in ("tau", "h"):
            raise ArgumentError(f"drive must be 'tau' or 'h', got {self.drive!r}")
        if self.rounding not in ("exact", "nearest"):
            raise ArgumentError(f"rounding must be 'exact' or 'nearest', got {self.rounding!r}")
        if self.kind == CouplingKind.FIX_H and self.drive != "tau":
            raise ArgumentError("fix-h studies are driven by tau")
        if self.kind == CouplingKind.FIX_TAU and self.drive != "h":
            raise ArgumentError("fix-tau studies are driven by h")
        if self.kind in (CouplingKind.FIX_H, CouplingKind.FIX_TAU) and not (self.fixed and self.fixed > 0):
            raise ArgumentError(f"{self.kind.value} needs a positive fixed step")
        if not self.constant > 0:
            raise ArgumentError("coupling constant must be positive")

    def describe(self) -> str:
        if self.kind == CouplingKind.FIX_H:
            return f"h={_fraction_label(self.fixed)}, tau refined"
        if self.kind == CouplingKind.FIX_TAU:
            return f"tau={_fraction_label(self.fixed)}, h refined"
        if self.kind == CouplingKind.TAU_LINEAR:
            return f"tau={self.constant:g}h, {self.drive} refined"
        return f"tau={self.constant:g}h^2, {self.drive} refined"

    def steps_for(self, value: float) -> Tuple[float, float]:
        """Nominal (h, tau) of a level given its drive value."""
        if self.drive == "tau":
            tau = value
            if self.kind == CouplingKind.FIX_H:
                h = self.fixed
            elif self.kind == CouplingKind.TAU_LINEAR:
                h = tau / self.constant
            else:
                h = math.sqrt(tau / self.constant)
        else:
            h = value
            if self.kind == CouplingKind.FIX_TAU:
                tau = self.fixed
            elif self.kind == CouplingKind.TAU_LINEAR:
                tau = self.constant * h
            else:
                tau = self.constant * h * h
        return h, tau


def _fraction_label(value: Optional[float]) -> str:
    if value is None:
        return ""
    fraction = Fraction(value).limit_denominator(100000)
    if fraction.numerator == 1:
        return f"1/{fraction.denominator}"
    return f"{value:g}"


def _to_count(extent: float, step: float, label: str, rounding: str, index: int,
              notes: List[str]) -> int:
    raw = extent / step
    nearest = round(raw)
    if abs(raw - nearest) <= _GRID_TOL * max(1.0, raw):
        return int(nearest)
    if rounding == "nearest":
        notes.append(f"level {index}: {label}={raw:.6g} rounded to {nearest}")
        logger.warning(f"Level {index}: {label}={raw:.6g} is not an integer, rounded to {nearest}")
        return int(nearest)
    raise StudyError(f"level {index}: coupling gives non-integer {label}={raw:.6g}",
                     level={"index": index, label: raw})


def resolve_levels(coupling: Coupling, levels: Sequence[Union[str, float]], length: float,
                   horizon: float, notes: Optional[List[str]] = None) -> List[Tuple[int, int]]:
    """
    Turn drive values into integer grids (N, M).

    Raises:
        StudyError: a non-integer N or M under rounding="exact", naming the level
    """
    if not levels:
        raise ArgumentError("level list is empty")
    notes = [] if notes is None else notes
    grids = []
    for index, raw in enumerate(levels):
        value = parse_step(raw)
        if not value > 0:
            raise ArgumentError(f"level {index}: step must be positive, got {raw!r}")
        h, tau = coupling.steps_for(value)
        N = _to_count(length, h, "N", coupling.rounding, index, notes)
        M = _to_count(horizon, tau, "M", coupling.rounding, index, notes)
        grids.append((N, M))
    return grids


# ---------------------------------------------------------------------------
# Stability audit
# ---------------------------------------------------------------------------

@dataclass
class StabilityReport:
    """Both sides of the a priori estimate at every level of one run."""
    scheme: str
    lhs: List[float]
    rhs: float
    constant: float
    c1: float
    ratios: List[float]
    worst_ratio: float
    passed: bool
    g_conditions: Optional[bool] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scheme": self.scheme,
            "rhs": self.rhs,
            "constant": self.constant,
            "c1": self.c1,
            "worst_ratio": self.worst_ratio,
            "passed": self.passed,
            "g_conditions": self.g_conditions,
            "levels": [{"j": j + 1, "lhs": lhs, "ratio": ratio}
                       for j, (lhs, ratio) in enumerate(zip(self.lhs, self.ratios))],
        }


def stability_audit(history: SolutionHistory, problem: ProblemSpec,
                    tables: Optional[Sequence] = None) -> StabilityReport:
    """
    Evaluate the a priori estimate of a completed run.

    Second order:  ||y^{j+1}||^2 <= ||y^0||^2 + T^a G(1-a) l^2/(2 lam(T) c1) max ||phi||^2
    Compact:       ||H y^{j+1}||^2 <= ||H y^0||^2 + T^a G(1-a) l^2/(lam(T) c1) max ||H phi||^2

    c1 is the smallest k sampled by the run. With tables, the g-form conditions
    g_0 > lam(T)/(2 G(1-a) T^a) and g increasing are checked as well.
    """
    if not history.complete:
        raise ArgumentError("stability audit needs a completed run")
    order = problem.order
    h = history.grid.h
    horizon = problem.horizon
    lam_T = float(problem.weight(horizon))
    c1 = history.diagnostics.coefficient_min
    compact = history.scheme == SchemeType.COMPACT

    if compact:
        norms = [l2_norm(apply_Hh(layer, h), h) ** 2 for layer in history.layers]
        factor = 1.0
    else:
        norms = [l2_norm(layer[1:-1], h) ** 2 for layer in history.layers]
        factor = 0.5

    constant = factor * horizon ** order.alpha * order.gamma_1 * problem.length ** 2 / (lam_T * c1)
    forcing = max(history.diagnostics.forcing_norms, default=0.0) ** 2
    rhs = norms[0] + constant * forcing

    ratios = []
    for lhs in norms[1:]:
        if rhs > 0:
            ratios.append(lhs / rhs)
        else:
            ratios.append(0.0 if lhs == 0 else math.inf)
    worst = max(ratios, default=0.0)

    g_conditions = None
    if tables:
        floor = lam_T / (2.0 * order.gamma_1 * horizon ** order.alpha)
        g_conditions = all(
            table.g[0] > floor and bool(np.all(np.diff(table.g) > 0))
            for table in tables
        )

    report = StabilityReport(
        scheme=history.scheme.value, lhs=norms[1:], rhs=rhs, constant=constant, c1=c1,
        ratios=ratios, worst_ratio=worst, passed=worst <= 1.0, g_conditions=g_conditions,
    )
    if not report.passed:
        logger.warning(f"A priori estimate violated: worst ratio {worst:.6e}")
    return report


# ---------------------------------------------------------------------------
# Refinement studies
# ---------------------------------------------------------------------------

SOLVERS: Dict[SchemeType, Callable[..., SolutionHistory]] = {
    SchemeType.SECOND_ORDER: solve,
    SchemeType.COMPACT: solve_compact,
}


@dataclass
class _LevelRun:
    N: int
    M: int
    err_l2: Optional[float] = None
    err_max: Optional[float] = None
    stability_ratio: Optional[float] = None
    layers: Optional[np.ndarray] = None


def _run_level(scheme: SchemeType, problem: ProblemSpec, N: int, M: int,
               keep_layers: bool) -> _LevelRun:
    history = SOLVERS[scheme](problem, N, M)
    audit = stability_audit(history, problem)
    run = _LevelRun(N=N, M=M, stability_ratio=audit.worst_ratio)
    if problem.exact is not None:
        run.err_l2, run.err_max = level_errors(history, problem)
        logger.info(f"Level N={N}, M={M}: err_l2={run.err_l2:.6e}, err_max={run.err_max:.6e}")
    else:
        logger.info(f"Level N={N}, M={M} done")
    if keep_layers:
        run.layers = np.array(history.layers)
    return run


def _self_convergence(coarse: _LevelRun, fine: _LevelRun, h: float) -> Tuple[float, float]:
    if fine.N % coarse.N or fine.M % coarse.M:
        raise StudyError(
            f"self-convergence needs nested grids, got (N, M)=({coarse.N}, {coarse.M}) "
            f"then ({fine.N}, {fine.M})")
    r_space = fine.N // coarse.N
    r_time = fine.M // coarse.M
    z = coarse.layers - fine.layers[::r_time, ::r_space]
    return error_norms(z, h)


def _build_report(scheme: SchemeType, problem: ProblemSpec, coupling: Coupling,
                  runs: List[Optional[_LevelRun]], grids: List[Tuple[int, int]],
                  metadata: Dict[str, Any], reference: Optional[List[Optional[float]]]
                  ) -> ConvergenceReport:
    levels = []
    for (N, M), run in zip(grids, runs):
        level = LevelResult(N=N, M=M, h=problem.length / N, tau=problem.horizon / M)
        if run is not None:
            level.err_l2, level.err_max = run.err_l2, run.err_max
            level.stability_ratio = run.stability_ratio
        levels.append(level)

    if problem.exact is None:
        for i in range(len(levels) - 1):
            coarse, fine = runs[i], runs[i + 1]
            if coarse is not None and fine is not None:
                levels[i].err_l2, levels[i].err_max = _self_convergence(coarse, fine, levels[i].h)

    for previous, level in zip(levels, levels[1:]):
        d1 = previous.tau if coupling.drive == "tau" else previous.h
        d2 = level.tau if coupling.drive == "tau" else level.h
        level.co_l2 = convergence_order(previous.err_l2, level.err_l2, d1, d2)
        level.co_max = convergence_order(previous.err_max, level.err_max, d1, d2)

    metadata = dict(metadata)
    metadata["error_kind"] = "exact" if problem.exact is not None else "self-convergence"
    return ConvergenceReport(
        scheme=scheme, problem=problem.describe(), coupling=coupling.describe(),
        drive=coupling.drive, levels=levels, metadata=metadata, reference=reference,
    )


def run_study(scheme: Union[SchemeType, str], problem: ProblemSpec, coupling: Coupling,
              levels: Sequence[Union[str, float]], jobs: int = 1,
              reference: Optional[List[Optional[float]]] = None,
              metadata: Optional[Dict[str, Any]] = None) -> ConvergenceReport:
    """
    Run one refinement study.

    Args:
        scheme: Scheme to run
        problem: Problem; without an exact solution consecutive nested levels are compared
        coupling: (h, tau) rule
        levels: Drive values of the levels, coarse to fine
        jobs: Worker threads; levels run concurrently, the report is assembled in level order
        reference: Optional reference err_l2 per level
        metadata: Notes copied into the report

    Raises:
        StudyError: a level failed; carries the partial report
    """
    scheme = SchemeType(scheme)
    notes: List[str] = list((metadata or {}).get("notes", []))
    grids = resolve_levels(coupling, levels, problem.length, problem.horizon, notes)
    keep_layers = problem.exact is None
    meta = dict(metadata or {})
    meta["notes"] = notes

    def run(grid: Tuple[int, int]) -> _LevelRun:
        return _run_level(scheme, problem, grid[0], grid[1], keep_layers)

    runs: List[Optional[_LevelRun]] = [None] * len(grids)
    failure: Optional[Tuple[int, Exception]] = None
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            futures = [executor.submit(run, grid) for grid in grids]
            for index, future in enumerate(futures):
                try:
                    runs[index] = future.result()
                except FracstepError as e:
                    failure = failure or (index, e)
    else:
        for index, grid in enumerate(grids):
            try:
                runs[index] = run(grid)
            except FracstepError as e:
                failure = (index, e)
                break

    report = _build_report(scheme, problem, coupling, runs, grids, meta, reference)
    if failure is not None:
        index, error = failure
        N, M = grids[index]
        logger.warning(f"Study stopped at level {index} (N={N}, M={M}): {error}")
        raise StudyError(f"level {index} (N={N}, M={M}) failed: {error}",
                         partial_report=report, level={"index": index, "N": N, "M": M}) from error
    return report


# ---------------------------------------------------------------------------
# Table presets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PresetBlock:
    """One (b, alpha) block of a reference table."""
    b: float
    alpha: float
    reference_l2: Tuple[float, ...]
    reference_max: Tuple[float, ...]


@dataclass(frozen=True)
class StudyPreset:
    name: str
    scheme: SchemeType
    problem: str
    coupling: Coupling
    levels: Tuple[str, ...]
    blocks: Tuple[PresetBlock, ...]
    co_only: bool = False
    notes: Tuple[str, ...] = ()

    def make_problem(self, block: PresetBlock) -> ProblemSpec:
        builder = make_test1 if self.problem == "test1" else make_test2
        return builder(block.b, block.alpha)


_TAU_8 = tuple(f"1/{10 * 2 ** i}" for i in range(8))
_TAU_4 = _TAU_8[:4]
_TAU_6 = _TAU_8[:6]
_TAU_9 = tuple(f"1/{10 * 2 ** i}" for i in range(9))
_H_4 = ("1/4", "1/8", "1/16", "1/32")

PRESETS: Dict[str, StudyPreset] = {
    "table1": StudyPreset(
        name="table1", scheme=SchemeType.SECOND_ORDER, problem="test1",
        coupling=Coupling(CouplingKind.TAU_LINEAR, constant=3.0, drive="tau"),
        levels=_TAU_8,
        blocks=(
            PresetBlock(1.0, 0.9,
                        (4.853172e-4, 1.195117e-4, 2.966661e-5, 7.407823e-6,
                         1.853344e-6, 4.639354e-7, 1.161322e-7, 2.904554e-8),
                        (6.860735e-4, 1.689468e-4, 4.193765e-5, 1.047192e-5,
                         2.619972e-6, 6.558408e-7, 1.641709e-7, 4.106038e-8)),
            PresetBlock(2.0, 0.5,
                        (5.695428e-4, 1.281254e-4, 3.111526e-5, 7.832071e-6,
                         1.970207e-6, 4.952711e-7, 1.243664e-7, 3.125438e-8),
                        (8.053893e-4, 1.811924e-4, 4.387037e-5, 1.104282e-5,
                         2.777898e-6, 6.983096e-7, 1.753507e-7, 4.406686e-8)),
            PresetBlock(3.0, 0.1,
                        (5.590468e-4, 1.378485e-4, 3.418923e-5, 8.555678e-6,
                         2.140670e-6, 5.355715e-7, 1.340154e-7, 3.349770e-8),
                        (7.905373e-4, 1.949425e-4, 4.820603e-5, 1.206419e-5,
                         3.018517e-6, 7.551986e-7, 1.889726e-7, 4.723392e-8)),
        ),
        notes=("tabulated step read as tau with h = tau/3 (N = 3M); "
               "the h column cannot give integer M with tau = 3h",),
    ),
    "table2": StudyPreset(
        name="table2", scheme=SchemeType.SECOND_ORDER, problem="test1",
        coupling=Coupling(CouplingKind.FIX_H, fixed=1.0 / 2000, drive="tau"),
        levels=_TAU_4,
        blocks=(
            PresetBlock(3.0, 0.9,
                        (6.977406e-5, 1.700981e-5, 4.110301e-6, 9.171973e-7),
                        (9.866179e-5, 2.405134e-5, 5.812025e-6, 1.297116e-6)),
            PresetBlock(2.0, 0.5,
                        (1.144134e-4, 2.825404e-5, 6.909733e-6, 1.621574e-6),
                        (1.617383e-4, 3.994110e-5, 9.768017e-6, 2.292670e-6)),
            PresetBlock(1.0, 0.1,
                        (9.999960e-5, 2.495408e-5, 6.147966e-6, 1.438581e-6),
                        (1.412912e-4, 3.525761e-5, 8.686914e-6, 2.033257e-6)),
        ),
        co_only=True,
        notes=("h = 1/2000 as tabulated; the accompanying text states h = 1/10000",),
    ),
    "table3": StudyPreset(
        name="table3", scheme=SchemeType.COMPACT, problem="test2",
        coupling=Coupling(CouplingKind.FIX_H, fixed=1.0 / 500, drive="tau"),
        levels=_TAU_6,
        blocks=(
            PresetBlock(1.0, 0.9,
                        (3.870828e-4, 9.636762e-5, 2.398099e-5, 5.973624e-6,
                         1.488446e-6, 3.709923e-7),
                        (5.474178e-4, 1.362844e-4, 3.391425e-5, 8.447980e-6,
                         2.104980e-6, 5.246623e-7)),
            PresetBlock(2.0, 0.5,
                        (1.383725e-4, 3.418301e-5, 8.442745e-6, 2.092596e-6,
                         5.200842e-7, 1.295146e-7),
                        (1.956883e-4, 4.834208e-5, 1.193984e-5, 2.959377e-6,
                         7.355101e-7, 1.831613e-7)),
            PresetBlock(3.0, 0.1,
                        (2.622451e-5, 6.094819e-6, 1.451037e-6, 3.532982e-7,
                         8.699997e-8, 2.156752e-8),
                        (3.708705e-5, 8.619377e-6, 2.052077e-6, 4.996392e-7,
                         1.230365e-7, 3.050108e-8)),
        ),
    ),
    "table4": StudyPreset(
        name="table4", scheme=SchemeType.COMPACT, problem="test2",
        coupling=Coupling(CouplingKind.FIX_TAU, fixed=1 / 2000, drive="h"),
        levels=_H_4,
        blocks=(
            PresetBlock(1.0, 0.9,
                        (1.216509e-3, 7.463500e-5, 4.635757e-6, 2.818584e-7),
                        (1.720403e-3, 1.055498e-4, 6.555951e-6, 3.986080e-7)),
            PresetBlock(2.0, 0.5,
                        (1.133742e-3, 6.956352e-5, 4.327824e-6, 2.702171e-7),
                        (1.603353e-3, 9.837767e-4, 6.120468e-6, 3.821448e-7)),
            PresetBlock(3.0, 0.1,
                        (1.086389e-3, 6.666005e-5, 4.147156e-6, 2.588975e-7),
                        (1.536387e-3, 9.427155e-4, 5.864965e-6, 3.661364e-7)),
        ),
        notes=("tau = 1/2000 from the accompanying text; the tabulated coupling tau = 16h^2 "
               "does not reproduce the published errors. CO is reported per h-halving",
               "reference max-norm values at h=1/8 for b=2 and b=3 carry an exponent misprint"),
    ),
    "table5": StudyPreset(
        name="table5", scheme=SchemeType.COMPACT, problem="test2",
        coupling=Coupling(CouplingKind.TAU_QUADRATIC, constant=16.0, drive="tau",
                          rounding="nearest"),
        levels=_TAU_9,
        blocks=(
            PresetBlock(1.0, 0.9,
                        (3.828076e-4, 9.462480e-5, 2.352703e-5, 5.807158e-6, 1.450182e-6,
                         3.605780e-7, 9.010072e-8, 2.241364e-8, 5.591086e-9),
                        (5.413717e-4, 1.362844e-4, 3.327224e-5, 8.212562e-6, 2.050867e-6,
                         5.099343e-7, 1.274216e-7, 3.169767e-8, 7.906995e-9)),
            PresetBlock(2.0, 0.5,
                        (1.342903e-4, 3.253876e-5, 8.015256e-6, 1.935905e-6, 4.839828e-7,
                         1.196592e-7, 3.002070e-8, 7.438279e-9, 1.857629e-9),
                        (1.899152e-4, 4.601676e-5, 1.133528e-5, 2.737783e-6, 6.844551e-7,
                         1.692237e-7, 4.245569e-8, 1.051931e-8, 2.627084e-9)),
            PresetBlock(3.0, 0.1,
                        (2.218725e-5, 4.434359e-6, 1.019302e-6, 3.005858e-7, 7.429821e-8,
                         1.967234e-8, 4.756649e-9, 1.243872e-9, 3.110283e-10),
                        (3.137751e-5, 6.271131e-6, 1.441511e-6, 4.250925e-7, 1.050735e-7,
                         2.782089e-8, 6.726918e-9, 1.759102e-9, 4.398604e-10)),
        ),
        co_only=True,
        notes=("tau = 16h^2 gives non-integer N; N is rounded to the nearest integer "
               "and the actual h is reported",),
    ),
}


def run_preset(name: str, jobs: int = 1, max_levels: Optional[int] = None,
               blocks: Optional[Sequence[int]] = None) -> List[ConvergenceReport]:
    """
    Run the studies of a reference-table preset.

    Args:
        name: "table1" .. "table5"
        jobs: Worker threads per study
        max_levels: Run only the first levels of every block
        blocks: Indices of the (b, alpha) blocks to run; all by default
    """
    if name not in PRESETS:
        raise ArgumentError(f"unknown preset {name!r}; expected one of {', '.join(sorted(PRESETS))}")
    preset = PRESETS[name]
    levels = preset.levels[:max_levels] if max_levels else preset.levels
    chosen = [preset.blocks[i] for i in blocks] if blocks is not None else list(preset.blocks)

    for note in preset.notes:
        logger.warning(f"{name}: {note}")

    reports = []
    for block in chosen:
        metadata = {
            "preset": name,
            "co_only": preset.co_only,
            "notes": list(preset.notes),
            "reference_max": list(block.reference_max[:len(levels)]),
        }
        reports.append(run_study(
            preset.scheme, preset.make_problem(block), preset.coupling, levels, jobs=jobs,
            reference=list(block.reference_l2[:len(levels)]), metadata=metadata,
        ))
    return reports


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------

def format_float(value: Optional[float], digits: int = 6) -> str:
    """Scientific notation with the given significant digits; blank for None."""
    if value is None:
        return ""
    return f"{value:.{digits - 1}e}"


def round_floats(obj: Any, digits: int = 6) -> Any:
    """Recursively round floats to the given significant digits."""
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return str(obj)
        return float(format_float(obj, digits))
    if isinstance(obj, dict):
        return {key: round_floats(value, digits) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(value, digits) for value in obj]
    return obj


def report_rows(report: ConvergenceReport, digits: int = 6) -> List[Dict[str, str]]:
    params = report.problem.get("params", {})
    rows = []
    for level in report.levels:
        rows.append({
            "scheme": report.scheme.value,
            "b": format_float(params.get("b"), digits) if "b" in params else "",
            "alpha": format_float(report.problem.get("alpha"), digits),
            "N": str(level.N),
            "M": str(level.M),
            "h": format_float(level.h, digits),
            "tau": format_float(level.tau, digits),
            "err_l2": format_float(level.err_l2, digits),
            "co_l2": format_float(level.co_l2, digits),
            "err_max": format_float(level.err_max, digits),
            "co_max": format_float(level.co_max, digits),
        })
    return rows


def render_csv(reports: Sequence[ConvergenceReport], digits: int = 6) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        writer.writerows(report_rows(report, digits))
    return buffer.getvalue()


def _deviation(value: Optional[float], reference: Optional[float]) -> str:
    if value is None or not reference:
        return ""
    return f"{100.0 * (value - reference) / reference:+.2f}%"


def render_markdown(reports: Sequence[ConvergenceReport], digits: int = 6) -> str:
    lines: List[str] = []
    for report in reports:
        params = report.problem.get("params", {})
        b = params.get("b")
        title = f"### {report.scheme.value}: {report.problem.get('name')}"
        if b is not None:
            title += f", b={b:g}"
        title += f", alpha={report.problem.get('alpha'):g} ({report.coupling})"
        lines.append(title)
        lines.append("")

        reference = report.reference
        reference_max = report.metadata.get("reference_max")
        header = ["N", "M", "h", "tau", "max_n ||z^n||_0", "CO", "||z||_C", "CO"]
        if reference:
            header += ["ref ||z^n||_0", "dev"]
        if reference_max:
            header += ["ref ||z||_C", "dev"]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))

        for i, level in enumerate(report.levels):
            cells = [
                str(level.N), str(level.M),
                format_float(level.h, digits), format_float(level.tau, digits),
                format_float(level.err_l2, digits),
                f"{level.co_l2:.4f}" if level.co_l2 is not None else "",
                format_float(level.err_max, digits),
                f"{level.co_max:.4f}" if level.co_max is not None else "",
            ]
            if reference:
                ref = reference[i] if i < len(reference) else None
                cells += [format_float(ref, digits), _deviation(level.err_l2, ref)]
            if reference_max:
                ref = reference_max[i] if i < len(reference_max) else None
                cells += [format_float(ref, digits), _deviation(level.err_max, ref)]
            lines.append("| " + " | ".join(cells) + " |")

        notes = report.metadata.get("notes") or []
        if report.metadata.get("co_only"):
            notes = ["convergence orders only; error magnitudes are not matched"] + list(notes)
        if notes:
            lines.append("")
            lines.extend(f"- {note}" for note in notes)
        lines.append("")
    return "\n".join(lines)


def render_json(payload: Any, digits: int = 6) -> str:
    return json.dumps(round_floats(payload, digits), sort_keys=True, indent=2) + "\n"


def render_reports(reports: Sequence[ConvergenceReport], fmt: str, digits: int = 6) -> str:
    if fmt == "csv":
        return render_csv(reports, digits)
    if fmt == "markdown":
        return render_markdown(reports, digits)
    if fmt == "json":
        return render_json([report.to_dict() for report in reports], digits)
    raise ArgumentError(f"unknown format {fmt!r}; expected csv, markdown or json")


_SUFFIXES = {"csv": ".csv", "markdown": ".md", "json": ".json"}


def write_output(text: str, output_dir: Union[str, Path], stem: str, fmt: str) -> Path:
    """Write text to <output_dir>/<stem>.<ext>, creating the directory."""
    directory = Path(output_dir)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{stem}{_SUFFIXES.get(fmt, '.txt')}"
    path.write_text(text, encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path
