"""
Command line front end.

    fracstep solve   --config run.json
    fracstep study   --preset table3 --format markdown
    fracstep verify  --seed 7
    fracstep oracle  --config oracle.json

Exit status: 0 when every requested check or level succeeded, 1 on a failed
check or a library error, 2 on an invalid configuration.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Union

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import __version__
from .analysis import (
    PRESETS,
    Coupling,
    error_norms,
    exact_on_grid,
    parse_step,
    render_json,
    render_reports,
    run_preset,
    run_study,
    stability_audit,
    write_output,
)
from .compact import solve_compact
from .config import FracstepConfig, get_config
from .exceptions import ConfigError, FracstepError, StudyError
from .models import CouplingKind, SchemeType
from .operator import order_study, smooth_function
from .problems import load_problem
from .solver import solve
from .verification import run_verification
from .weights import make_weight

logger = logging.getLogger(__name__)

FORMATS = ("csv", "markdown", "json")


# ---------------------------------------------------------------------------
# Run configuration schema
# ---------------------------------------------------------------------------

class CouplingBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: CouplingKind
    constant: float = 1.0
    fixed: Optional[Union[str, float]] = None
    drive: Literal["tau", "h"] = "tau"
    rounding: Literal["exact", "nearest"] = "exact"


class OutputBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: Optional[str] = None
    format: Literal["csv", "markdown", "json"] = "csv"


class OracleBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    function: Literal["t", "t2", "t3", "t3exp"] = "t3"
    params: Dict[str, float] = Field(default_factory=dict)
    alphas: List[float] = Field(default_factory=lambda: [0.5])
    weight: Dict[str, Any] = Field(default_factory=lambda: {"name": "exp", "b": 1.0})
    horizon: float = 1.0
    steps: List[int] = Field(default_factory=lambda: [20, 40, 80, 160])

    @field_validator("alphas")
    @classmethod
    def _alphas_in_range(cls, value: List[float]) -> List[float]:
        if not value or any(not 0 < a < 1 for a in value):
            raise ValueError("alphas must be a non-empty list inside (0, 1)")
        return value


class PropertiesBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alphas: Optional[List[float]] = None
    decay_rates: Optional[List[float]] = None
    max_level: Optional[int] = None
    random_cases: Optional[int] = None
    max_series_len: Optional[int] = None
    max_witnesses: Optional[int] = None


class RunConfig(BaseModel):
    """Validated JSON run configuration (schema_version 1)."""
    model_config = ConfigDict(extra="forbid")

    schema_version: int = 1
    command: Optional[Literal["solve", "study", "verify", "oracle"]] = None
    problem: Optional[Union[str, Dict[str, Any]]] = None
    scheme: SchemeType = SchemeType.SECOND_ORDER
    N: Optional[int] = Field(default=None, ge=2)
    M: Optional[int] = Field(default=None, ge=1)
    levels: Optional[List[Union[str, float]]] = None
    coupling: Optional[CouplingBlock] = None
    preset: Optional[str] = None
    max_levels: Optional[int] = Field(default=None, ge=1)
    blocks: Optional[List[int]] = None
    output: OutputBlock = Field(default_factory=OutputBlock)
    seed: Optional[int] = None
    jobs: Optional[int] = Field(default=None, ge=1)
    properties: PropertiesBlock = Field(default_factory=PropertiesBlock)
    oracle: OracleBlock = Field(default_factory=OracleBlock)

    @field_validator("schema_version")
    @classmethod
    def _known_schema(cls, value: int) -> int:
        if value != 1:
            raise ValueError(f"unsupported schema_version {value}; expected 1")
        return value

    @field_validator("preset")
    @classmethod
    def _known_preset(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value not in PRESETS:
            raise ValueError(f"unknown preset {value!r}; expected one of {', '.join(sorted(PRESETS))}")
        return value


def load_run_config(path: Optional[str]) -> RunConfig:
    """Read and validate a JSON run configuration; no path gives the defaults."""
    if path is None:
        return RunConfig()
    config_file = Path(path)
    if not config_file.exists():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        data = json.loads(config_file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e


# ---------------------------------------------------------------------------
# Context shared by the commands
# ---------------------------------------------------------------------------

class RunContext:
    """Command line flags merged over the run config and the environment settings."""

    def __init__(self, args: argparse.Namespace, run: RunConfig, settings: FracstepConfig):
        self.run = run
        self.settings = settings
        self.jobs = args.jobs or run.jobs or settings.processing.jobs
        self.output_dir = args.output or run.output.path or settings.processing.output_dir
        self.format = args.format or run.output.format
        self.seed = args.seed if args.seed is not None else run.seed
        self.digits = settings.processing.significant_digits

    def write(self, text: str, stem: str, fmt: Optional[str] = None) -> Path:
        return write_output(text, self.output_dir, stem, fmt or self.format)


def _require(value, message: str):
    if value is None:
        raise ConfigError(message)
    return value


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _solution_text(nodes: np.ndarray, values: np.ndarray, exact: Optional[np.ndarray],
                   fmt: str, digits: int) -> str:
    rows = []
    for i, x in enumerate(nodes):
        row = {"x": float(x), "y": float(values[i])}
        if exact is not None:
            row["u"] = float(exact[i])
        rows.append(row)
    if fmt == "json":
        return render_json(rows, digits)
    columns = list(rows[0])
    cells = [[f"{row[c]:.{digits - 1}e}" for c in columns] for row in rows]
    if fmt == "csv":
        return "\n".join([",".join(columns)] + [",".join(c) for c in cells]) + "\n"
    lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    lines += ["| " + " | ".join(c) + " |" for c in cells]
    return "\n".join(lines) + "\n"


def cmd_solve(ctx: RunContext) -> int:
    """Single run: final layer, error norms against the exact solution, stability audit."""
    run = ctx.run
    problem = load_problem(_require(run.problem, "solve needs a 'problem' block"))
    N = _require(run.N, "solve needs N")
    M = _require(run.M, "solve needs M")

    solver = solve_compact if run.scheme == SchemeType.COMPACT else solve
    history = solver(problem, N, M, keep_tables=True)
    audit = stability_audit(history, problem, tables=history.tables)

    final = history.layer(M)
    summary: Dict[str, Any] = {
        "scheme": run.scheme.value,
        "problem": problem.describe(),
        "N": N,
        "M": M,
        "h": history.grid.h,
        "tau": history.tau,
        "stability": audit.to_dict(),
    }
    exact_final = None
    if problem.has_exact:
        exact = exact_on_grid(problem, history)
        exact_final = exact[-1]
        err_l2, err_max = error_norms(np.asarray(history.layers) - exact, history.grid.h)
        summary["errors"] = {"err_l2": err_l2, "err_max": err_max}
        logger.info(f"Errors: max_n ||z^n||_0={err_l2:.6e}, ||z||_C={err_max:.6e}")

    stem = f"solve_{problem.name}"
    ctx.write(_solution_text(history.grid.nodes, final, exact_final, ctx.format, ctx.digits),
              stem)
    ctx.write(render_json(summary, ctx.digits), f"{stem}_summary", "json")
    if not audit.passed:
        logger.error(f"A priori estimate violated (worst ratio {audit.worst_ratio:.6e})")
        return 1
    return 0


def _coupling_from(block: CouplingBlock) -> Coupling:
    fixed = block.fixed
    if isinstance(fixed, str):
        fixed = parse_step(fixed)
    return Coupling(block.kind, constant=block.constant, fixed=fixed, drive=block.drive,
                    rounding=block.rounding)


def cmd_study(ctx: RunContext, preset: Optional[str] = None) -> int:
    """Refinement study from a preset or from an explicit level list and coupling."""
    run = ctx.run
    preset = preset or run.preset
    try:
        if preset:
            stem = preset
            reports = run_preset(preset, jobs=ctx.jobs, max_levels=run.max_levels,
                                 blocks=run.blocks)
        else:
            problem = load_problem(_require(run.problem, "study needs a 'problem' block or a preset"))
            coupling = _coupling_from(_require(run.coupling, "study needs a 'coupling' block"))
            levels = _require(run.levels, "study needs a non-empty 'levels' list")
            if not levels:
                raise ConfigError("study needs a non-empty 'levels' list")
            if run.max_levels:
                levels = levels[:run.max_levels]
            stem = f"study_{problem.name}"
            reports = [run_study(run.scheme, problem, coupling, levels, jobs=ctx.jobs)]
    except StudyError as e:
        if e.partial_report is not None:
            ctx.write(render_reports([e.partial_report], ctx.format, ctx.digits), "study_partial")
        raise

    ctx.write(render_reports(reports, ctx.format, ctx.digits), stem)
    return 0


def cmd_verify(ctx: RunContext) -> int:
    """All property suites; JSON report of counts and witnesses."""
    properties = ctx.settings.properties
    for key, value in ctx.run.properties.model_dump(exclude_none=True).items():
        setattr(properties, key, value)
    try:
        ctx.settings.validate()
    except ValueError as e:
        raise ConfigError(str(e)) from e

    report = run_verification(properties, seed=ctx.seed, jobs=ctx.jobs,
                              tol=ctx.settings.coefficients.cancellation_tol)
    ctx.write(render_json(report.to_dict(), ctx.digits), "verify", "json")
    if not report.passed:
        for name in report.failures:
            suite = report.suites[name]
            logger.error(f"{name}: {suite.violations} violations, first witness {suite.witnesses[0]}")
        return 1
    return 0


def _oracle_text(results: List[Dict[str, Any]], fmt: str, digits: int) -> str:
    if fmt == "json":
        return render_json(results, digits)
    header = ["alpha", "M", "error", "slope"]
    rows = []
    for result in results:
        slopes = [None] + list(result["slopes"]) if result["slopes"] else [None] * len(result["steps"])
        for M, error, slope in zip(result["steps"], result["errors"], slopes):
            rows.append([f"{result['metadata']['alpha']:g}", str(M), f"{error:.{digits - 1}e}",
                         "" if slope is None else f"{slope:.4f}"])
    if fmt == "csv":
        return "\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n"
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def cmd_oracle(ctx: RunContext) -> int:
    """Operator order against the quadrature oracle; passes on slope >= min_slope or exactness."""
    block = ctx.run.oracle
    oracle = ctx.settings.oracle
    v, dv = smooth_function(block.function, **block.params)
    weight_params = dict(block.weight)
    w = make_weight(str(weight_params.pop("name", "exp")), **weight_params)

    results = []
    passed = True
    for alpha in block.alphas:
        report = order_study(v, dv, alpha, w, block.horizon, block.steps, tol=oracle.tol,
                             exact_threshold=oracle.exact_threshold, jobs=ctx.jobs)
        slope = report.finest_slope
        ok = report.exact or (slope is not None and slope >= oracle.min_slope)
        if report.exact:
            logger.info(f"alpha={alpha}: errors at rounding level, slope check skipped")
        else:
            logger.info(f"alpha={alpha}: finest slope {slope}")
        if not ok:
            logger.error(f"alpha={alpha}: finest slope {slope} below {oracle.min_slope}")
        passed = passed and ok
        entry = report.to_dict()
        entry["metadata"]["function"] = block.function
        entry["passed"] = ok
        results.append(entry)

    ctx.write(_oracle_text(results, ctx.format, ctx.digits), f"oracle_{block.function}")
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracstep",
        description="Solvers and verification for time-fractional diffusion with a weighted Caputo derivative",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--output", help="Output directory (created if missing)")
    common.add_argument("--format", choices=FORMATS, help="Report format")
    common.add_argument("--seed", type=int, help="Seed for the random property suites")
    common.add_argument("--jobs", type=int, help="Worker threads (default: FRACSTEP_JOBS or 1)")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Logging level")

    subparsers.add_parser("solve", parents=[common], help="Run one (N, M) solve")
    study = subparsers.add_parser("study", parents=[common], help="Run a refinement study")
    study.add_argument("--preset", choices=sorted(PRESETS), help="Reproduce a reference table")
    subparsers.add_parser("verify", parents=[common], help="Run the property suites")
    subparsers.add_parser("oracle", parents=[common], help="Measure the operator order")
    return parser


HANDLERS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
}


def load_settings() -> FracstepConfig:
    """Settings from the environment or FRACSTEP_CONFIG_FILE; bad values raise ConfigError."""
    try:
        return get_config()
    except ValueError as e:
        raise ConfigError(f"invalid settings: {e}") from e


def _configure_logging(level: Optional[str]) -> None:
    logging.basicConfig(
        level=getattr(logging, (level or "INFO").upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = load_settings()
    except ConfigError as e:
        _configure_logging(args.log_level)
        logger.error(f"Configuration error: {e}")
        return 2
    _configure_logging(args.log_level or settings.processing.log_level)

    try:
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError(f"--jobs must be at least 1, got {args.jobs}")
        run = load_run_config(args.config)
        if run.command is not None and run.command != args.command:
            raise ConfigError(f"configuration is for '{run.command}', not '{args.command}'")
        ctx = RunContext(args, run, settings)
        logger.info(f"fracstep {args.command} (jobs={ctx.jobs}, output={ctx.output_dir})")
        if args.command == "study":
            return cmd_study(ctx, preset=args.preset)
        return HANDLERS[args.command](ctx)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return 2
    except FracstepError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
