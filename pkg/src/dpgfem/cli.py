"""Command line driver for convergence studies.

    dpgfem run --experiment 1 --levels 5 --out results.csv --jump-out jump.dat

A config file of ``key=value`` lines (``#`` starts a comment) may be passed
with ``--config``; command-line flags override its values.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

from .assembly import assemble, discretize
from .fespace import MAX_DEGREE
from .problem import ProblemDef, experiment1, experiment2
from .solver import ERROR_NAMES, ErrorReport, compute_errors, eoc, jump_samples, solve

log = logging.getLogger("dpgfem")

CSV_COLUMNS = (
    ["level", "h", "N"]
    + list(ERROR_NAMES)
    + ["eoc_u1", "eoc_sigma", "eoc_u2", "eoc_uhat", "eoc_sighat", "eoc_energy", "eoc_jump"]
)
FLOAT_FMT = "{:.11e}"


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str = "1"
    levels: int = 5
    base_n: int = 2
    kappa: float = 1.0
    coupling: str = "weak"
    quad_degree: int = 6
    out: str = "results.csv"
    jump_out: str = "jump.dat"


_CONVERTERS = {
    "experiment": str,
    "levels": int,
    "base_n": int,
    "kappa": float,
    "coupling": str,
    "quad_degree": int,
    "out": str,
    "jump_out": str,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dpgfem", description="Coupled DPG-FEM convergence studies.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run a convergence study")
    run.add_argument("--config", help="file with key=value lines")
    run.add_argument("--experiment", choices=["1", "2"])
    run.add_argument("--levels", type=int)
    run.add_argument("--base-n", dest="base_n", type=int)
    run.add_argument("--kappa", type=float)
    run.add_argument("--coupling", choices=["weak", "strong"])
    run.add_argument("--quad-degree", dest="quad_degree", type=int)
    run.add_argument("--out")
    run.add_argument("--jump-out", dest="jump_out")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def read_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONVERTERS[key](value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return values


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.experiment not in ("1", "2"):
        raise UsageError(f"experiment must be 1 or 2, got {cfg.experiment!r}")
    if cfg.coupling not in ("weak", "strong"):
        raise UsageError(f"coupling must be weak or strong, got {cfg.coupling!r}")
    if cfg.levels < 1:
        raise UsageError(f"--levels must be >= 1, got {cfg.levels}")
    if cfg.base_n < 1:
        raise UsageError(f"--base-n must be >= 1, got {cfg.base_n}")
    if not cfg.kappa > 0:
        raise UsageError(f"--kappa must be positive, got {cfg.kappa}")
    if not 1 <= cfg.quad_degree <= MAX_DEGREE:
        raise UsageError(f"--quad-degree must be in 1..{MAX_DEGREE}, got {cfg.quad_degree}")
    for name in ("out", "jump_out"):
        parent = Path(getattr(cfg, name)).resolve().parent
        if not parent.is_dir() or not os.access(parent, os.W_OK):
            raise UsageError(f"cannot write {name} file into {parent}")
    return cfg


def parse_config(argv: list[str], config_file: str | None = None) -> RunConfig:
    """Defaults, overridden by the config file, overridden by flags."""
    ns = _build_parser().parse_args(argv)
    values = {}
    path = ns.config or config_file
    if path is not None:
        values.update(read_config_file(path))
    for f in fields(RunConfig):
        v = getattr(ns, f.name, None)
        if v is not None:
            values[f.name] = v
    return _validate(RunConfig(**values))


def problem_for(cfg: RunConfig) -> ProblemDef:
    return experiment1() if cfg.experiment == "1" else experiment2()


def _fmt(v) -> str:
    return "" if v is None else FLOAT_FMT.format(v)


def csv_lines(reports: list[ErrorReport]) -> list[str]:
    lines = [",".join(CSV_COLUMNS)]
    rates = eoc(reports) if len(reports) > 1 else {k: [] for k in ERROR_NAMES}
    for level, r in enumerate(reports):
        row = [str(level), _fmt(r.h), str(r.N)] + [_fmt(getattr(r, k)) for k in ERROR_NAMES]
        row += [_fmt(rates[k][level - 1]) if level > 0 else "" for k in ERROR_NAMES]
        lines.append(",".join(row))
    return lines


def run_convergence(cfg: RunConfig, problem: ProblemDef | None = None):
    """Solve on levels n = base_n * 2**level and write the CSV and jump files.

    Returns the list of error reports and the jump samples of the finest level.
    """
    if problem is None:
        problem = problem_for(cfg)
    reports = []
    samples = None
    for level in range(cfg.levels):
        n = cfg.base_n * 2**level
        t0 = time.perf_counter()
        try:
            disc = discretize(problem, n, cfg.coupling)
            system = assemble(disc, problem, cfg.kappa, cfg.quad_degree)
            sol = solve(system)
        except Exception as exc:
            raise RuntimeError(f"level {level} (n={n}) failed: {exc}") from exc
        report = compute_errors(sol, problem, disc, system.local, cfg.kappa, cfg.quad_degree)
        reports.append(report)
        if level == cfg.levels - 1:
            samples = jump_samples(sol, disc)
        log.info("level %d n=%d N=%d %.2fs", level, n, report.N, time.perf_counter() - t0)

    Path(cfg.out).write_text("\n".join(csv_lines(reports)) + "\n")
    jump = ["# s x y jump"] + [" ".join(FLOAT_FMT.format(v) for v in row) for row in samples]
    Path(cfg.jump_out).write_text("\n".join(jump) + "\n")
    return reports, samples


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except (UsageError, OSError) as exc:
        print(f"dpgfem: usage error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(
        level=logging.INFO if "-v" in argv or "--verbose" in argv else logging.WARNING,
        format="%(message)s",
    )
    try:
        reports, _ = run_convergence(cfg)
    except Exception as exc:
        print(f"dpgfem: error: {exc}", file=sys.stderr)
        return 1
    for line in csv_lines(reports):
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
