"""Command-line front end.

Every command reads one config file, writes its tables to ``output.dir`` as
CSV and/or JSON, and records a ``manifest.json`` with the config hash and
tool version. Exit status: 0 success, 1 computational failure, 2 usage or
config error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import BaseModel, ValidationError

from . import __version__, model, structure
from .config import ExperimentConfig, SweepSpec, load
from .errors import HmabError, NonThresholdPolicy, NotConverged
from .index import compute_index, is_indexable
from .model import Kind
from .simulate import compare_policies, run_experiment
from .solver import solve

log = logging.getLogger("hmab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# --- declared row schemas (column order is the CSV column order) ----------

class ValueRow(BaseModel):
    arm: int
    w: float
    pi: float
    v_s: float
    v_ns: float
    v_tilde_s: float
    v_tilde_ns: float
    v: float
    v_tilde: float


class ThresholdRow(BaseModel):
    arm: int
    w: float
    y: int
    shape: structure.Shape
    pi_star: Optional[float]
    grid_pi_star: Optional[float]


class IndexRow(BaseModel):
    arm: int
    pi: float
    y: int
    index_w: float
    bisection_width: float
    method: str
    certified: bool
    probes: int


class BoundaryRow(BaseModel):
    arm: int
    w: float
    pi_L: Optional[float]
    pi_tilde_L: Optional[float]
    empty: bool


class SimRow(BaseModel):
    beta: float
    policy: str
    mean_reward: float
    stderr: float
    episodes: int
    gain_pct: Optional[float]


def columns(schema: type[BaseModel]) -> list[str]:
    return list(schema.model_fields)


def fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "%.9g" % v
    if hasattr(v, "value"):
        return str(v.value)
    return str(v)


class Writer:
    def __init__(self, out_dir: Path, formats: Sequence[str]):
        self.out_dir = out_dir
        self.formats = list(formats)
        self.files: list[str] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def table(self, name: str, schema: type[BaseModel], rows: list[dict], summary: Any = None):
        rows = [schema.model_validate(r).model_dump(mode="json") for r in rows]
        cols = columns(schema)
        if "csv" in self.formats:
            path = self.out_dir / f"{name}.csv"
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(cols)
                for r in rows:
                    w.writerow([fmt(r[c]) for c in cols])
            self.files.append(path.name)
        if "json" in self.formats:
            path = self.out_dir / f"{name}.json"
            doc = {"rows": rows}
            if summary is not None:
                doc["summary"] = summary
            path.write_text(json.dumps(doc, indent=1, default=_jsonable) + "\n")
            self.files.append(path.name)

    def manifest(self, command: str, config_path: str, digest: str, extra: dict):
        doc = {"command": command, "config": config_path, "config_sha256": digest,
               "tool": "hmab", "version": __version__, "files": self.files, **extra}
        (self.out_dir / "manifest.json").write_text(json.dumps(doc, indent=1) + "\n")


def _jsonable(o):
    if hasattr(o, "to_dict"):
        return o.to_dict()
    if hasattr(o, "value"):
        return o.value
    if hasattr(o, "tolist"):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


# --- commands --------------------------------------------------------------

def _subsidies(cfg: ExperimentConfig, args) -> list[float]:
    if args.w is not None:
        return [args.w]
    sweep = (args.w_from, args.w_to, args.w_step)
    if any(v is not None for v in sweep):
        if any(v is None for v in sweep):
            raise UsageError("--w-from, --w-to and --w-step must be given together")
        try:
            return SweepSpec(start=args.w_from, stop=args.w_to, step=args.w_step).values()
        except ValidationError as e:
            raise UsageError(str(e)) from e
    return cfg.subsidies()


def cmd_validate(cfg: ExperimentConfig, args, out: Writer) -> int:
    strict = cfg.strict_ordering or args.strict
    report = []
    bad = False
    for i, arm in enumerate(cfg.arm_params()):
        issues = [str(v) for v in model.validate(arm, strict_ordering=strict)]
        warnings = []
        if cfg.sim and "index" in [p.value for p in cfg.sim.policies] \
                and not model.rested_assumptions_hold(arm):
            warnings.append("index values for this arm are heuristic (needs rested dynamics "
                            "and rest-while-unavailable availability 0)")
        bad = bad or bool(issues)
        report.append({"arm": i, "violations": issues, "warnings": warnings})
        for msg in issues:
            print(f"arm {i}: {msg}")
        for msg in warnings:
            log.warning("arm %d: %s", i, msg)
    (out.out_dir / "validate.json").write_text(json.dumps({"arms": report}, indent=1) + "\n")
    out.files.append("validate.json")
    print("invalid" if bad else "ok")
    return EXIT_FAIL if bad else EXIT_OK


def cmd_solve(cfg: ExperimentConfig, args, out: Writer) -> int:
    rows, summary = [], []
    for i, arm in enumerate(cfg.arm_params()):
        for w in _subsidies(cfg, args):
            t = solve(arm, cfg.solver_config(w=w))
            summary.append({"arm": i, "w": w, "iterations": t.iterations,
                            "residual": t.residual, "converged": t.converged})
            if not t.converged:
                print(f"arm {i}, w={w}: not converged, residual {t.residual:.3g}", file=sys.stderr)
                raise NotConverged(f"residual {t.residual:.3g}", tables=t)
            for k, pi in enumerate(t.grid):
                rows.append({"arm": i, "w": w, "pi": float(pi),
                             **{name: float(a[k]) for name, a in t.arrays().items()}})
    out.table("values", ValueRow, rows, summary)
    return EXIT_OK


def cmd_threshold(cfg: ExperimentConfig, args, out: Writer) -> int:
    rows, reports = [], []
    for i, arm in enumerate(cfg.arm_params()):
        for w in _subsidies(cfg, args):
            conf = cfg.solver_config(w=w)
            t = solve(arm, conf).require_converged()
            rep = structure.analyze(t, arm, conf)
            reports.append({"arm": i, **rep.to_dict()})
            for y, r in rep.threshold.items():
                rows.append({"arm": i, "w": w, "y": y, "shape": r.shape,
                             "pi_star": r.pi_star, "grid_pi_star": r.grid_pi_star})
    out.table("threshold", ThresholdRow, rows, reports)
    return EXIT_OK


def cmd_index(cfg: ExperimentConfig, args, out: Writer) -> int:
    beliefs = args.pi if args.pi else cfg.index.beliefs
    avail = args.y if args.y else cfg.index.availability
    rows = []
    for i, arm in enumerate(cfg.arm_params()):
        if arm.kind is Kind.RESTLESS:
            log.warning("arm %d is restless; its index is a heuristic", i)
        for pi in beliefs:
            for y in avail:
                r = compute_index(arm, pi, y, cfg.solver_config(), w_tolerance=cfg.index.w_tolerance)
                rows.append({"arm": i, **r.to_dict()})
    out.table("index", IndexRow, rows)
    return EXIT_OK


def cmd_indexability(cfg: ExperimentConfig, args, out: Writer) -> int:
    ws = _subsidies(cfg, args)
    if args.w is None and cfg.subsidy_sweep is None and args.w_from is None:
        ws = SweepSpec(start=0.0, stop=1.0, step=0.01).values()
    rows, verdicts = [], []
    ok = True
    for i, arm in enumerate(cfg.arm_params()):
        try:
            rep = is_indexable(arm, ws, cfg.solver_config())
        except NonThresholdPolicy as e:
            ok = False
            verdicts.append({"arm": i, "passed": False, "reason": str(e)})
            print(f"arm {i}: FAIL ({e})")
            continue
        ok = ok and rep.passed
        verdicts.append({"arm": i, "passed": rep.passed, "nested_on_grid": rep.nested_on_grid,
                         "violation": list(rep.violation) if rep.violation else None})
        print(f"arm {i}: {'pass' if rep.passed else 'FAIL'}")
        rows.extend({"arm": i, **r.to_dict()} for r in rep.regions)
    out.table("indexability", BoundaryRow, rows, verdicts)
    return EXIT_OK if ok else EXIT_FAIL


def _sim_config(cfg: ExperimentConfig, args, beta: Optional[float] = None):
    if cfg.sim is None:
        raise UsageError("config has no 'sim' section")
    sc = cfg.sim_config(beta)
    if args.episodes is not None:
        sc = replace(sc, episodes=args.episodes)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    return sc


def _workers(cfg: ExperimentConfig, args) -> int:
    return args.workers if args.workers is not None else cfg.sim.workers


def cmd_simulate(cfg: ExperimentConfig, args, out: Writer) -> int:
    rep = run_experiment(_sim_config(cfg, args), workers=_workers(cfg, args))
    out.table("simulation", SimRow, rep.rows(), [rep.to_dict()])
    _print_reports([rep])
    return EXIT_OK


def cmd_compare(cfg: ExperimentConfig, args, out: Writer) -> int:
    sc = _sim_config(cfg, args)
    betas = [args.beta] if args.beta is not None else (cfg.sim.betas or [cfg.beta])
    reps = compare_policies(sc, betas, workers=_workers(cfg, args))
    out.table("comparison", SimRow, [r for rep in reps for r in rep.rows()],
              [rep.to_dict() for rep in reps])
    _print_reports(reps)
    return EXIT_OK


def _print_reports(reps) -> None:
    for rep in reps:
        means = "  ".join(f"{p.value}={s.mean_reward:.4f}±{s.stderr:.4f}" for p, s in rep.stats.items())
        gain = f"  gain={rep.gain.pct:.2f}%" if rep.gain is not None else ""
        print(f"beta={rep.beta:g}  {means}{gain}")


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "threshold": cmd_threshold,
    "index": cmd_index,
    "indexability": cmd_indexability,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hmab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"hmab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("--config", required=True, help="JSON or YAML experiment file")
        c.add_argument("--out", help="output directory (overrides output.dir)")
        c.add_argument("--format", choices=["csv", "json"], help="write only this format")
        c.add_argument("--beta", type=float)
        c.add_argument("--w", type=float, help="single subsidy")
        c.add_argument("--w-from", type=float)
        c.add_argument("--w-to", type=float)
        c.add_argument("--w-step", type=float)
        c.add_argument("--episodes", type=int)
        c.add_argument("--seed", type=int)
        c.add_argument("--workers", type=int)
        c.add_argument("--pi", type=float, nargs="+", help="beliefs for the index command")
        c.add_argument("--y", type=int, nargs="+", choices=[0, 1])
        c.add_argument("--strict", action="store_true", help="enforce the reward ordering")
    return p


def _configure_logging() -> None:
    level = os.environ.get("BANDIT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_USAGE
    try:
        cfg, digest = load(args.config)
        if args.beta is not None:
            cfg = ExperimentConfig.model_validate({**cfg.model_dump(by_alias=True), "beta": args.beta})
        out_dir = Path(args.out or cfg.output.dir)
        out = Writer(out_dir, [args.format] if args.format else cfg.output.formats)
        status = COMMANDS[args.command](cfg, args, out)
    except (OSError, ValueError, ValidationError, UsageError) as e:
        # pydantic's ValidationError and json errors are ValueErrors
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except HmabError as e:
        print(f"failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL
    extra = {"seed": cfg.sim.seed if cfg.sim else None}
    if args.seed is not None:
        extra["seed"] = args.seed
    out.manifest(args.command, str(args.config), digest, extra)
    return status


if __name__ == "__main__":
    sys.exit(main())
