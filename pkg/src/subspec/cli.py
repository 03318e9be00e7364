"""Config-driven execution: case runs, parameter sweeps, report emission.

Configuration files are flat ``key = value`` text with dotted key names (see
``SCHEMA``; the README documents every key).  Reports are written as a JSON
Lines file whose first line is a timestamp header (everything after it is
byte-reproducible for a fixed seed), a delimiter-separated plot table, and a
human-readable summary.  Exit status is 0 exactly when no check came back
violated-beyond-tolerance.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, ProbeError, SolverError, SubspecError, UnsupportedCaseError
from .geometry import (
    FiberSpec,
    ProbeSettings,
    SubmersionCase,
    Tolerances,
    WarpFunction,
    WeightedInterval,
)
from .spectral import spectrum_report
from .verify import RANDOMIZED_CHECKS, TheoremReport, run_checks

REPORT_FORMAT = "subspec-report"
REPORT_VERSION = 1


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------

def _bool(text: str) -> bool:
    if text.lower() in ("true", "yes", "1"):
        return True
    if text.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _float_or_none(text: str):
    return None if text.lower() in ("none", "auto") else float(text)


def _int_or_none(text: str):
    return None if text.lower() in ("none", "auto") else int(text)


def _floats(text: str):
    return tuple(float(x) for x in text.split())


def _words(text: str):
    return tuple(text.split())


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return text
    return parse


# key -> (parser, default, documentation)
SCHEMA: dict[str, tuple] = {
    "case.name": (str, None, "case identifier (required)"),
    "case.kind": (_choice("product", "warped"), "warped", "product or warped"),
    "case.base.lo": (float, None, "left endpoint of the base interval (required)"),
    "case.base.hi": (float, None, "right endpoint of the base interval (required)"),
    "case.base.weight.family": (_choice(*("constant", "exponential", "gaussian", "cosh", "sinh")),
                                "constant", "base density family"),
    "case.base.weight.a": (float, 1.0, "base density rate parameter"),
    "case.base.weight.c": (float, 1.0, "base density scale (positive)"),
    "case.base.weight.power": (int, 1, "integer power of the density factor"),
    "case.base.bc.lo": (_choice("dirichlet", "neumann", "pole-regular"),
                        "dirichlet", "left boundary condition"),
    "case.base.bc.hi": (_choice("dirichlet", "neumann", "pole-regular"),
                        "dirichlet", "right boundary condition"),
    "case.base.truncated.lo": (_bool, False, "left end stands for -infinity"),
    "case.base.truncated.hi": (_bool, False, "right end stands for +infinity"),
    "case.base.lambda0_reference": (_float_or_none, None,
                                    "analytic bottom of the untruncated base, if known"),
    "case.warp.family": (_choice(*("constant", "exponential", "gaussian", "cosh", "sinh", "tabulated")),
                         "constant", "warp family"),
    "case.warp.a": (float, 1.0, "warp rate parameter"),
    "case.warp.c": (float, 1.0, "warp scale (positive)"),
    "case.warp.nodes": (_floats, None, "tabulated warp nodes"),
    "case.warp.samples": (_floats, None, "tabulated warp samples (positive)"),
    "case.fiber.kind": (_choice("circle", "sphere", "torus", "explicit", "noncompact"),
                        "circle", "fiber kind"),
    "case.fiber.radius": (float, 1.0, "circle radius"),
    "case.fiber.dim": (int, 1, "fiber dimension (sphere k, noncompact, explicit)"),
    "case.fiber.lengths": (_floats, None, "flat torus side lengths"),
    "case.fiber.eigenvalues": (_floats, None, "explicit fiber eigenvalues (start at 0)"),
    "case.fiber.volume": (_float_or_none, None, "explicit fiber volume"),
    "case.fiber.lambda0": (float, 0.0, "bottom of spectrum of a noncompact fiber"),
    "case.grid.n": (int, 800, "number of grid cells"),
    "case.grid.grading": (_choice("uniform", "tanh-clustered"), "uniform", "grid grading"),
    "case.modes.cutoff": (_int_or_none, None, "fixed mode cutoff (auto when absent)"),
    "case.solve.k": (int, 6, "number of reported eigenvalues"),
    "case.tensor.lo": (_float_or_none, None, "tensor subrange left end"),
    "case.tensor.hi": (_float_or_none, None, "tensor subrange right end"),
    "case.tensor.n": (_int_or_none, None, "tensor radial cells"),
    "case.tensor.ntheta": (int, 64, "tensor fiber nodes"),
    "case.probe.radii": (_floats, None, "exhaustion probe radii"),
    "case.probe.base_truncation": (_float_or_none, None,
                                   "wider truncation for base-only probes"),
    "case.probe.total_truncation": (_float_or_none, None,
                                    "wider truncation for total-space probes"),
    "case.mean_curvature_override": (_float_or_none, None,
                                     "testing hook: replace the declared bound C"),
    "run.checks": (_words, ("lower-bound", "upper-bound", "schrodinger-comparison",
                            "lift-identity"),
                   "checks to execute, in order"),
    "run.seed": (_int_or_none, None, "seed for randomized trials"),
    "run.trials": (int, 100, "number of seeded random trials"),
    "sweep.axis": (_choice("R", "n", "warp_a"), None, "sweep axis"),
    "sweep.values": (_floats, None, "sweep axis values"),
    "sweep.workers": (int, 4, "bounded worker pool size for sweep points"),
    "tolerance.solver": (float, 1e-10, "eigenpair residual tolerance"),
    "tolerance.identity": (float, 1e-12, "exact-identity tolerance"),
    "tolerance.budget_safety": (float, 2.0, "safety factor on error estimates"),
    "tolerance.slope_threshold": (float, 0.5, "log-log slope for discreteness"),
    "tolerance.slack_coeff": (float, 0.5, "O(h^2) slack coefficient"),
    "output.prefix": (str, None, "output file prefix (defaults to the case name)"),
}

REQUIRED_KEYS = ("case.name", "case.base.lo", "case.base.hi")


@dataclass(frozen=True)
class CaseConfig:
    """Parsed configuration: raw values plus the constructed case."""

    values: dict
    path: str

    @property
    def case(self) -> SubmersionCase:
        return build_case(self.values)

    @property
    def checks(self) -> tuple[str, ...]:
        return tuple(self.values["run.checks"])

    @property
    def seed(self):
        return self.values["run.seed"]

    @property
    def trials(self) -> int:
        return self.values["run.trials"]

    @property
    def prefix(self) -> str:
        return self.values["output.prefix"] or self.values["case.name"]


def parse_config(path) -> CaseConfig:
    """Parse a flat key = value file; unknown keys are rejected with the line."""
    values = {k: spec[1] for k, spec in SCHEMA.items()}
    seen = set()
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
            key, _, text = line.partition("=")
            key, text = key.strip(), text.strip()
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}", lineno)
            if key in seen:
                raise ConfigError(f"duplicate key {key!r}", lineno)
            seen.add(key)
            parser = SCHEMA[key][0]
            try:
                values[key] = parser(text)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key}: {exc}", lineno) from None
    for key in REQUIRED_KEYS:
        if values[key] is None:
            raise ConfigError(f"missing required key {key!r}")
    randomized = set(values["run.checks"]) & set(RANDOMIZED_CHECKS)
    if randomized and values["run.trials"] > 0 and values["run.seed"] is None:
        raise ConfigError(
            f"run.seed is mandatory when random trials are requested "
            f"(checks: {sorted(randomized)})"
        )
    return CaseConfig(values=values, path=str(path))


def build_case(v: dict) -> SubmersionCase:
    """Construct the immutable case from parsed config values."""
    weight = WarpFunction(
        family=v["case.base.weight.family"],
        a=v["case.base.weight.a"],
        c=v["case.base.weight.c"],
        power=v["case.base.weight.power"],
    )
    base = WeightedInterval(
        lo=v["case.base.lo"], hi=v["case.base.hi"], weight=weight,
        bc_lo=v["case.base.bc.lo"], bc_hi=v["case.base.bc.hi"],
        truncated_lo=v["case.base.truncated.lo"],
        truncated_hi=v["case.base.truncated.hi"],
        lambda0_reference=v["case.base.lambda0_reference"],
    )
    if v["case.warp.family"] == "tabulated":
        warp = WarpFunction("tabulated", nodes=v["case.warp.nodes"],
                            samples=v["case.warp.samples"])
    else:
        warp = WarpFunction(v["case.warp.family"], a=v["case.warp.a"],
                            c=v["case.warp.c"])
    kind = v["case.fiber.kind"]
    if kind == "circle":
        fiber = FiberSpec.circle(v["case.fiber.radius"])
    elif kind == "sphere":
        fiber = FiberSpec.sphere(v["case.fiber.dim"])
    elif kind == "torus":
        fiber = FiberSpec.torus(v["case.fiber.lengths"] or ())
    elif kind == "explicit":
        fiber = FiberSpec.explicit(v["case.fiber.eigenvalues"] or (),
                                   v["case.fiber.dim"], v["case.fiber.volume"] or 0.0)
    else:
        fiber = FiberSpec.noncompact(v["case.fiber.lambda0"], v["case.fiber.dim"])
    tol = Tolerances(
        solver=v["tolerance.solver"], identity=v["tolerance.identity"],
        budget_safety=v["tolerance.budget_safety"],
        slope_threshold=v["tolerance.slope_threshold"],
        slack_coeff=v["tolerance.slack_coeff"],
    )
    probes = ProbeSettings(radii=v["case.probe.radii"],
                           base_truncation=v["case.probe.base_truncation"],
                           total_truncation=v["case.probe.total_truncation"])
    tensor_range = None
    if v["case.tensor.lo"] is not None and v["case.tensor.hi"] is not None:
        tensor_range = (v["case.tensor.lo"], v["case.tensor.hi"])
    return SubmersionCase(
        name=v["case.name"], kind=v["case.kind"], base=base, warp=warp,
        fiber=fiber, resolution=v["case.grid.n"],
        mode_cutoff=v["case.modes.cutoff"], num_eigenvalues=v["case.solve.k"],
        tolerances=tol, probes=probes,
        mean_curvature_override=v["case.mean_curvature_override"],
        tensor_range=tensor_range, tensor_resolution=v["case.tensor.n"],
        tensor_ntheta=v["case.tensor.ntheta"],
    )


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

SPECTRUM_TARGETS = ("base", "schrodinger", "total")


def _spectrum_records(case: SubmersionCase) -> tuple[list[dict], dict]:
    """Spectrum records for the standard targets, plus the plot-row values."""
    records, row = [], {}
    for target in SPECTRUM_TARGETS:
        try:
            rep = spectrum_report(case, target)
        except SubspecError as exc:
            records.append({
                "record": "error", "case": case.name, "stage": f"spectrum:{target}",
                "error": type(exc).__name__, "message": str(exc),
            })
            row[target] = None
            continue
        records.append(_spectrum_to_record(rep))
        row[target] = rep.lambda0
    return records, row


def _spectrum_to_record(rep) -> dict:
    rec = {
        "record": "spectrum",
        "case": rep.case,
        "target": rep.target,
        "lambda0": rep.lambda0,
        "values": [
            {"value": s.value, "mode": list(s.mode) if s.mode else None,
             "residual": s.residual}
            for s in rep.values
        ],
        "n": rep.n,
        "solver_tol": rep.solver_tol,
        "richardson": dataclasses.asdict(rep.richardson) if rep.richardson else None,
        "truncation": dataclasses.asdict(rep.truncation) if rep.truncation else None,
        "mode_cutoff": rep.mode_cutoff,
    }
    return rec


def run_point(case: SubmersionCase, checks, seed, trials):
    """All records for one case evaluation; solver failures become records."""
    records, row = _spectrum_records(case)
    theorem_rows = {}
    for name in checks:
        try:
            reports = run_checks(case, [name], seed=seed, trials=trials)
        except SubspecError as exc:
            records.append({
                "record": "error", "case": case.name, "stage": f"check:{name}",
                "error": type(exc).__name__, "message": str(exc),
            })
            continue
        for rep in reports:
            records.append(rep.to_record())
            theorem_rows[rep.theorem] = rep
    return records, row, theorem_rows


def _table_row(axis: str, value, row: dict, theorem_rows: dict) -> dict:
    def slack(name):
        rep = theorem_rows.get(name)
        return rep.slack if rep is not None and math.isfinite(rep.slack) else None

    def bound(name):
        rep = theorem_rows.get(name)
        return rep.rhs if rep is not None and math.isfinite(rep.rhs) else None

    return {
        "axis": axis,
        "value": value,
        "lambda0_base": row.get("base"),
        "lambda0_schrodinger": row.get("schrodinger"),
        "lambda0_total": row.get("total"),
        "lower_bound_rhs": bound("lower-bound"),
        "upper_bound_rhs": bound("upper-bound"),
        "lower_bound_slack": slack("lower-bound"),
        "upper_bound_slack": slack("upper-bound"),
        "schrodinger_slack": slack("schrodinger-comparison"),
    }


TABLE_COLUMNS = ("axis", "value", "lambda0_base", "lambda0_schrodinger",
                 "lambda0_total", "lower_bound_rhs", "upper_bound_rhs",
                 "lower_bound_slack", "upper_bound_slack", "schrodinger_slack")


def _fmt_cell(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_report(path: Path, records: list[dict], seed) -> None:
    header = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "generated": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for rec in records:
        lines.append(json.dumps(rec, sort_keys=True))
    _atomic_write(path, "\n".join(lines) + "\n")


def _write_table(path: Path, rows: list[dict]) -> None:
    lines = ["\t".join(TABLE_COLUMNS)]
    for row in rows:
        lines.append("\t".join(_fmt_cell(row[c]) for c in TABLE_COLUMNS))
    _atomic_write(path, "\n".join(lines) + "\n")


def _verdict_counts(records) -> dict:
    counts: dict[str, int] = {}
    for rec in records:
        if rec.get("record") == "theorem":
            counts[rec["verdict"]] = counts.get(rec["verdict"], 0) + 1
    return counts


def _write_summary(path: Path, case_name: str, records: list[dict],
                   monotone_notes: list[str]) -> None:
    lines = [f"case: {case_name}", ""]
    for rec in records:
        if rec.get("record") == "spectrum":
            t = rec["truncation"]
            extra = f"  limit~{t['limit_estimate']:.6g}" if t else ""
            lines.append(
                f"  spectrum[{rec['target']}]: lambda0 = {rec['lambda0']:.8g}"
                f" (n = {rec['n']}){extra}"
            )
    for rec in records:
        if rec.get("record") == "theorem":
            slack = rec["slack"]
            stxt = "n/a" if slack is None else f"{slack:.3g}"
            lines.append(
                f"  {rec['theorem']}: {rec['verdict']}"
                f" (slack = {stxt}, budget = {rec['budget']['total']:.3g})"
            )
    for rec in records:
        if rec.get("record") == "error":
            lines.append(f"  ERROR {rec['stage']}: {rec['message']}")
    for note in monotone_notes:
        lines.append(f"  note: {note}")
    counts = _verdict_counts(records)
    lines.append("")
    lines.append("verdicts: " + (json.dumps(counts, sort_keys=True) if counts else "none"))
    _atomic_write(path, "\n".join(lines) + "\n")


def _exit_status(records) -> int:
    return 1 if _verdict_counts(records).get("violated-beyond-tolerance") else 0


def run_config(cfg: CaseConfig, outdir: Path) -> int:
    case = cfg.case
    records, row, theorems = run_point(case, cfg.checks, cfg.seed, cfg.trials)
    rows = [_table_row("-", "", row, theorems)]
    _write_report(outdir / f"{cfg.prefix}_report.jsonl", records, cfg.seed)
    _write_table(outdir / f"{cfg.prefix}_table.tsv", rows)
    _write_summary(outdir / f"{cfg.prefix}_summary.txt", case.name, records, [])
    return _exit_status(records)


def _case_for_axis(case: SubmersionCase, axis: str, value: float) -> SubmersionCase:
    if axis == "n":
        return case.with_resolution(int(value))
    if axis == "warp_a":
        return case.with_warp_parameter(float(value))
    if axis == "R":
        base = case.base
        span = base.hi - base.lo
        if base.truncated_hi and not base.truncated_lo:
            newb = base.with_range(base.lo, base.lo + value)
        elif base.truncated_lo and not base.truncated_hi:
            newb = base.with_range(base.hi - value, base.hi)
        elif base.truncated_lo and base.truncated_hi:
            mid = 0.5 * (base.lo + base.hi)
            newb = base.with_range(mid - value, mid + value)
        else:
            raise UnsupportedCaseError("R sweep needs a truncated base end")
        n = max(32, int(round(case.resolution * (newb.hi - newb.lo) / span)))
        return replace(case, base=newb, resolution=n)
    raise UnsupportedCaseError(f"unknown sweep axis {axis!r}")


def sweep_config(cfg: CaseConfig, outdir: Path, axis: str | None = None) -> int:
    axis = axis or cfg.values["sweep.axis"]
    sweep_values = cfg.values["sweep.values"]
    if axis is None or not sweep_values:
        raise ConfigError("sweep needs sweep.axis and a nonempty sweep.values")
    case = cfg.case
    workers = max(1, min(cfg.values["sweep.workers"], len(sweep_values)))

    def point(value):
        return run_point(_case_for_axis(case, axis, value), cfg.checks,
                         cfg.seed, cfg.trials)

    results = [None] * len(sweep_values)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(point, v): i for i, v in enumerate(sweep_values)}
        for fut in concurrent.futures.as_completed(futures):
            results[futures[fut]] = fut.result()

    records, rows = [], []
    for value, (recs, row, theorems) in zip(sweep_values, results):
        for rec in recs:
            rec = dict(rec)
            rec["sweep"] = {"axis": axis, "value": value}
            records.append(rec)
        rows.append(_table_row(axis, value, row, theorems))

    notes = []
    if axis == "R":
        for col in ("lambda0_base", "lambda0_schrodinger", "lambda0_total"):
            series = [r[col] for r in rows if r[col] is not None]
            if any(b > a + 1e-12 * max(1.0, abs(a))
                   for a, b in zip(series, series[1:])):
                notes.append(f"column {col} is not monotone under the R sweep")
                records.append({"record": "monotonicity-flag", "case": case.name,
                                "column": col, "axis": axis})

    _write_report(outdir / f"{cfg.prefix}_sweep_{axis}_report.jsonl", records, cfg.seed)
    _write_table(outdir / f"{cfg.prefix}_sweep_{axis}.tsv", rows)
    _write_summary(outdir / f"{cfg.prefix}_sweep_{axis}_summary.txt",
                   case.name, records, notes)
    return _exit_status(records)


# ---------------------------------------------------------------------------
# Bundled cases and entry point
# ---------------------------------------------------------------------------

def bundled_cases() -> dict[str, Path]:
    root = resources.files("subspec").joinpath("cases")
    out = {}
    for entry in sorted(root.iterdir()):
        if entry.name.endswith(".case"):
            out[entry.name[:-5]] = Path(str(entry))
    return out


def resolve_config_path(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    cases = bundled_cases()
    stem = name[:-5] if name.endswith(".case") else name
    if stem in cases:
        return cases[stem]
    raise ConfigError(f"no such config file or bundled case: {name!r}")


def _case_description(path: Path) -> str:
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                return line.lstrip("# ").strip()
            if line:
                break
    return ""


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="subspec",
        description="Spectral checks for warped products over 1-D bases.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute the checks of one config")
    p_run.add_argument("config", help="config path or bundled case name")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override run.seed")
    p_run.add_argument("--trials", type=int, default=None, help="override run.trials")
    p_run.add_argument("--solver-tol", type=float, default=None,
                       help="override tolerance.solver")

    p_sweep = sub.add_parser("sweep", help="run a declared parameter sweep")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", default=None, choices=("R", "n", "warp_a"))
    p_sweep.add_argument("--out", default="out")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--trials", type=int, default=None)
    p_sweep.add_argument("--solver-tol", type=float, default=None)

    sub.add_parser("list-cases", help="list bundled case configurations")

    args = parser.parse_args(argv)

    if args.verb == "list-cases":
        for name, path in bundled_cases().items():
            print(f"{name:24s} {_case_description(path)}")
        return 0

    try:
        cfg = parse_config(resolve_config_path(args.config))
        values = dict(cfg.values)
        if args.seed is not None:
            values["run.seed"] = args.seed
        if args.trials is not None:
            values["run.trials"] = args.trials
        if args.solver_tol is not None:
            values["tolerance.solver"] = args.solver_tol
        cfg = CaseConfig(values=values, path=cfg.path)
        outdir = Path(args.out)
        if args.verb == "run":
            return run_config(cfg, outdir)
        return sweep_config(cfg, outdir, axis=args.axis)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
