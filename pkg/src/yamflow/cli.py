"""Command line runner: named experiments, convergence sweeps, spot checks.

Three subcommands:

    run    --config c.json [--out DIR] [--jobs K]
    sweep  --config c.json --levels M [--out DIR]
    verify --case NAME --p VAL [--dt VAL]

run executes every configured case: it writes the initial and final metric
snapshots, the flow trajectory table, and per exponent the minimizer, its
Newton history, and the evolution-rate report, then assembles summary.csv
and summary.md at the output root.  The exit status is 1 exactly when some
trusted report misses its threshold, 2 for a rejected config, 3 for an IO
failure.  Cases run in parallel under --jobs; each case writes only inside
its own directory, so the artifacts do not depend on scheduling.

sweep reruns the first configured case over grid halvings and reports
observed convergence orders (patch curvature on an embedded cylinder, the
integrator against the shrinking-cylinder solution, and the rate report's
rel_error), as orders.csv and orders.md.

All outputs are byte-deterministic for a fixed config: floats are written
with repr, JSON keys are sorted, and nothing records wall-clock time.  The
output root is taken from --out, then the config, then $YAMFLOW_OUT, then
./yamflow_out.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .cases import CASE_BUILDERS, ShrinkingCylinder
from .flow import (
    FlowParams,
    FlowState,
    IntegratedFamily,
    SingularTimeError,
    evolve,
    step_once,
)
from .patch_geometry import curvature_bundle
from .rate_checks import verify_rate_formula
from .warped import WarpedMetric, embed_to_patch
from .yamabe import SubcriticalProblem, critical_exponent, solve_subcritical

__all__ = ["main", "parse_config", "run_config", "run_sweep", "ConfigError"]

_NAMED_CASES = ("cylinder", "hemisphere", "perturbed_cylinder")
_CASE_PARAM_KEYS = {
    "cylinder": {"radius", "length", "unit_volume"},
    "hemisphere": {"radius", "unit_volume"},
    "perturbed_cylinder": {"amplitude", "unit_volume"},
}
_ENTRY_KEYS = {
    "case", "label", "n", "N", "p_list", "dt", "flow", "params", "metric_file",
}
_FLOW_KEYS = {"cfl", "t_end", "scheme", "monitor_every"}
_FLOW_DEFAULTS = {
    "cfl": 0.2, "t_end": 0.02, "scheme": "rk4", "monitor_every": 100,
}
_ROOT_ONLY_KEYS = {"out", "threshold", "abs_threshold", "seed", "cases"}
_DEFAULT_THRESHOLD = 2e-2      # relative bound for trusted reports
_DEFAULT_ABS_THRESHOLD = 5e-3  # equality-case bound on both rates
_MIN_GRID = 16


class ConfigError(ValueError):
    """A config file failed validation; nothing has been computed."""


def _fail(msg: str) -> None:
    raise ConfigError(msg)


def _require_number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"{key} must be a number, got {value!r}")
    if not math.isfinite(value):
        _fail(f"{key} must be finite, got {value!r}")
    return float(value)


def _require_int(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(f"{key} must be an integer, got {value!r}")
    return int(value)


def _validate_entry(raw: dict, index: int) -> dict:
    where = f"cases[{index}]" if index >= 0 else "config"
    unknown = set(raw) - _ENTRY_KEYS
    if unknown:
        _fail(f"{where}: unknown keys {sorted(unknown)}")
    case = raw.get("case")
    if case not in _NAMED_CASES + ("from_file",):
        _fail(f"{where}: case must be one of "
              f"{sorted(_NAMED_CASES + ('from_file',))}, got {case!r}")

    label = raw.get("label", case)
    if not isinstance(label, str) or not label:
        _fail(f"{where}: label must be a non-empty string")
    if not all(c.isalnum() or c in "._-" for c in label):
        _fail(f"{where}: label {label!r} is not filesystem safe")

    entry: dict = {"case": case, "label": label}

    if case == "from_file":
        for key in ("n", "N", "params"):
            if key in raw:
                _fail(f"{where}: {key} comes from the metric file, "
                      f"remove it for case from_file")
        path = raw.get("metric_file")
        if not isinstance(path, str) or not path:
            _fail(f"{where}: case from_file requires metric_file")
        try:
            data = json.loads(Path(path).read_text())
            metric = WarpedMetric.from_dict(data)
        except OSError as err:
            _fail(f"{where}: cannot read metric_file {path}: {err}")
        except (ValueError, KeyError, TypeError) as err:
            _fail(f"{where}: bad metric file {path}: {err}")
        entry["metric_data"] = metric.to_dict()
        entry["n"] = metric.n
        entry["N"] = metric.N
    else:
        if "metric_file" in raw:
            _fail(f"{where}: metric_file only applies to case from_file")
        entry["n"] = _require_int(raw.get("n", 3), f"{where}.n")
        if entry["n"] < 3:
            _fail(f"{where}: n must be at least 3, got {entry['n']}")
        entry["N"] = _require_int(raw.get("N", 128), f"{where}.N")
        if entry["N"] < _MIN_GRID:
            _fail(f"{where}: N must be at least {_MIN_GRID}, got {entry['N']}")
        params = raw.get("params", {})
        if not isinstance(params, dict):
            _fail(f"{where}: params must be an object")
        allowed = _CASE_PARAM_KEYS[case]
        unknown = set(params) - allowed
        if unknown:
            _fail(f"{where}: params for {case} accept {sorted(allowed)}, "
                  f"got unknown {sorted(unknown)}")
        clean = {"unit_volume": True}
        for key, value in params.items():
            if key == "unit_volume":
                if not isinstance(value, bool):
                    _fail(f"{where}: params.unit_volume must be a boolean")
                clean[key] = value
            else:
                clean[key] = _require_number(value, f"{where}.params.{key}")
                if clean[key] <= 0.0:
                    _fail(f"{where}: params.{key} must be positive")
        entry["params"] = clean

    p_list = raw.get("p_list")
    if not isinstance(p_list, list) or not p_list:
        _fail(f"{where}: p_list must be a non-empty list of exponents")
    p_max = critical_exponent(entry["n"])
    entry["p_list"] = []
    for k, p in enumerate(p_list):
        p = _require_number(p, f"{where}.p_list[{k}]")
        if not 1.0 < p <= p_max:
            _fail(f"{where}: p_list[{k}] = {p} outside (1, {p_max}] "
                  f"for n = {entry['n']}")
        entry["p_list"].append(p)

    entry["dt"] = _require_number(raw.get("dt", 1e-4), f"{where}.dt")
    if entry["dt"] <= 0.0:
        _fail(f"{where}: dt must be positive")

    flow_raw = raw.get("flow", {})
    if not isinstance(flow_raw, dict):
        _fail(f"{where}: flow must be an object")
    unknown = set(flow_raw) - _FLOW_KEYS
    if unknown:
        _fail(f"{where}: flow accepts {sorted(_FLOW_KEYS)}, "
              f"got unknown {sorted(unknown)}")
    flow = dict(_FLOW_DEFAULTS)
    flow.update(flow_raw)
    flow["cfl"] = _require_number(flow["cfl"], f"{where}.flow.cfl")
    flow["t_end"] = _require_number(flow["t_end"], f"{where}.flow.t_end")
    flow["monitor_every"] = _require_int(
        flow["monitor_every"], f"{where}.flow.monitor_every"
    )
    try:
        FlowParams(**flow)
    except (ValueError, TypeError) as err:
        _fail(f"{where}: bad flow parameters: {err}")
    entry["flow"] = flow

    if case != "from_file":
        try:
            _build_metric(entry)
        except ValueError as err:
            _fail(f"{where}: cannot build the {case} geometry: {err}")
    return entry


def parse_config(path: str) -> dict:
    """Read, validate and normalize a config file.

    Returns {out, threshold, abs_threshold, seed, cases: [entry, ...]}
    with every default filled in; raises ConfigError on the first
    violation, before any computation has started.
    """
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as err:
        _fail(f"cannot read config {path}: {err}")
    except json.JSONDecodeError as err:
        _fail(f"config {path} is not valid JSON: {err}")
    if not isinstance(raw, dict):
        _fail("config must be a JSON object")

    has_inline = "case" in raw
    has_list = "cases" in raw
    if has_inline == has_list:
        _fail("config must have exactly one of: a top-level case, "
              "or a cases list")

    allowed = _ROOT_ONLY_KEYS | (_ENTRY_KEYS if has_inline else set())
    unknown = set(raw) - allowed
    if unknown:
        _fail(f"config: unknown keys {sorted(unknown)}")
    if has_inline and "cases" in raw:
        _fail("config: cases list cannot accompany a top-level case")

    cfg = {
        "out": raw.get("out"),
        "threshold": _require_number(
            raw.get("threshold", _DEFAULT_THRESHOLD), "threshold"
        ),
        "abs_threshold": _require_number(
            raw.get("abs_threshold", _DEFAULT_ABS_THRESHOLD), "abs_threshold"
        ),
        "seed": _require_int(raw.get("seed", 0), "seed"),
    }
    if cfg["out"] is not None and not isinstance(cfg["out"], str):
        _fail("out must be a string path")
    if cfg["threshold"] <= 0.0 or cfg["abs_threshold"] <= 0.0:
        _fail("thresholds must be positive")

    if has_inline:
        entries = [_validate_entry(
            {k: v for k, v in raw.items() if k in _ENTRY_KEYS}, -1
        )]
    else:
        if not isinstance(raw["cases"], list) or not raw["cases"]:
            _fail("cases must be a non-empty list")
        entries = []
        for k, item in enumerate(raw["cases"]):
            if not isinstance(item, dict):
                _fail(f"cases[{k}] must be an object")
            entries.append(_validate_entry(item, k))
    labels = [e["label"] for e in entries]
    if len(set(labels)) != len(labels):
        _fail(f"case labels must be unique, got {labels}")
    cfg["cases"] = entries
    return cfg


def _build_metric(entry: dict) -> WarpedMetric:
    if entry["case"] == "from_file":
        return WarpedMetric.from_dict(entry["metric_data"])
    builder = CASE_BUILDERS[entry["case"]]
    return builder(n=entry["n"], N=entry["N"], **entry["params"])


def _p_slug(p: float) -> str:
    return f"{p:g}"


def _write_text(path: Path, text: str) -> None:
    path.write_text(text)


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_csv(path: Path, rows) -> None:
    _write_text(path, "".join(",".join(row) + "\n" for row in rows))


def _run_case(job: tuple) -> dict:
    """Execute one configured case inside its own directory.

    Returns the summary rows plus an error note when a stage failed;
    later stages still run, so a singular flow does not discard the rate
    reports already computed.
    """
    entry, out_root = job
    case_dir = Path(out_root) / entry["label"]
    case_dir.mkdir(parents=True, exist_ok=True)
    rows: list = []
    notes: list = []

    try:
        wm0 = _build_metric(entry)
    except (ValueError, RuntimeError) as err:
        note = f"geometry construction failed: {err}"
        _write_text(case_dir / "errors.txt", note + "\n")
        return {"label": entry["label"], "rows": rows, "note": note}
    _write_json(case_dir / "metric.json", wm0.to_dict())

    flow_params = FlowParams(**entry["flow"])
    family = IntegratedFamily(wm0, params=FlowParams(
        cfl=entry["flow"]["cfl"], scheme=entry["flow"]["scheme"],
    ))
    for p in entry["p_list"]:
        slug = _p_slug(p)
        try:
            sol = solve_subcritical(SubcriticalProblem(wm0, p))
            report = verify_rate_formula(family, p, dt=entry["dt"])
        except (ValueError, RuntimeError) as err:
            notes.append(f"p = {slug}: {err}")
            continue
        _write_json(case_dir / f"solution_p{slug}.json", {
            "p": float(sol.problem.p),
            "Y": float(sol.Y),
            "u": [float(v) for v in sol.u],
            "residuals": {
                "el": float(sol.el_residual),
                "neumann": float(sol.neumann_residual),
                "norm": float(sol.norm_residual),
            },
        })
        _write_csv(case_dir / f"history_p{slug}.csv", [
            ("iter", "el_residual", "norm_residual", "Y"),
            *((repr(int(it)), repr(el), repr(nr), repr(y))
              for it, el, nr, y in sol.history),
        ])
        _write_json(case_dir / f"report_p{slug}.json", {
            "p": float(report.p),
            "t_pivot": float(report.t_pivot),
            "rate_fd": float(report.rate_fd),
            "rhs_total": float(report.rhs_total),
            "rhs_terms": {k: float(v) for k, v in report.rhs_terms.items()},
            "rel_error": float(report.rel_error),
            "trusted": bool(report.trusted),
            "dt": float(report.dt),
        })
        rows.append({
            "case": entry["label"],
            "p": float(p),
            "lhs": float(report.rate_fd),
            "rhs": float(report.rhs_total),
            "rel_error": float(report.rel_error),
            "trusted": bool(report.trusted),
        })

    try:
        trajectory = evolve(FlowState(wm0, 0.0), flow_params)
    except SingularTimeError as err:
        notes.append(f"flow stopped early: {err}")
        trajectory = err.partial
    except (ValueError, RuntimeError) as err:
        notes.append(f"flow failed: {err}")
        trajectory = None
    if trajectory is not None:
        _write_csv(case_dir / "trajectory.csv", trajectory.csv_rows())
        _write_json(case_dir / "metric_final.json",
                    trajectory.final.metric.to_dict())

    note = "; ".join(notes) if notes else None
    if note:
        _write_text(case_dir / "errors.txt", note + "\n")
    return {"label": entry["label"], "rows": rows, "note": note}


def resolve_out(cfg: dict, flag_value: str | None) -> Path:
    if flag_value:
        return Path(flag_value)
    if cfg.get("out"):
        return Path(cfg["out"])
    env = os.environ.get("YAMFLOW_OUT")
    if env:
        return Path(env)
    return Path("yamflow_out")


def _row_passed(row: dict, threshold: float, abs_threshold: float) -> bool:
    # equality-case escape: when both rates vanish at the absolute
    # threshold the relative error is floor noise, not a failure
    if max(abs(row["lhs"]), abs(row["rhs"])) <= abs_threshold:
        return True
    return row["rel_error"] <= threshold


def run_config(cfg: dict, out_flag: str | None, jobs: int) -> int:
    out_root = resolve_out(cfg, out_flag)
    out_root.mkdir(parents=True, exist_ok=True)
    _write_json(out_root / "config.json", cfg)

    jobs_eff = max(1, min(jobs, len(cfg["cases"])))
    work = [(entry, str(out_root)) for entry in cfg["cases"]]
    if jobs_eff > 1:
        with ProcessPoolExecutor(max_workers=jobs_eff) as pool:
            results = list(pool.map(_run_case, work))
    else:
        results = [_run_case(job) for job in work]

    rows = [row for res in results for row in res["rows"]]
    threshold = cfg["threshold"]
    abs_threshold = cfg["abs_threshold"]

    _write_csv(out_root / "summary.csv", [
        ("case", "p", "lhs", "rhs", "rel_error", "trusted"),
        *(
            (row["case"], repr(row["p"]), repr(row["lhs"]), repr(row["rhs"]),
             repr(row["rel_error"]), "true" if row["trusted"] else "false")
            for row in rows
        ),
    ])

    lines = [
        "# Experiment summary",
        "",
        f"Trusted rows pass when rel_error <= {threshold!r} or both rates "
        f"are below {abs_threshold!r} in absolute value.",
        "",
        "| case | p | lhs | rhs | rel_error | trusted | passed |",
        "|------|---|-----|-----|-----------|---------|--------|",
    ]
    failed = False
    for row in rows:
        ok = _row_passed(row, threshold, abs_threshold)
        if row["trusted"] and not ok:
            failed = True
        status = "yes" if ok else "no"
        if not row["trusted"]:
            status = "(untrusted)"
        lines.append(
            f"| {row['case']} | {row['p']:g} | {row['lhs']!r} | "
            f"{row['rhs']!r} | {row['rel_error']!r} | "
            f"{'yes' if row['trusted'] else 'no'} | {status} |"
        )
    notes = [(res["label"], res["note"]) for res in results if res["note"]]
    if notes:
        lines += ["", "## Errors", ""]
        lines += [f"- {label}: {note}" for label, note in notes]
    _write_text(out_root / "summary.md", "\n".join(lines) + "\n")

    for res in results:
        if res["note"]:
            print(f"[{res['label']}] {res['note']}", file=sys.stderr)
    print(f"wrote {out_root / 'summary.md'}")
    return 1 if failed else 0


def _pairwise_orders(errors: list) -> list:
    orders: list = [""]
    for a, b in zip(errors, errors[1:]):
        if a > 0.0 and b > 0.0:
            orders.append(repr(math.log2(a / b)))
        else:
            orders.append("")
    return orders


def _sweep_levels(N: int, levels: int) -> list:
    if levels < 3:
        _fail(f"--levels must be at least 3, got {levels}")
    step = 2 ** (levels - 1)
    if N % step != 0 or N // step < _MIN_GRID:
        _fail(f"N = {N} cannot be halved {levels - 1} times while staying "
              f"at or above {_MIN_GRID} nodes")
    return [N // 2 ** k for k in reversed(range(levels))]


def run_sweep(cfg: dict, levels: int, out_flag: str | None) -> int:
    """Convergence study on the first configured case.

    Three sections: scalar curvature of the coordinate-patch kernel on an
    embedded cylinder (exact value known), the time integrator against
    the shrinking-cylinder profile on a spatially exact coarse grid, and
    the rate report's rel_error under grid refinement.  Each section
    reports errors at every level and the observed order between
    consecutive levels.
    """
    entry = cfg["cases"][0]
    grids = _sweep_levels(entry["N"], levels)
    out_root = resolve_out(cfg, out_flag)
    out_root.mkdir(parents=True, exist_ok=True)

    sections: list = []  # (quantity, parameter, values, errors)

    # patch curvature on an embedded unit cylinder: exact scalar is 2;
    # the kernel is n = 3 only, so this section ignores the config n
    errs = []
    for N in grids:
        wm = CASE_BUILDERS["cylinder"](n=3, N=N, radius=1.0, length=1.0)
        patch = embed_to_patch(wm, r_start=N - 8,
                               num_theta=N + 1, num_phi=N + 1)
        bundle = curvature_bundle(patch)
        errs.append(float(np.abs(bundle.scalar - 2.0)[bundle.trusted].max()))
    sections.append(("patch_scalar_curvature", "N",
                     [repr(N) for N in grids], errs))

    # integrator vs the exact shrinking cylinder: constant profiles make
    # the space discretization exact, so the time error is visible; the
    # coarse grid keeps the stability bound above the sampled dt range
    t_end = 0.1
    steps0 = 8
    exact = ShrinkingCylinder(n=entry["n"], radius=1.0, length=2.0, N=8)
    errs = []
    dts = []
    for k in range(levels):
        steps = steps0 * 2**k
        dt = t_end / steps
        dts.append(dt)
        wm = exact.metric_at(0.0)
        for j in range(steps):
            wm = step_once(wm, dt, scheme=entry["flow"]["scheme"],
                           t_blame=j * dt)
        errs.append(float(np.abs(wm.f - exact.metric_at(t_end).f).max()))
    sections.append(("flow_exact_profile", "dt",
                     [repr(d) for d in dts], errs))

    # rate report rel_error under grid refinement, per exponent
    rate_notes = []
    if entry["case"] == "from_file":
        rate_notes.append("rate_rel_error skipped: case from_file has a "
                          "fixed grid and cannot be refined")
    else:
        for p in entry["p_list"]:
            errs = []
            try:
                for N in grids:
                    refined = dict(entry, N=N)
                    family = IntegratedFamily(
                        _build_metric(refined),
                        params=FlowParams(cfl=entry["flow"]["cfl"],
                                          scheme=entry["flow"]["scheme"]),
                    )
                    report = verify_rate_formula(family, p, dt=entry["dt"])
                    errs.append(float(report.rel_error))
            except (ValueError, ArithmeticError) as err:
                rate_notes.append(
                    f"rate_rel_error_p{_p_slug(p)} skipped at N = "
                    f"{grids[len(errs)]}: {err}")
                continue
            sections.append((f"rate_rel_error_p{_p_slug(p)}", "N",
                             [repr(N) for N in grids], errs))

    csv_rows = [("quantity", "parameter", "value", "error", "order")]
    md = ["# Convergence sweep", ""]
    for quantity, parameter, values, errs in sections:
        orders = _pairwise_orders(errs)
        for value, err, order in zip(values, errs, orders):
            csv_rows.append((quantity, parameter, value, repr(err), order))
        md += [f"## {quantity}", "",
               f"| {parameter} | error | order |", "|---|---|---|"]
        md += [f"| {value} | {err!r} | {order} |"
               for value, err, order in zip(values, errs, orders)]
        md.append("")
    for note in rate_notes:
        md += [note, ""]
    _write_csv(out_root / "orders.csv", csv_rows)
    _write_text(out_root / "orders.md", "\n".join(md) + "\n")
    print(f"wrote {out_root / 'orders.md'}")
    return 0


def run_verify(case: str, p: float, dt: float) -> int:
    """One-off rate check on a named unit-volume geometry, n = 3, N = 128."""
    if case not in _NAMED_CASES:
        _fail(f"--case must be one of {sorted(_NAMED_CASES)}, got {case!r}")
    if not 1.0 < p <= critical_exponent(3):
        _fail(f"--p must lie in (1, {critical_exponent(3)}], got {p}")
    if dt <= 0.0:
        _fail(f"--dt must be positive, got {dt}")
    wm = CASE_BUILDERS[case](n=3, N=128, unit_volume=True)
    family = IntegratedFamily(wm)
    report = verify_rate_formula(family, p, dt=dt)
    print(json.dumps({
        "case": case,
        "p": float(report.p),
        "t_pivot": float(report.t_pivot),
        "rate_fd": float(report.rate_fd),
        "rhs_total": float(report.rhs_total),
        "rhs_terms": {k: float(v) for k, v in report.rhs_terms.items()},
        "rel_error": float(report.rel_error),
        "trusted": bool(report.trusted),
        "dt": float(report.dt),
    }, sort_keys=True, indent=2))
    row = {"lhs": report.rate_fd, "rhs": report.rhs_total,
           "rel_error": report.rel_error}
    ok = _row_passed(row, _DEFAULT_THRESHOLD, _DEFAULT_ABS_THRESHOLD)
    return 0 if (ok or not report.trusted) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="yamflow",
        description="Evolution-rate experiments on rotationally symmetric "
                    "metrics with minimal boundary.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the configured cases")
    p_run.add_argument("--config", required=True, help="JSON config path")
    p_run.add_argument("--out", help="output root (overrides config and env)")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="parallel case workers (default 1)")

    p_sweep = sub.add_parser("sweep", help="convergence orders study")
    p_sweep.add_argument("--config", required=True, help="JSON config path")
    p_sweep.add_argument("--levels", type=int, required=True,
                         help="number of refinement levels (at least 3)")
    p_sweep.add_argument("--out", help="output root (overrides config and env)")

    p_verify = sub.add_parser("verify", help="one-off rate check")
    p_verify.add_argument("--case", required=True,
                          help="cylinder | hemisphere | perturbed_cylinder")
    p_verify.add_argument("--p", type=float, required=True,
                          help="exponent in (1, 5] for n = 3")
    p_verify.add_argument("--dt", type=float, default=1e-4,
                          help="time step for the finite-difference rate")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            if args.jobs < 1:
                _fail(f"--jobs must be positive, got {args.jobs}")
            return run_config(parse_config(args.config), args.out, args.jobs)
        if args.command == "sweep":
            return run_sweep(parse_config(args.config), args.levels, args.out)
        return run_verify(args.case, args.p, args.dt)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"io error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
