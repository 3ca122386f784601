"""``lrst`` command line: ``test``, ``simulate`` and ``bench`` subcommands.

Exit codes: 0 success, 2 invalid input, 3 numerically degenerate data.
Every flag can also be set through an ``LRST_<FLAG>`` environment variable
(e.g. ``LRST_MC_DRAWS=200000``); explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

from . import simulator
from .dataset import DatasetError, load_csv, load_schema, read_config_file, schema_of, write_csv
from .inference import DEFAULT_MC_DRAWS, DegenerateVariance, bonferroni_univariate, multi_arm_lrst
from .estimators import WEIGHT_CONVENTIONS, PAIRWISE

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE = 0, 2, 3


class InputError(Exception):
    pass


def _env(name: str, default=None, cast=str):
    raw = os.environ.get("LRST_" + name.upper().replace("-", "_"))
    if raw is None or raw == "":
        return default
    try:
        return cast(raw)
    except ValueError:
        raise InputError(f"environment variable LRST_{name.upper()}={raw!r} is invalid") from None


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _clean(obj):
    """JSON-safe copy: NaN -> null."""
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=False) + "\n"


def _dump_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    fields: list[str] = []
    for r in rows:
        for k in r:
            if k not in fields:
                fields.append(k)
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None or (isinstance(v, float) and math.isnan(v)) else v) for k, v in r.items()})
    return buf.getvalue()


def _emit(text: str, output) -> None:
    if output and output != "-":
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _check_common(args) -> None:
    if not 0.0 < args.alpha < 1.0:
        raise InputError(f"--alpha must lie in (0, 1), got {args.alpha}")
    if args.mc_draws < 1000:
        raise InputError(f"--mc-draws must be at least 1000, got {args.mc_draws}")


# ---------------------------------------------------------------------------
# test
# ---------------------------------------------------------------------------


def _pretty_test(report: dict) -> str:
    lines = [
        f"multi-arm LRST  (N={report['N']}, T={report['T']}, doses: {', '.join(report['dose_arms'])})",
        "",
        f"{'dose':<16}{'z':>10}{'theta_bar':>12}{'univariate p':>15}",
    ]
    for arm, z in zip(report["dose_arms"], report["components"]):
        lines.append(
            f"{arm:<16}{z:>10.4f}{report['theta_bar'][arm]:>12.4f}{report['comparator']['p_values'][arm]:>15.4g}"
        )
    lines += [
        "",
        f"statistic (z scale)        {report['statistic']['z_scale']:.4f}",
        f"statistic (per-visit / T)  {report['statistic']['per_visit_scale']:.4f}",
        f"p-value                    {report['p_value']:.4g}  [{report['p_value_method']}]",
    ]
    if report["mc_std_error"] is not None:
        lines.append(f"MC standard error          {report['mc_std_error']:.2g} ({report['mc_draws']} draws)")
    lines += [
        f"selected dose              {report['selected_dose']}",
        f"decision at alpha={report['alpha']:g}     {report['decision']}",
        f"Bonferroni comparator      {'reject' if report['comparator']['rejected'] else 'fail to reject'}"
        f" (threshold {report['comparator']['threshold']:.4g})",
    ]
    return "\n".join(lines) + "\n"


def cmd_test(args) -> int:
    _check_common(args)
    if not args.input or not args.schema:
        raise InputError("test needs --input and --schema")
    schema = load_schema(args.schema)
    ds = load_csv(args.input, schema)
    res = multi_arm_lrst(ds, mc_draws=args.mc_draws, seed=args.seed, weights=args.weights, method=args.method)
    bonf = bonferroni_univariate(ds, args.alpha, weights=args.weights)
    report = res.to_dict()
    report["alpha"] = args.alpha
    report["decision"] = "reject" if res.reject(args.alpha) else "fail to reject"
    report["comparator"] = bonf.to_dict()
    _log(f"lrst test: p={res.p_value:.4g} ({res.p_value_method.value}); {report['decision']} at alpha={args.alpha:g}")
    if args.format == "json":
        text = _dump_json(report)
    elif args.format == "csv":
        rows = []
        for a, arm in enumerate(res.dose_arms):
            rows.append({
                "dose": arm,
                "component": float(res.components[a]),
                "theta_bar": report["theta_bar"][arm],
                "univariate_p": bonf.p_values[arm],
                "selected": arm == res.selected_dose,
                "statistic": res.statistic,
                "statistic_per_visit": res.statistic_per_visit,
                "p_value": res.p_value,
                "p_value_method": res.p_value_method.value,
                "decision": report["decision"],
                "bonferroni_rejected": bonf.rejected,
            })
        text = _dump_csv(rows)
    else:
        text = _pretty_test(report)
    _emit(text, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _build_scenario(args):
    data = dict(read_config_file(args.scenario)) if args.scenario else {}
    study = args.study or data.pop("study", "type1")
    data.pop("study", None)
    settings = {
        "reps": args.reps if args.reps is not None else data.get("reps", 1000),
        "alpha": args.alpha if "alpha" in args.explicit else data.get("alpha", args.alpha),
        "mc_draws": args.mc_draws if "mc_draws" in args.explicit else data.get("mc_draws", simulator.STUDY_MC_DRAWS),
        "case": args.case if args.case is not None else data.get("case"),
        "grid": data.get("grid"),
    }
    for key in ("reps", "alpha", "mc_draws", "case", "grid"):
        data.pop(key, None)
    if args.n_control is not None:
        data["n_control"] = args.n_control
    if args.arms is not None:
        data.pop("doses", None)
        data["arms"] = args.arms
    if args.doses is not None:
        data.pop("arms", None)
        data["doses"] = args.doses
    if args.multipliers:
        data["multipliers"] = _parse_floats(args.multipliers)
    if not args.scenario:
        # flag-only runs default to the three-arm design
        data.setdefault("n_control", 200)
        if "arms" not in data and "doses" not in data:
            data["doses"] = 2
    if "seed" in args.explicit or "seed" not in data:
        data["seed"] = args.seed
    if args.grid:
        settings["grid"] = [_parse_floats(p) for p in args.grid.split(";") if p.strip()]
    sc = simulator.scenario_from_mapping(data)
    return study, sc, settings


def cmd_simulate(args) -> int:
    study, sc, settings = _build_scenario(args)
    alpha, reps, draws = float(settings["alpha"]), int(settings["reps"]), int(settings["mc_draws"])
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    if draws < 1000:
        raise InputError(f"mc_draws must be at least 1000, got {draws}")
    _log(f"lrst simulate: {study}, n={sc.n} (N={sc.N}, nominal {sc.nominal_N}), reps={reps}, seed={sc.seed}")

    if args.export_trial:
        ds = simulator.gen_trial(sc, 0)
        write_csv(ds, args.export_trial)
        schema_path = Path(args.export_trial).with_suffix(".schema.json")
        schema_path.write_text(json.dumps(schema_of(ds).to_mapping(), indent=2) + "\n", encoding="utf-8")
        _log(f"wrote replication 0 to {args.export_trial} and {schema_path}")
        return EXIT_OK

    def progress(done, total):
        if args.progress and (done % max(1, total // 10) == 0 or done == total):
            _log(f"  {done}/{total}")

    workers = max(1, int(args.threads))
    if study == "type1":
        reports = [simulator.type1_study(sc, reps, alpha, draws, workers, progress)]
    elif study == "power":
        if settings["grid"]:
            grid = [tuple(float(v) for v in p) for p in settings["grid"]]
        elif settings["case"] is not None:
            grid = simulator.case_grid(int(settings["case"]), sc.A)
        else:
            grid = [sc.multipliers]
        label = f"case{settings['case']}" if settings["case"] is not None and not settings["grid"] else "power"
        reports = simulator.power_study(sc, grid, reps, alpha, draws, workers, label, progress)
    else:
        raise InputError(f"unknown study {study!r}; expected type1 or power")

    rows = [r.row() for r in reports]
    if args.timing:
        for row, r in zip(rows, reports):
            row["wall_time"] = r.wall_time
    if args.format == "json":
        payload = {"study": study, "scenario": sc.to_mapping(), "reports": [r.to_dict() for r in reports]}
        if args.timing:
            payload["metadata"] = {"wall_time": [r.wall_time for r in reports]}
        text = _dump_json(payload)
    elif args.format == "csv":
        text = _dump_csv(rows)
    else:
        text = "".join(
            f"{r.label:<8} mult=({row['multipliers']}) N={r.N:<5} rate={r.rejection_rate:.3f} "
            f"[{row['ci_low']:.3f}, {row['ci_high']:.3f}] comparator={r.comparator_rate:.3f} "
            + " ".join(f"{arm}={p:.2f}" for arm, p in zip(r.dose_arms, r.selection_proportions))
            + "\n"
            for r, row in zip(reports, rows)
        )
    _emit(text, args.output)
    if args.plot_csv:
        long_rows = []
        for i, r in enumerate(reports):
            for method, rate, se in (("multi_arm", r.rejection_rate, r.mc_se), ("bonferroni", r.comparator_rate, r.comparator_se)):
                long_rows.append({
                    "point": i,
                    "multipliers": " ".join(f"{m:g}" for m in r.multipliers),
                    "multiplier_last": r.multipliers[-1],
                    "method": method,
                    "power": rate,
                    "se": se,
                })
        Path(args.plot_csv).write_text(_dump_csv(long_rows), encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def _parse_grid(text: str) -> list[tuple[int, int]]:
    """``"200:3,500:7"`` -> ``[(200, 2), (500, 6)]`` (second number is total arms)."""
    cells = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            n_x, arms = part.split(":")
            cells.append((int(n_x), int(arms) - 1))
        except ValueError:
            raise InputError(f"bad grid cell {part!r}; expected n_control:arms") from None
    if not cells:
        raise InputError("empty bench grid")
    return cells


def cmd_bench(args) -> int:
    if args.mc_draws < 1000:
        raise InputError(f"--mc-draws must be at least 1000, got {args.mc_draws}")
    grid = _parse_grid(args.grid) if args.grid else simulator.TABLE3_GRID
    rows = simulator.runtime_bench(grid, repeats=args.repeats, mc_draws=args.mc_draws, seed=args.seed)
    out = [r.row() for r in rows]
    if args.format == "json":
        text = _dump_json(out)
    elif args.format == "csv":
        text = _dump_csv(out)
    else:
        text = "".join(
            f"n_x={r.n_control:<4} arms={r.A + 1} N={r.N:<5} median={r.median:.3f}s "
            f"(min {r.min:.3f}, max {r.max:.3f}, sd {r.std:.3f}) [{r.backend}]\n"
            for r in rows
        )
    _emit(text, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lrst", description="Multi-arm longitudinal rank-sum test.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt_default):
        sp.add_argument("--alpha", type=float, default=None)
        sp.add_argument("--mc-draws", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None, help="worker cap for simulation studies")
        sp.add_argument("--output", default=None, help="write the report here instead of stdout (- for stdout)")
        sp.add_argument("--format", choices=("json", "csv", "pretty"), default=None)
        sp.set_defaults(_fmt_default=fmt_default)

    t = sub.add_parser("test", help="run the test on a long-format CSV")
    t.add_argument("--input", default=None)
    t.add_argument("--schema", default=None)
    t.add_argument("--weights", choices=WEIGHT_CONVENTIONS, default=PAIRWISE)
    t.add_argument("--method", choices=("auto", "mc"), default="auto")
    common(t, "json")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="type-I error or power study")
    s.add_argument("--scenario", default=None, help="TOML/JSON scenario file")
    s.add_argument("--study", choices=("type1", "power"), default=None)
    s.add_argument("--reps", type=int, default=None)
    s.add_argument("--n-control", type=int, default=None)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--arms", type=int, default=None, help="total arm count including control")
    g.add_argument("--doses", type=int, default=None, help="dose-arm count")
    s.add_argument("--multipliers", default=None, help="effect multipliers per dose, e.g. '0 1.5'")
    s.add_argument("--case", type=int, default=None, help="standard case grid (1-3)")
    s.add_argument("--grid", default=None, help="multiplier vectors separated by ';'")
    s.add_argument("--plot-csv", default=None, help="also write long-format power rows here")
    s.add_argument("--export-trial", default=None, help="write replication 0 as CSV (+ .schema.json) and exit")
    s.add_argument("--timing", action="store_true", help="include wall times in the report")
    s.add_argument("--progress", action="store_true", help="progress lines on stderr")
    common(s, "csv")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="runtime of one test per (n_control, arms) cell")
    b.add_argument("--grid", default=None, help="cells 'n_control:arms' separated by commas")
    b.add_argument("--repeats", type=int, default=5)
    common(b, "csv")
    b.set_defaults(func=cmd_bench)
    return p


def _resolve(args) -> None:
    args.explicit = {n for n in ("alpha", "mc_draws", "seed") if getattr(args, n) is not None or _env(n) is not None}
    if args.alpha is None:
        args.alpha = _env("alpha", 0.05, float)
    if args.mc_draws is None:
        args.mc_draws = _env("mc_draws", DEFAULT_MC_DRAWS, int)
    if args.seed is None:
        args.seed = _env("seed", 0, int)
    if args.threads is None:
        args.threads = _env("threads", 1, int)
    if args.output is None:
        args.output = _env("output")
    if args.format is None:
        args.format = _env("format", args._fmt_default)
        if args.format not in ("json", "csv", "pretty"):
            raise InputError(f"LRST_FORMAT must be json, csv or pretty, got {args.format!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _resolve(args)
        return args.func(args)
    except DegenerateVariance as exc:
        _log(f"error: DegenerateVariance: {exc}")
        return EXIT_DEGENERATE
    except DatasetError as exc:
        _log(f"error: {exc.code}: {exc}")
        return EXIT_INPUT
    except (InputError, simulator.ScenarioError) as exc:
        _log(f"error: {type(exc).__name__}: {exc}")
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        _log(f"error: {type(exc).__name__}: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
