"""Command-line front end: gen-data, train, score, select, sweep, f1-sweep, timing.

Every command prints a JSON run report to stdout (command echo, resolved
configuration, per-stage timings, output paths) and plain progress lines
to stderr. Exit codes: 0 success, 1 runtime failure, 2 usage error.
Randomized commands refuse to run without an explicit --seed so published
numbers stay replayable.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import __version__
from .datasets import (
    Dataset,
    SampleSchedule,
    SweepGrid,
    gen_banana,
    gen_star,
    gen_three_clusters,
    load_csv,
    write_csv,
    write_meta,
)
from .evaluation import f1_sweep
from .sampling import SamplingTrainConfig, sample_train
from .selection import (
    ConvergenceParams,
    RandomizedSweepConfig,
    cv_select,
    dfn_select,
    full_peak,
    randomized_sweep,
    sampling_peak,
    write_objective_csv,
    write_sweep_csv,
    write_sweep_values_csv,
    write_trace_csv,
)
from .smoothing import write_band_csv
from .svdd import SvddConfig, load_model, save_model, score_points, solve_dual, train_curve

_GENERATORS = {"star": gen_star, "clusters3": gen_three_clusters, "banana": gen_banana}


class UsageError(Exception):
    """Bad flags or flag combinations; maps to exit code 2."""


def _log(msg: str) -> None:
    print(f"[svddkit] {msg}", file=sys.stderr)


def _load_config_file(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as err:
        raise UsageError(f"bad TOML in {path}: {err}") from None


_REQUIRED = object()


def _resolve(args: argparse.Namespace, spec: dict) -> dict:
    """Layer resolution: explicit flag > --config TOML entry > built-in default."""
    file_cfg = _load_config_file(args.config) if getattr(args, "config", None) else {}
    out = {}
    for key, default in spec.items():
        value = getattr(args, key, None)
        if value is None:
            value = file_cfg.get(key, None)
        if value is None:
            value = default
        if value is _REQUIRED:
            raise UsageError(f"missing required option --{key.replace('_', '-')}")
        out[key] = value
    return out


def _grid(cfg: dict) -> SweepGrid:
    return SweepGrid(s_min=cfg["s_min"], s_max=cfg["s_max"], delta_s=cfg["delta_s"])


def _schedule(cfg: dict, seed: int) -> SampleSchedule:
    return SampleSchedule(
        n_min=cfg["n_min"], n_max=cfg["n_max"], delta_n=cfg["delta_n"], seed=seed
    )


def _load_dataset(cfg: dict) -> Dataset:
    data = load_csv(cfg["data"], label_column=cfg.get("label_column"),
                    target_value=str(cfg.get("target_value", "1")))
    if cfg.get("label_column") and cfg.get("target_rows_only"):
        keep = data.labels
        return Dataset(points=data.points[keep], names=data.names)
    return data


def _report(args, cfg: dict, stages: dict, outputs: list, extra: dict) -> dict:
    clean = {k: v for k, v in cfg.items() if v is not None}
    return {
        "command": args.command,
        "argv": list(args.raw_argv),
        "config": clean,
        "stage_seconds": {k: round(v, 6) for k, v in stages.items()},
        "outputs": outputs,
        "version": __version__,
        **extra,
    }


# --- command handlers ---------------------------------------------------------

def _cmd_gen_data(args) -> dict:
    cfg = _resolve(args, {
        "shape": _REQUIRED, "n": _REQUIRED, "seed": _REQUIRED, "out": _REQUIRED,
    })
    if cfg["shape"] not in _GENERATORS:
        raise UsageError(f"unknown shape {cfg['shape']!r}; choose from {sorted(_GENERATORS)}")
    t0 = time.perf_counter()
    data = _GENERATORS[cfg["shape"]](int(cfg["n"]), int(cfg["seed"]))
    write_csv(data, cfg["out"])
    write_meta(cfg["out"], cfg["shape"], int(cfg["n"]), int(cfg["seed"]))
    _log(f"wrote {data.n} x {data.m} points to {cfg['out']}")
    return _report(args, cfg, {"generate": time.perf_counter() - t0},
                   [cfg["out"], f"{cfg['out']}.meta.json"], {"n": data.n, "m": data.m})


def _cmd_train(args) -> dict:
    cfg = _resolve(args, {
        "data": _REQUIRED, "s": _REQUIRED, "f": _REQUIRED, "out": _REQUIRED,
        "kkt_tol": 1e-6, "max_passes": None, "label_column": None,
        "target_value": "1", "target_rows_only": True,
    })
    t0 = time.perf_counter()
    data = _load_dataset(cfg)
    t1 = time.perf_counter()
    model = solve_dual(data, SvddConfig(
        s=cfg["s"], f=cfg["f"], kkt_tol=cfg["kkt_tol"], max_passes=cfg["max_passes"]))
    t2 = time.perf_counter()
    save_model(model, cfg["out"])
    _log(f"trained on {data.n} points: nsv={model.nsv} r_squared={model.r_squared:.6g}")
    return _report(
        args, cfg, {"load": t1 - t0, "train": t2 - t1}, [cfg["out"]],
        {"oof": model.oof, "nsv": model.nsv, "r_squared": model.r_squared},
    )


def _cmd_score(args) -> dict:
    cfg = _resolve(args, {
        "model": _REQUIRED, "data": _REQUIRED, "out": _REQUIRED, "label_column": None,
    })
    t0 = time.perf_counter()
    model = load_model(cfg["model"])
    data = load_csv(cfg["data"], label_column=cfg.get("label_column"))
    t1 = time.perf_counter()
    d2, outlier = score_points(model, data.points)
    t2 = time.perf_counter()
    with open(cfg["out"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "distance_sq", "is_outlier"])
        for i, (dist, flag) in enumerate(zip(d2, outlier)):
            writer.writerow([i, repr(float(dist)), int(flag)])
    frac = float(np.mean(outlier))
    _log(f"scored {len(d2)} points: {int(outlier.sum())} outliers ({frac:.4f})")
    return _report(
        args, cfg, {"load": t1 - t0, "score": t2 - t1}, [cfg["out"]],
        {"n_scored": len(d2), "outliers": int(outlier.sum()), "outlier_fraction": frac},
    )


_SMOOTHER_SPEC = {"knots": 100, "degree": 3, "penalty_order": 2, "lam": "auto"}
_SCHEDULE_SPEC = {"n_min": _REQUIRED, "n_max": _REQUIRED, "delta_n": _REQUIRED}


def _cmd_select(args) -> dict:
    cfg = _resolve(args, {
        "data": _REQUIRED, "method": _REQUIRED, "out_prefix": _REQUIRED,
        "s_min": _REQUIRED, "s_max": _REQUIRED, "delta_s": _REQUIRED,
        "f": 0.001, "label_column": None, "target_value": "1", "target_rows_only": True,
        "n_min": None, "n_max": None, "delta_n": None, "seed": None,
        "eps_s": 0.05, "u": 3, "kkt_tol": 1e-6, "threads": 1,
        "sample_max_iters": 200, "sample_stall_iters": 5, "sample_r2_rel_tol": 0.01,
        **_SMOOTHER_SPEC,
    })
    method = cfg["method"]
    if method not in ("full-peak", "sampling-peak", "cv", "dfn"):
        raise UsageError(f"unknown method {method!r}")
    if isinstance(cfg["lam"], str) and cfg["lam"] != "auto":
        try:
            cfg["lam"] = float(cfg["lam"])
        except ValueError:
            raise UsageError(f"--lam must be 'auto' or a number, got {cfg['lam']!r}") from None
    grid = _grid(cfg)
    t0 = time.perf_counter()
    data = _load_dataset(cfg)
    t1 = time.perf_counter()
    prefix = cfg["out_prefix"]
    outputs: list = []
    extra: dict = {"method": method}

    if method == "full-peak":
        result = full_peak(
            data, grid, cfg["f"], knots=cfg["knots"], degree=cfg["degree"],
            penalty_order=cfg["penalty_order"], lam=cfg["lam"],
            kkt_tol=cfg["kkt_tol"], threads=cfg["threads"],
        )
        _write_train_curve_csv(f"{prefix}_oof.csv", result.curve)
        write_band_csv(f"{prefix}_diff1.csv", result.diff1, result.fit1)
        write_band_csv(f"{prefix}_diff2.csv", result.diff2, result.fit2)
        outputs += [f"{prefix}_oof.csv", f"{prefix}_diff1.csv", f"{prefix}_diff2.csv"]
        extra.update(s_opt=result.s_opt, s_opt_first_diff=result.s_opt_first_diff)
        _log(f"s_opt={result.s_opt} (band), first-difference variant={result.s_opt_first_diff}")
    elif method == "sampling-peak":
        if cfg["seed"] is None:
            raise UsageError("--seed is required for sampling-peak (randomized)")
        for key in ("n_min", "n_max", "delta_n"):
            if cfg[key] is None:
                raise UsageError(f"--{key.replace('_', '-')} is required for sampling-peak")
        trace = sampling_peak(
            data, _schedule(cfg, int(cfg["seed"])), grid, cfg["f"],
            ConvergenceParams(eps_s=cfg["eps_s"], u=cfg["u"]),
            knots=cfg["knots"], degree=cfg["degree"],
            penalty_order=cfg["penalty_order"], lam=cfg["lam"],
            sample_max_iters=cfg["sample_max_iters"],
            sample_stall_iters=cfg["sample_stall_iters"],
            sample_r2_rel_tol=cfg["sample_r2_rel_tol"],
            kkt_tol=cfg["kkt_tol"], threads=cfg["threads"],
        )
        write_trace_csv(f"{prefix}_trace.csv", trace)
        outputs.append(f"{prefix}_trace.csv")
        extra.update(
            s_opt=trace.final_s, converged=trace.converged, converged_at=trace.converged_at
        )
        _log(f"s_opt={trace.final_s:g} converged={trace.converged}")
    else:
        select = cv_select if method == "cv" else dfn_select
        result = select(data, grid)
        write_objective_csv(f"{prefix}_objective.csv", result.curve)
        outputs.append(f"{prefix}_objective.csv")
        extra.update(s_opt=result.s_opt)
        _log(f"s_opt={result.s_opt:g}")
    return _report(args, cfg, {"load": t1 - t0, "select": time.perf_counter() - t1},
                   outputs, extra)


def _cmd_sweep(args) -> dict:
    cfg = _resolve(args, {
        "data": _REQUIRED, "method": _REQUIRED, "out_prefix": _REQUIRED,
        "repeats": _REQUIRED, "seed": _REQUIRED,
        "s_min": _REQUIRED, "s_max": _REQUIRED, "delta_s": _REQUIRED,
        "label_column": None, "target_value": "1", "target_rows_only": True,
        "without_replacement": False, **_SCHEDULE_SPEC,
    })
    if cfg["method"] not in ("cv", "dfn"):
        raise UsageError(f"sweep method must be cv or dfn, got {cfg['method']!r}")
    t0 = time.perf_counter()
    data = _load_dataset(cfg)
    t1 = time.perf_counter()
    result = randomized_sweep(data, RandomizedSweepConfig(
        repeats=int(cfg["repeats"]),
        schedule=_schedule(cfg, int(cfg["seed"])),
        method=cfg["method"],
        s_grid=_grid(cfg),
        seed=int(cfg["seed"]),
        with_replacement=not cfg["without_replacement"],
    ))
    prefix = cfg["out_prefix"]
    write_sweep_csv(f"{prefix}_stats.csv", result)
    write_sweep_values_csv(f"{prefix}_values.csv", result)
    last = result.stats[-1]
    _log(f"swept {len(result.stats)} sizes; mean s_opt at n={last.sample_size}: {last.mean:g}")
    return _report(
        args, cfg, {"load": t1 - t0, "sweep": time.perf_counter() - t1},
        [f"{prefix}_stats.csv", f"{prefix}_values.csv"],
        {"method": cfg["method"], "final_mean_s_opt": last.mean,
         "final_var_s_opt": last.variance},
    )


def _cmd_f1_sweep(args) -> dict:
    cfg = _resolve(args, {
        "train": _REQUIRED, "score": _REQUIRED, "out": _REQUIRED,
        "label_column": _REQUIRED, "target_value": "1",
        "s_min": _REQUIRED, "s_max": _REQUIRED, "delta_s": _REQUIRED,
        "f": 0.001, "kkt_tol": 1e-6, "threads": 1,
    })
    t0 = time.perf_counter()
    train_data = load_csv(cfg["train"])
    score_data = load_csv(cfg["score"], label_column=cfg["label_column"],
                          target_value=str(cfg["target_value"]))
    t1 = time.perf_counter()
    result = f1_sweep(train_data, score_data, _grid(cfg), cfg["f"],
                      kkt_tol=cfg["kkt_tol"], threads=cfg["threads"])
    with open(cfg["out"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["s", "f1", "precision", "recall"])
        for s, v, p, r in zip(result.curve.xs, result.curve.ys,
                              result.precision, result.recall):
            writer.writerow([repr(float(s)), repr(float(v)), repr(float(p)), repr(float(r))])
    _log(f"best F1 {result.best_f1:.4f} at s={result.best_s:g}")
    return _report(
        args, cfg, {"load": t1 - t0, "sweep": time.perf_counter() - t1}, [cfg["out"]],
        {"best_s": result.best_s, "best_f1": result.best_f1},
    )


def _cmd_timing(args) -> dict:
    cfg = _resolve(args, {
        "data": _REQUIRED, "out": _REQUIRED, "seed": _REQUIRED, "f": 0.001,
        "s_min": _REQUIRED, "s_max": _REQUIRED, "delta_s": _REQUIRED,
        "label_column": None, "target_value": "1", "target_rows_only": True,
        "kkt_tol": 1e-6, "threads": 1,
        "sample_max_iters": 200, "sample_stall_iters": 5, "sample_r2_rel_tol": 0.01,
        **_SCHEDULE_SPEC,
    })
    t0 = time.perf_counter()
    data = _load_dataset(cfg)
    grid = _grid(cfg)
    schedule = _schedule(cfg, int(cfg["seed"]))
    s_values = grid.values()
    rows = []
    for a, n_i in enumerate(schedule.sizes()):
        t_start = time.perf_counter()
        for b, s in enumerate(s_values):
            seed_ab = int(np.random.SeedSequence(
                [int(cfg["seed"]) & 0xFFFFFFFFFFFFFFFF, a, b]).generate_state(1)[0])
            sample_train(data, float(s), cfg["f"], SamplingTrainConfig(
                sample_size=n_i, max_iters=cfg["sample_max_iters"],
                stall_iters=cfg["sample_stall_iters"],
                r2_rel_tol=cfg["sample_r2_rel_tol"], seed=seed_ab,
            ), kkt_tol=cfg["kkt_tol"])
        rows.append(("sampling", n_i, time.perf_counter() - t_start))
        _log(f"sampling at n_i={n_i}: {rows[-1][2]:.3f}s over {len(s_values)} bandwidths")
    t_full = time.perf_counter()
    train_curve(data, grid, cfg["f"], kkt_tol=cfg["kkt_tol"], threads=cfg["threads"])
    rows.append(("full", data.n, time.perf_counter() - t_full))
    _log(f"full training pass: {rows[-1][2]:.3f}s")
    with open(cfg["out"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "n_i", "seconds"])
        for mode, n_i, seconds in rows:
            writer.writerow([mode, n_i, repr(seconds)])
    return _report(
        args, cfg, {"timing": time.perf_counter() - t0}, [cfg["out"]],
        {"full_seconds": rows[-1][2],
         "sampling_seconds": {str(r[1]): r[2] for r in rows[:-1]}},
    )


def _write_train_curve_csv(path, curve) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["s", "oof", "nsv", "seconds"])
        for s, oof, nsv, sec in zip(curve.s_values, curve.oof, curve.nsv, curve.seconds):
            writer.writerow([repr(float(s)), repr(float(oof)), int(nsv), repr(float(sec))])


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svddkit",
        description="One-class boundary training, scoring, and bandwidth selection.",
    )
    parser.add_argument("--version", action="version", version=f"svddkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML file supplying defaults for any option")
        p.add_argument("--report", help="also write the JSON run report to this path")

    p = sub.add_parser("gen-data", help="generate a reference 2-D dataset")
    common(p)
    p.add_argument("--shape", choices=sorted(_GENERATORS))
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(handler=_cmd_gen_data)

    p = sub.add_parser("train", help="train one model and save it as JSON")
    common(p)
    p.add_argument("--data")
    p.add_argument("--s", type=float)
    p.add_argument("--f", type=float)
    p.add_argument("--out")
    p.add_argument("--kkt-tol", dest="kkt_tol", type=float)
    p.add_argument("--max-passes", dest="max_passes", type=int)
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--target-value", dest="target_value")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("score", help="score points against a saved model")
    common(p)
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--label-column", dest="label_column")
    p.set_defaults(handler=_cmd_score)

    p = sub.add_parser("select", help="pick a bandwidth by one of four methods")
    common(p)
    p.add_argument("--data")
    p.add_argument("--method", choices=["full-peak", "sampling-peak", "cv", "dfn"])
    p.add_argument("--out-prefix", dest="out_prefix")
    p.add_argument("--s-min", dest="s_min", type=float)
    p.add_argument("--s-max", dest="s_max", type=float)
    p.add_argument("--delta-s", dest="delta_s", type=float)
    p.add_argument("--f", type=float)
    p.add_argument("--n-min", dest="n_min", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--delta-n", dest="delta_n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--eps-s", dest="eps_s", type=float)
    p.add_argument("--u", type=int)
    p.add_argument("--knots", type=int)
    p.add_argument("--degree", type=int)
    p.add_argument("--penalty-order", dest="penalty_order", type=int)
    p.add_argument("--lam", dest="lam")
    p.add_argument("--kkt-tol", dest="kkt_tol", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--target-value", dest="target_value")
    p.set_defaults(handler=_cmd_select)

    p = sub.add_parser("sweep", help="distribution of cv/dfn answers over subsamples")
    common(p)
    p.add_argument("--data")
    p.add_argument("--method", choices=["cv", "dfn"])
    p.add_argument("--out-prefix", dest="out_prefix")
    p.add_argument("--repeats", type=int, help="draws per sample size")
    p.add_argument("--n-min", dest="n_min", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--delta-n", dest="delta_n", type=int)
    p.add_argument("--s-min", dest="s_min", type=float)
    p.add_argument("--s-max", dest="s_max", type=float)
    p.add_argument("--delta-s", dest="delta_s", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--without-replacement", dest="without_replacement",
                   action="store_const", const=True)
    p.add_argument("--label-column", dest="label_column")
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("f1-sweep", help="F1 vs bandwidth on a labeled scoring set")
    common(p)
    p.add_argument("--train")
    p.add_argument("--score")
    p.add_argument("--out")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--target-value", dest="target_value")
    p.add_argument("--s-min", dest="s_min", type=float)
    p.add_argument("--s-max", dest="s_max", type=float)
    p.add_argument("--delta-s", dest="delta_s", type=float)
    p.add_argument("--f", type=float)
    p.add_argument("--kkt-tol", dest="kkt_tol", type=float)
    p.add_argument("--threads", type=int)
    p.set_defaults(handler=_cmd_f1_sweep)

    p = sub.add_parser("timing", help="sampling vs full wall-clock across sizes")
    common(p)
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--n-min", dest="n_min", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--delta-n", dest="delta_n", type=int)
    p.add_argument("--s-min", dest="s_min", type=float)
    p.add_argument("--s-max", dest="s_max", type=float)
    p.add_argument("--delta-s", dest="delta_s", type=float)
    p.add_argument("--f", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--kkt-tol", dest="kkt_tol", type=float)
    p.add_argument("--threads", type=int)
    p.set_defaults(handler=_cmd_timing)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    raw = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(raw)
    except SystemExit as exit_:  # argparse already printed the message
        return int(exit_.code or 0)
    args.raw_argv = raw
    try:
        report = args.handler(args)
    except UsageError as err:
        print(f"error: usage: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # runtime failure: one machine-parsable line
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    text = json.dumps(report, indent=2)
    print(text)
    if getattr(args, "report", None):
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
