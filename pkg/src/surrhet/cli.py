"""Command-line front end.

Subcommands: ``estimate`` (fit + bootstrap on a CSV), ``identify``
(per-row sufficiency decisions), ``simulate`` (benchmark study against
analytic truth), ``diagnose`` (control-surrogate model check). Every run
requires an explicit --seed and writes a config echo next to its outputs
so the run can be reproduced bit for bit; wall-clock timing goes to a
separate timing.json that is excluded from that guarantee.

Exit codes: 0 success, 1 runtime failure (error.json written when
possible), 2 configuration/usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from surrhet import __version__, artifacts
from surrhet.data import ColumnSchema, fraction_to_count, load_csv, split, validate
from surrhet.errors import SchemaError, SurrhetError
from surrhet.estimator import estimate_pte, fit_tlearner, zeta_diagnostic
from surrhet.inference import bootstrap_pte, identify, percentile_ci
from surrhet.learners import FAMILIES, ForestParams, GamParams, LearnerSpec
from surrhet.simulation import SETTING_IDS, SettingSpec, run_study

CONFIG_ERROR = 2
RUNTIME_ERROR = 1


def _add_io_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="input CSV file")
    p.add_argument("--schema", required=True, help="JSON column-mapping file")


def _add_common_options(p: argparse.ArgumentParser, test_size: bool = True) -> None:
    p.add_argument("--family", choices=FAMILIES, default="linear", help="base learner family")
    p.add_argument("--seed", type=int, required=True, help="master seed (mandatory)")
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--workers", type=int, default=1, help="max parallel workers (results identical)")
    if test_size:
        group = p.add_mutually_exclusive_group()
        group.add_argument("--test-size", type=int, default=None, help="test rows (absolute count)")
        group.add_argument("--test-fraction", type=float, default=None, help="test rows as a fraction")
    p.add_argument("--gam-basis-size", type=int, default=10)
    p.add_argument("--num-trees", type=int, default=2000)
    p.add_argument("--min-node-size", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surrhet", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"surrhet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="fit the T-learners and bootstrap the effect estimates")
    _add_io_options(p_est)
    _add_common_options(p_est)
    p_est.add_argument("--bootstrap", type=int, default=200, metavar="B", help="bootstrap replicates")
    p_est.add_argument("--alpha", type=float, default=0.05)
    p_est.add_argument("--delta-floor", type=float, default=None, help="min |delta| for a defined r_s")

    p_id = sub.add_parser("identify", help="per-row surrogate-sufficiency decisions")
    _add_io_options(p_id)
    _add_common_options(p_id)
    p_id.add_argument("--bootstrap", type=int, default=200, metavar="B")
    p_id.add_argument("--kappa", type=float, required=True, help="strength threshold")
    p_id.add_argument("--alpha", type=float, default=0.05)
    p_id.add_argument("--delta-floor", type=float, default=None)

    p_sim = sub.add_parser("simulate", help="benchmark study against analytic ground truth")
    p_sim.add_argument("--setting", type=int, required=True, choices=SETTING_IDS)
    p_sim.add_argument("--families", default="linear", help="comma-separated subset of linear,gam,forest")
    p_sim.add_argument("--iterations", type=int, default=200)
    p_sim.add_argument("--bootstrap", type=int, default=100, metavar="B")
    p_sim.add_argument("--n", type=int, default=2000)
    p_sim.add_argument("--test-size", type=int, default=200)
    p_sim.add_argument("--kappa", type=float, default=0.5)
    p_sim.add_argument("--alpha", type=float, default=0.05)
    p_sim.add_argument("--full-scale", action="store_true", help="1000 iterations with B=200")
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.add_argument("--num-trees", type=int, default=2000)
    p_sim.add_argument("--min-node-size", type=int, default=5)

    p_diag = sub.add_parser("diagnose", help="observed-vs-predicted control surrogate check")
    _add_io_options(p_diag)
    _add_common_options(p_diag)

    return parser


def _schema(path: str) -> ColumnSchema:
    return ColumnSchema.from_json(path)


def _learner_spec(args) -> LearnerSpec:
    return LearnerSpec(
        family=args.family,
        gam_params=GamParams(basis_size=args.gam_basis_size),
        forest_params=ForestParams(num_trees=args.num_trees, min_node_size=args.min_node_size),
    )


def _resolve_test_size(args, n: int) -> int:
    if getattr(args, "test_fraction", None) is not None:
        return fraction_to_count(args.test_fraction, n)
    if getattr(args, "test_size", None) is not None:
        return args.test_size
    return fraction_to_count(0.1, n)


def _echo_config(args, extra: dict | None = None, drop: tuple = ()) -> dict:
    """Flat config echo. ``drop`` removes execution-only keys (workers, out
    path) from report-embedded copies so reruns with different parallelism
    or target directories still produce byte-identical reports."""
    config = {
        k.replace("_", "-"): v for k, v in vars(args).items() if k != "command" and k not in drop
    }
    config["command"] = args.command
    config["package-version"] = __version__
    if extra:
        config.update(extra)
    return config


_EXECUTION_KEYS = ("workers", "out")


def _prepare_out(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _estimation_pipeline(args, kappa: float | None):
    """Shared by estimate/identify: load, split, fit, bootstrap."""
    schema = _schema(args.schema)
    data = load_csv(args.input, schema)
    summary = validate(data)
    test_size = _resolve_test_size(args, data.n)
    spec = _learner_spec(args)

    root = np.random.SeedSequence(args.seed)
    split_ss, fit_ss, boot_ss = root.spawn(3)
    parts = split(data, test_size, np.random.default_rng(split_ss))
    model = fit_tlearner(parts.train, spec, np.random.default_rng(fit_ss))
    est = estimate_pte(model, parts.test.x, delta_floor=args.delta_floor)
    dist = bootstrap_pte(
        parts.train,
        parts.test.x,
        spec,
        model.frozen,
        args.bootstrap,
        np.random.default_rng(boot_ss),
        delta_floor=est.delta_floor,
        workers=args.workers,
    )
    cis = percentile_ci(dist, args.alpha)
    ident = identify(dist, kappa, args.alpha) if kappa is not None else None
    return summary, parts, model, est, dist, cis, ident


def cmd_estimate(args) -> int:
    out = _prepare_out(args)
    started = time.perf_counter()
    summary, parts, model, est, dist, cis, _ = _estimation_pipeline(args, kappa=None)
    artifacts.write_json(os.path.join(out, "config.json"), _echo_config(args))
    artifacts.write_estimates_csv(os.path.join(out, "estimates.csv"), parts.test_indices, est)
    artifacts.write_ci_csv(os.path.join(out, "ci.csv"), parts.test_indices, cis)
    for name, matrix in (("delta", dist.delta), ("delta_s", dist.delta_s), ("r_s", dist.r_s)):
        artifacts.write_replicates_csv(
            os.path.join(out, f"bootstrap_{name}.csv"), matrix, dist.valid
        )
    results = {
        "n": parts.train.n + parts.test.n,
        "n_train": parts.train.n,
        "n_test": parts.test.n,
        "n_control": summary.n_control,
        "n_treated": summary.n_treated,
        "delta_floor": est.delta_floor,
        "invalid_rows": int((~est.valid).sum()),
        "bootstrap_redraws": dist.redraws,
        "frozen_tuning": model.frozen,
        "r_s_median": float(np.nanmedian(est.r_s)) if est.valid.any() else None,
    }
    warnings = list(summary.overlap_warnings)
    artifacts.write_report(
        os.path.join(out, "report.json"),
        _echo_config(args, drop=_EXECUTION_KEYS),
        results,
        warnings=warnings,
    )
    artifacts.write_timing(os.path.join(out, "timing.json"), time.perf_counter() - started)
    return 0


def cmd_identify(args) -> int:
    out = _prepare_out(args)
    started = time.perf_counter()
    summary, parts, model, est, dist, cis, ident = _estimation_pipeline(args, kappa=args.kappa)
    artifacts.write_json(os.path.join(out, "config.json"), _echo_config(args))
    artifacts.write_decisions_csv(
        os.path.join(out, "decisions.csv"), parts.test_indices, est, cis["r_s"], ident
    )
    results = {
        "kappa": args.kappa,
        "alpha": args.alpha,
        "n_test": parts.test.n,
        "n_strong": int(ident.strong.sum()),
        "n_undefined": int(np.count_nonzero(~np.isfinite(ident.p_raw))),
        "bootstrap_redraws": dist.redraws,
        "frozen_tuning": model.frozen,
    }
    artifacts.write_report(
        os.path.join(out, "report.json"),
        _echo_config(args, drop=_EXECUTION_KEYS),
        results,
        warnings=list(summary.overlap_warnings),
    )
    artifacts.write_timing(os.path.join(out, "timing.json"), time.perf_counter() - started)
    return 0


def cmd_simulate(args) -> int:
    out = _prepare_out(args)
    started = time.perf_counter()
    families = tuple(f.strip() for f in args.families.split(",") if f.strip())
    for f in families:
        if f not in FAMILIES:
            raise SchemaError(f"unknown family {f!r} in --families")
    iterations = 1000 if args.full_scale else args.iterations
    B = 200 if args.full_scale else args.bootstrap
    setting = SettingSpec(
        id=args.setting,
        n=args.n,
        test_size=args.test_size,
        iterations=iterations,
        B=B,
        kappa=args.kappa,
        alpha=args.alpha,
        seed=args.seed,
    )
    forest_params = ForestParams(num_trees=args.num_trees, min_node_size=args.min_node_size)
    report = run_study(
        setting,
        families=families,
        workers=args.workers,
        forest_params=forest_params,
        keep_records=True,
    )
    artifacts.write_json(os.path.join(out, "config.json"), _echo_config(args))
    payload = report.to_json_dict()
    for family in families:
        fr = report.families[family]
        tag = f"setting{setting.id}_{family}_seed{setting.seed}"
        artifacts.write_study_long_csv(os.path.join(out, f"study_{tag}.csv"), family, fr.records)
        artifacts.write_report(
            os.path.join(out, f"report_{tag}.json"),
            _echo_config(args, {"family": family}, drop=_EXECUTION_KEYS),
            {
                "setting": payload["setting"],
                "family": family,
                "estimation": payload["families"][family]["estimation"],
                "identification": payload["families"][family]["identification"],
                "deciles": payload["families"][family]["deciles"],
                "iterations_attempted": payload["families"][family]["iterations_attempted"],
                "iterations_completed": payload["families"][family]["iterations_completed"],
                "aborted": payload["families"][family]["aborted"],
            },
            warnings=payload["warnings"],
        )
    artifacts.write_timing(
        os.path.join(out, "timing.json"),
        time.perf_counter() - started,
        {"study_runtime_seconds": report.runtime_seconds},
    )
    return 0


def cmd_diagnose(args) -> int:
    out = _prepare_out(args)
    started = time.perf_counter()
    schema = _schema(args.schema)
    data = load_csv(args.input, schema)
    summary = validate(data)
    test_size = _resolve_test_size(args, data.n)
    spec = _learner_spec(args)
    root = np.random.SeedSequence(args.seed)
    split_ss, fit_ss = root.spawn(2)
    parts = split(data, test_size, np.random.default_rng(split_ss))
    model = fit_tlearner(parts.train, spec, np.random.default_rng(fit_ss))
    control = parts.train.subset(np.flatnonzero(parts.train.g == 0))
    diag = zeta_diagnostic(model, control)
    artifacts.write_json(os.path.join(out, "config.json"), _echo_config(args))
    artifacts.write_csv_rows(
        os.path.join(out, "zeta_deciles.csv"),
        ["decile", "n", "predicted_mean", "observed_mean"],
        [(r["decile"], r["n"], r["predicted_mean"], r["observed_mean"]) for r in diag.decile_table],
    )
    artifacts.write_report(
        os.path.join(out, "report.json"),
        _echo_config(args, drop=_EXECUTION_KEYS),
        {
            "ks_statistic": diag.ks_statistic,
            "n_control": diag.n,
            "n_train": parts.train.n,
            "n_test": parts.test.n,
            "seed": args.seed,
            "decile_table": list(diag.decile_table),
        },
        warnings=list(summary.overlap_warnings),
    )
    artifacts.write_timing(os.path.join(out, "timing.json"), time.perf_counter() - started)
    return 0


_COMMANDS = {
    "estimate": cmd_estimate,
    "identify": cmd_identify,
    "simulate": cmd_simulate,
    "diagnose": cmd_diagnose,
}


def _fail(args, exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)
    out = getattr(args, "out", None)
    if out:
        try:
            os.makedirs(out, exist_ok=True)
            artifacts.write_json(os.path.join(out, "error.json"), payload)
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (SchemaError, ValueError) as exc:
        return _fail(args, exc, CONFIG_ERROR)
    except SurrhetError as exc:
        return _fail(args, exc, RUNTIME_ERROR)
    except OSError as exc:
        return _fail(args, exc, RUNTIME_ERROR)


if __name__ == "__main__":
    sys.exit(main())
