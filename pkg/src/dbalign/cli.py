"""Command-line interface.

Exit codes: 0 success, 2 configuration/validation error, 3 infeasible
problem size, 4 detection failure (misdetection or single-component
distance series), 5 no useful remapping found.

The DBALIGN_OUT_DIR environment variable, when set, re-roots relative
output paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import deletions, estimation, matching, replicas
from .dbio import load_model_spec, read_matrix, write_matrix
from .experiment import ExperimentConfig, InfeasibleSizeError, emit, run_experiment
from .infotheory import capacity
from .model import sample_instance

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_DETECTION = 4
EXIT_NO_REMAPPING = 5


def _out_path(path):
    base = os.environ.get("DBALIGN_OUT_DIR")
    if path is None or base is None or os.path.isabs(path):
        return path
    return os.path.join(base, path)


def _write_text(path, text):
    if path is None:
        sys.stdout.write(text)
        return
    with open(_out_path(path), "w", encoding="utf-8") as fh:
        fh.write(text)


def _cmd_capacity(args) -> int:
    spec = load_model_spec(args.config)
    report = capacity(spec)
    _write_text(args.out, json.dumps(report.to_dict(), indent=2) + "\n")
    return EXIT_OK


def _cmd_gen(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    config = ExperimentConfig.from_dict(raw)
    out_dir = _out_path(args.out)
    os.makedirs(out_dir, exist_ok=True)
    pair, seeds = sample_instance(
        config.m, config.n, config.num_seeds, config.spec, config.master_seed
    )
    write_matrix(os.path.join(out_dir, "d1.dbm"), pair.d1)
    write_matrix(os.path.join(out_dir, "d2.dbm"), pair.d2)
    write_matrix(os.path.join(out_dir, "g1.dbm"), seeds.g1)
    write_matrix(os.path.join(out_dir, "g2.dbm"), seeds.g2)
    truth = {
        "sigma": pair.sigma.tolist(),
        "pattern": pair.pattern.s.tolist(),
        "master_seed": config.master_seed,
        "m": config.m,
        "n": config.n,
        "lambda": config.num_seeds,
    }
    with open(os.path.join(out_dir, "truth.json"), "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2)
        fh.write("\n")
    print(f"wrote d1/d2/g1/g2 and truth.json to {out_dir}")
    return EXIT_OK


def _cmd_detect_replicas(args) -> int:
    d2 = read_matrix(args.d2)
    h = replicas.running_hamming(d2)
    decisions = h <= d2.shape[0] * replicas.blischke_estimate(h, d2.shape[0]).tau
    lines = ["j,hamming,is_replica"]
    lines += [f"{j},{h[j]},{int(decisions[j])}" for j in range(h.size)]
    _write_text(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_detect_deletions(args) -> int:
    g1 = read_matrix(args.g1)
    g2 = read_matrix(args.g2)
    if args.dedup:
        starts, _ = replicas.column_runs(replicas.detect_replicas(g2))
        g2 = g2[:, starts]
    if args.dump_l is not None:
        phi = deletions.enumerate_remappings(
            args.alphabet_size or int(max(g1.max(), g2.max()))
        )[0]
        cross = deletions.cross_hamming(g1, g2, phi, args.threshold_constant)
        rows = [",".join(str(v) for v in row) for row in cross.l]
        _write_text(args.dump_l, "\n".join(rows) + "\n")
    result = deletions.detect_deletions(
        g1, g2, args.alphabet_size, args.threshold_constant
    )
    out = {
        "retained": result.retained.tolist(),
        "deleted": result.deleted.tolist(),
        "n": result.n,
    }
    _write_text(args.out, json.dumps(out, indent=2) + "\n")
    return EXIT_OK


def _cmd_estimate(args) -> int:
    g1 = read_matrix(args.g1)
    g2 = read_matrix(args.g2)
    alphabet_size = args.alphabet_size or int(max(g1.max(), g2.max()))
    if args.s_max is not None and args.s_max <= 1:
        is_rep = np.zeros(max(g2.shape[1] - 1, 0), dtype=bool)
    else:
        is_rep = replicas.detect_replicas(g2)
    starts, _ = replicas.column_runs(is_rep)
    g2_dedup = g2[:, starts]
    retention = deletions.detect_deletions(
        g1, g2_dedup, alphabet_size, args.threshold_constant
    )
    pattern = matching.pattern_from_detections(is_rep, retention, g1.shape[1])
    est = estimation.estimate_from_seeds(
        g1, g2_dedup, retention, pattern, alphabet_size, s_max=args.s_max
    )
    _write_text(args.out, json.dumps(est.to_dict(), indent=2) + "\n")
    return EXIT_OK


def _cmd_match(args) -> int:
    d1 = read_matrix(args.d1)
    d2 = read_matrix(args.d2)
    g1 = read_matrix(args.g1)
    g2 = read_matrix(args.g2)
    alphabet_size = args.alphabet_size or int(max(d1.max(), d2.max()))
    result = matching.deanonymize(
        d1,
        d2,
        g1,
        g2,
        alphabet_size=alphabet_size,
        s_max=args.s_max,
        epsilon=args.epsilon,
        threshold_constant=args.threshold_constant,
    )
    out = {
        "config": {
            "d1": args.d1,
            "d2": args.d2,
            "g1": args.g1,
            "g2": args.g2,
            "alphabet_size": alphabet_size,
            "s_max": args.s_max,
            "epsilon": args.epsilon,
            "threshold_constant": args.threshold_constant,
        },
        "stages": result.stage_flags(),
        "failed_stage": result.failed_stage,
        "failure": result.failure,
    }
    if result.match is not None:
        out["status_counts"] = result.match.status_counts()
        out["sigma_hat"] = result.match.sigma_hat().tolist()
    if args.truth is not None:
        with open(args.truth, "r", encoding="utf-8") as fh:
            truth = json.load(fh)
        out["master_seed"] = truth.get("master_seed")
        if result.match is not None:
            out["row_error_rate"] = result.match.row_error_rate(
                np.asarray(truth["sigma"])
            )
        else:
            out["row_error_rate"] = 1.0
    _write_text(args.out, json.dumps(out, indent=2) + "\n")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    # flags mirror config keys and win over the file
    overrides = {
        "m": args.m,
        "n": args.n,
        "lambda": getattr(args, "lambda"),
        "trials": args.trials,
        "master_seed": args.master_seed,
        "epsilon": args.epsilon,
        "threshold_constant": args.threshold_constant,
        "workers": args.workers,
        "sweep_axis": args.sweep_axis,
        "memory_cap_bytes": args.memory_cap_bytes,
    }
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if args.sweep_values is not None:
        raw["sweep_values"] = [int(v) for v in args.sweep_values.split(",") if v]
    config = ExperimentConfig.from_dict(raw)
    report = run_experiment(config)
    if args.out is None:
        emit(report, args.format, "/dev/stdout")
    else:
        emit(report, args.format, _out_path(args.out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbalign",
        description=(
            "Simulate and run distribution-agnostic row de-anonymization of "
            "correlated databases under column repetitions and noise."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="print the matching-capacity report")
    p.add_argument("--config", required=True, help="model spec JSON")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_capacity)

    p = sub.add_parser("gen", help="generate an instance and write it to disk")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("detect-replicas", help="adjacent-column replica decisions as CSV")
    p.add_argument("--d2", required=True, help="repeated database matrix file")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_detect_replicas)

    p = sub.add_parser("detect-deletions", help="seeded deletion detection")
    p.add_argument("--g1", required=True)
    p.add_argument("--g2", required=True)
    p.add_argument("--alphabet-size", type=int, default=None)
    p.add_argument("--threshold-constant", type=float, default=2.0)
    p.add_argument("--dedup", action="store_true", help="remove replica columns from g2 first")
    p.add_argument("--dump-l", default=None, help="write the identity-remapping distance matrix as CSV")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_detect_deletions)

    p = sub.add_parser("estimate", help="plug-in distribution estimate from seeds")
    p.add_argument("--g1", required=True)
    p.add_argument("--g2", required=True)
    p.add_argument("--alphabet-size", type=int, default=None)
    p.add_argument("--s-max", type=int, default=None)
    p.add_argument("--threshold-constant", type=float, default=2.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("match", help="full de-anonymization pipeline")
    p.add_argument("--d1", required=True)
    p.add_argument("--d2", required=True)
    p.add_argument("--g1", required=True)
    p.add_argument("--g2", required=True)
    p.add_argument("--alphabet-size", type=int, default=None)
    p.add_argument("--s-max", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--threshold-constant", type=float, default=2.0)
    p.add_argument("--truth", default=None, help="truth.json for error-rate scoring")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--lambda", type=int, default=None, dest="lambda")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--master-seed", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--threshold-constant", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--sweep-axis", choices=("m", "n"), default=None)
    p.add_argument("--sweep-values", default=None, help="comma-separated values")
    p.add_argument("--memory-cap-bytes", type=int, default=None)
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (deletions.MisdetectionError, replicas.SingleComponentError) as exc:
        print(f"detection failed: {exc}", file=sys.stderr)
        return EXIT_DETECTION
    except deletions.NoUsefulRemappingError as exc:
        print(f"detection failed: {exc}", file=sys.stderr)
        return EXIT_NO_REMAPPING
    except InfeasibleSizeError as exc:
        print(f"infeasible size: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
