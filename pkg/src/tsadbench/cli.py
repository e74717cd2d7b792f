"""Command-line interface: run benchmarks, inject anomalies, score series,
and regroup result tables."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import autoencoder, harness, ingest, mdi, merlin, metrics, rrcf, threshold


def cmd_run(args):
    cfg = harness.RunConfig.from_file(args.config)
    records = harness.run(cfg)
    n_failed = sum(r.failed for r in records)
    print(f"wrote {len(records)} records to {cfg.output_dir} "
          f"({n_failed} failed)")


def cmd_inject(args):
    base = ingest.generate_base(args.base, args.series_length, args.period,
                                args.noise_std, args.seed)
    spec = ingest.InjectionSpec(
        anomaly_type=args.type, location=args.location, length=args.length,
        magnitude=args.magnitude, seed=args.seed, period=args.period)
    series = ingest.inject(base, spec)
    np.savetxt(args.out, series.values, fmt="%.10f")
    print(f"{args.out}: {len(series)} points, segment "
          f"[{series.anomaly_start}, {series.anomaly_end}] ({args.type})")


def cmd_score(args):
    series = ingest.load_series(args.series)
    unlabeled = harness.strip_labels(series)
    if args.detector == "merlin":
        scores = merlin.merlin_scan(unlabeled, args.l_min, args.l_max).scores.scores
    elif args.detector == "mdi":
        scores = mdi.mdi_scan(unlabeled, args.l_min, args.l_max).scores
    elif args.detector == "rrcf":
        scores = rrcf.score_series(unlabeled, rrcf.ForestConfig(seed=args.seed)).scores
    elif args.detector == "ae":
        cfg = autoencoder.AeConfig(seed=args.seed)
        model, _ = autoencoder.train(unlabeled.values, cfg)
        scores = autoencoder.score(model, unlabeled, cfg).scores
    else:
        raise SystemExit(f"unknown detector {args.detector!r}")
    np.savetxt(args.out, scores, fmt="%.10g")
    print(f"wrote {len(scores)} scores to {args.out}")


def cmd_report(args):
    records = metrics.read_records(args.records)
    rows = metrics.aggregate(records, args.group_by)
    cols = list(rows[0].keys())
    print("\t".join(cols))
    for row in rows:
        print("\t".join("" if row[c] is None else str(row[c]) for c in cols))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsadbench",
        description="Time-series anomaly detection benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a benchmark from a YAML config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("inject", help="generate a synthetic anomalous series")
    p.add_argument("--type", required=True,
                   choices=sorted(ingest._CORPUS_PARAMS))
    p.add_argument("--base", default="sine",
                   choices=ingest.BASE_KINDS)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.add_argument("--series-length", type=int, default=5000)
    p.add_argument("--period", type=int, default=100)
    p.add_argument("--noise-std", type=float, default=0.03)
    p.add_argument("--location", type=int, default=2500)
    p.add_argument("--length", type=int, default=100)
    p.add_argument("--magnitude", type=float, default=2.0)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("score", help="score one UCR-format series file")
    p.add_argument("--detector", required=True, choices=harness.DETECTOR_IDS)
    p.add_argument("--series", required=True)
    p.add_argument("--out", default="scores.txt")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--l-min", type=int, default=75)
    p.add_argument("--l-max", type=int, default=125)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="aggregate a record table")
    p.add_argument("records")
    p.add_argument("--group-by", default="detector",
                   choices=("detector", "anomaly_type", "method_class"))
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    sys.exit(main())
