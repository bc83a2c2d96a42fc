"""Command-line interface.

Subcommands: triangle, sample, distmat, persist, featurize, train, predict,
experiment, report.  Exit codes: 0 success, 2 bad config or input, 3
numerical failure, 4 resource limit.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import DomainError, NumericalError, ResourceError
from . import geometry, landscape, learn, persistence, pipeline


def _add_triangle(sub):
    p = sub.add_parser(
        "triangle",
        help="birth/death/persistence of a triangle, or the equilateral closed form",
    )
    p.add_argument("--curvature", "-k", type=float, required=True)
    p.add_argument("--sides", type=float, nargs=3, metavar=("A", "B", "C"),
                   help="three side lengths")
    p.add_argument("--equilateral", type=float, metavar="SIDE",
                   help="evaluate the closed-form equilateral persistence")
    p.set_defaults(func=_cmd_triangle)


def _cmd_triangle(args):
    if (args.sides is None) == (args.equilateral is None):
        raise DomainError("give exactly one of --sides or --equilateral")
    if args.equilateral is not None:
        a = args.equilateral
        p = geometry.equilateral_persistence(a, args.curvature)
        birth = a / 2.0
        out = {
            "curvature": args.curvature,
            "side": a,
            "birth": birth,
            "death": p * birth,
            "persistence": p,
            "hasCycle": True,
        }
    else:
        sides = geometry.TriangleSides(*args.sides, k=args.curvature)
        r = geometry.triangle_birth_death(sides)
        out = {
            "curvature": args.curvature,
            "sides": [sides.a, sides.b, sides.c],
            "birth": r.birth,
            "death": r.death,
            "persistence": r.persistence,
            "hasCycle": r.has_cycle,
        }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _add_sample(sub):
    p = sub.add_parser("sample", help="sample points uniformly from the unit disk")
    p.add_argument("--curvature", "-k", type=float, required=True)
    p.add_argument("--count", "-m", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)


def _cmd_sample(args):
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    pts = geometry.sample_disk(args.curvature, args.count, rng)
    geometry.write_points_csv(args.out, pts)
    print(f"wrote {len(pts)} points to {args.out}")


def _add_distmat(sub):
    p = sub.add_parser("distmat", help="pairwise geodesic distances of sampled points")
    p.add_argument("--points", required=True, help="CSV written by 'sample'")
    p.add_argument("--curvature", "-k", type=float, required=True)
    p.add_argument("--ordinal", action="store_true", help="replace distances by ranks")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_distmat)


def _cmd_distmat(args):
    pts = geometry.read_points_csv(args.points)
    d = pipeline.distance_matrix(pts, args.curvature)
    if args.ordinal:
        d = pipeline.ordinal_transform(d)
    persistence.write_distance_matrix_csv(args.out, d)
    print(f"wrote {d.m}x{d.m} distance matrix to {args.out}")


def _add_persist(sub):
    p = sub.add_parser("persist", help="persistent homology of a distance matrix")
    p.add_argument("--distmat", required=True)
    p.add_argument("--degree", type=int, choices=(0, 1), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_persist)


def _cmd_persist(args):
    d = persistence.read_distance_matrix_csv(args.distmat)
    if args.degree == 0:
        dv = persistence.h0_death_vector(d)
        diag = persistence.PersistenceDiagram(
            0, np.stack([np.zeros(dv.deaths.shape[0]), dv.deaths], axis=1)
        )
    else:
        diag = persistence.h1_diagram(d)
    persistence.write_diagram_csv(args.out, diag)
    print(f"wrote {len(diag)} degree-{args.degree} pairs to {args.out}")


def _add_featurize(sub):
    p = sub.add_parser(
        "featurize",
        help="average feature vector of one curvature under a config",
    )
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--curvature", "-k", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_featurize)


def _cmd_featurize(args):
    cfg = _load_config(args.config, [], seed=args.seed)
    feat = pipeline.average_features(
        args.curvature, cfg, pipeline.feature_stream(cfg.seed, pipeline.TRAIN_DOMAIN, 0)
    )
    landscape.write_features_csv(args.out, [feat], [args.curvature])
    print(f"wrote 1 {feat.kind} feature of length {feat.values.shape[0]} to {args.out}")


def _add_train(sub):
    p = sub.add_parser("train", help="fit an SVR or quantile model on labeled features")
    p.add_argument("--features", required=True, help="labeled feature CSV")
    p.add_argument("--method", choices=("svr", "quantile"), default="svr")
    p.add_argument("--cost", type=float, default=100.0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)


def _cmd_train(args):
    feats, labels = landscape.read_features_csv(args.features)
    if any(y is None for y in labels):
        raise DomainError("training features must carry curvature labels")
    train = learn.TrainingSet(tuple(feats), tuple(labels))
    if args.method == "svr":
        model = learn.svr_train(train, args.cost, args.epsilon)
    else:
        model = learn.quantile_train(train, args.tau, args.cost)
    learn.write_model_json(args.out, model)
    print(f"wrote {args.method} model to {args.out}")


def _add_predict(sub):
    p = sub.add_parser("predict", help="apply a model to feature vectors")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", help="CSV of predictions (default: stdout)")
    p.set_defaults(func=_cmd_predict)


def _cmd_predict(args):
    model = learn.read_model_json(args.model)
    feats, labels = landscape.read_features_csv(args.features)
    rows = []
    for feat, label in zip(feats, labels):
        est = learn.svr_predict(model, feat)
        rows.append(("" if label is None else repr(float(label)), repr(est)))
    lines = ["trueK,estimate"] + [",".join(r) for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {len(rows)} predictions to {args.out}")
    else:
        sys.stdout.write(text)


def _add_experiment(sub):
    p = sub.add_parser(
        "experiment",
        help="full estimation experiment; any config field is overridable "
        "with --<field>=<value> (dotted for nested, e.g. --svr.C=10)",
    )
    p.add_argument("--config", help="config JSON; defaults are desk scale")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--plots", action="store_true", help="also emit plot CSVs")
    p.add_argument("--svg", action="store_true", help="emit minimal SVG scatters")
    p.set_defaults(func=_cmd_experiment)


def _cmd_experiment(args, overrides=()):
    cfg = _load_config(args.config, overrides, seed=args.seed)
    report = pipeline.run_experiment(cfg, args.out)
    if args.plots or args.svg:
        pipeline.emit_plot_data(report, args.out, svg=args.svg)
    summary = {"rmse": report.rmse, "quantileCrossFraction": report.quantileCrossFraction}
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _add_report(sub):
    p = sub.add_parser("report", help="summarize a report.json and emit plot data")
    p.add_argument("--report", required=True, help="path to report.json")
    p.add_argument("--plots", metavar="DIR", help="emit plot CSVs into DIR")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=_cmd_report)


def _cmd_report(args):
    report = pipeline.load_report(args.report)
    print(f"mode: {report.configEcho.mode}  feature kind: {report.configEcho.featureKind}")
    print(f"test points: {len(report.perTest)}")
    for method, value in sorted(report.rmse.items()):
        print(f"rmse[{method}] = {value:.4f}")
    if report.pcaVarianceShare:
        shares = ", ".join(f"{s:.3f}" for s in report.pcaVarianceShare[:5])
        print(f"pca variance share (first 5): {shares}")
    print(f"quantile crossing fraction: {report.quantileCrossFraction:.3f}")
    if args.plots:
        paths = pipeline.emit_plot_data(report, args.plots, svg=args.svg)
        print(f"wrote {len(paths)} plot files to {args.plots}")


def _load_config(path, overrides, seed=None):
    if path:
        with open(path, "r", encoding="ascii") as fh:
            cfg = pipeline.ExperimentConfig.from_dict(json.load(fh))
    else:
        cfg = pipeline.ExperimentConfig()
    for key, value in overrides:
        cfg = cfg.with_override(key, value)
    if seed is not None:
        cfg = cfg.with_override("seed", str(seed))
    return cfg


def _split_overrides(argv):
    """Pull config overrides (--key=value with a known-config key shape) out of argv."""
    kept = []
    overrides = []
    passthrough = {
        "--config", "--seed", "--out", "--plots", "--svg", "--curvature", "--sides",
        "--equilateral", "--count", "--points", "--ordinal", "--distmat", "--degree",
        "--features", "--method", "--cost", "--epsilon", "--tau", "--model", "--report",
    }
    for arg in argv:
        if arg.startswith("--") and "=" in arg:
            key, _, value = arg[2:].partition("=")
            if "--" + key not in passthrough:
                overrides.append((key, value))
                continue
        kept.append(arg)
    return kept, overrides


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = argparse.ArgumentParser(
        prog="curvscape",
        description="Estimate disk curvature from persistent homology of sampled points.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (
        _add_triangle,
        _add_sample,
        _add_distmat,
        _add_persist,
        _add_featurize,
        _add_train,
        _add_predict,
        _add_experiment,
        _add_report,
    ):
        add(sub)
    kept, overrides = _split_overrides(argv)
    try:
        args = parser.parse_args(kept)
        if overrides and args.command != "experiment":
            raise DomainError(
                f"config overrides {[k for k, _ in overrides]} are only valid "
                "for the 'experiment' subcommand"
            )
        if args.command == "experiment":
            _cmd_experiment(args, overrides)
        else:
            args.func(args)
    except (DomainError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
