"""Command-line interface: gen, gt, stats, build, search, bench, scale, verify.

CSV outputs start with a ``#``-prefixed JSON line echoing the effective
configuration. All randomized subcommands take --seed and reproduce their
non-timing outputs bit-identically.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import bench as bench_mod
from .bench import (SyntheticSpec, VerifyLimits, generate_synthetic,
                    records_to_csv, run_benchmark, run_scaling_study,
                    scale_records_to_csv, verify_suite)
from .errors import FormatError, UsageError
from .index import build_mag, load_index, materialize, save_index
from .io import (compute_ground_truth, load_ground_truth, read_fvecs,
                 save_ground_truth, write_fvecs)
from .metrics import MetricKind
from .stats import compute_stats, tuning_hint


def _metric(name: str) -> MetricKind:
    return MetricKind.INNER_PRODUCT if name == "ip" else MetricKind.EUCLIDEAN


def _echo_config(args: argparse.Namespace, out) -> None:
    cfg = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    print("# " + json.dumps(cfg, sort_keys=True, default=str), file=out)


def _open_out(path: str | None):
    return open(path, "w") if path else sys.stdout


def cmd_gen(args) -> int:
    spec = SyntheticSpec(kind=args.kind, n=args.n, dim=args.dim, seed=args.seed,
                         n_clusters=args.clusters, center_scale=args.center_scale,
                         spread=args.spread, sigma_log=args.sigma_log)
    write_fvecs(generate_synthetic(spec), args.out)
    print(f"wrote {args.n} x {args.dim} {args.kind} vectors to {args.out}")
    return 0


def cmd_gt(args) -> int:
    data = read_fvecs(args.data)
    queries = read_fvecs(args.queries)
    gt = compute_ground_truth(data, queries, args.k, _metric(args.metric))
    save_ground_truth(gt, args.out)
    print(f"wrote top-{args.k} {args.metric} ground truth for "
          f"{queries.n} queries to {args.out}")
    return 0


def cmd_stats(args) -> int:
    data = read_fvecs(args.data)
    report = compute_stats(data, n_clusters=args.clusters, seed=args.seed)
    out = _open_out(args.out)
    try:
        if args.format == "json":
            print(json.dumps({
                "cv": report.cv, "dbi_euclidean": report.dbi_euclidean,
                "dbi_cosine": report.dbi_cosine,
                "self_dominator_fraction": report.self_dominator_fraction,
                "n_clusters": report.n_clusters,
                "hint": tuning_hint(report)}, sort_keys=True), file=out)
        else:
            _echo_config(args, out)
            print("cv,dbi_euclidean,dbi_cosine,self_dominator_fraction,n_clusters",
                  file=out)
            print(f"{report.cv:.6f},{report.dbi_euclidean:.6f},"
                  f"{report.dbi_cosine:.6f},{report.self_dominator_fraction:.6f},"
                  f"{report.n_clusters}", file=out)
            print(f"# hint: {tuning_hint(report)}", file=out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_build(args) -> int:
    data = read_fvecs(args.data)
    index = build_mag(data, K=args.K, K1=args.K1, K2=args.K2, ls=args.ls,
                      knn_mode=args.knn, seed=args.seed, workers=args.workers,
                      nndescent_iters=args.nn_iters, passes=args.passes)
    save_index(index, args.out)
    print(f"built index over {data.n} vectors (K={args.K}, K1={args.K1}, "
          f"K2={args.K2}) -> {args.out}")
    return 0


def cmd_search(args) -> int:
    index = load_index(args.index)
    data = read_fvecs(args.data)
    queries = read_fvecs(args.queries)
    metric = _metric(args.metric)
    if args.m > 0 and metric is not MetricKind.INNER_PRODUCT:
        raise UsageError("--m applies to the ip metric; use --m 0 with l2")
    graph = materialize(index, R=args.R, alpha=args.alpha)
    results = bench_mod.run_queries(graph, data, queries, ls=args.ls, k=args.k,
                                    m=args.m, seed=args.seed, metric=metric,
                                    threads=args.threads)
    out = _open_out(args.out)
    try:
        _echo_config(args, out)
        print("query,ids,dist_comps,hops", file=out)
        for qid, res in enumerate(results):
            ids = " ".join(str(int(v)) for v in res.ids)
            print(f"{qid},{ids},{res.stats.dist_comps},{res.stats.hops}", file=out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_bench(args) -> int:
    index = load_index(args.index)
    data = read_fvecs(args.data)
    queries = read_fvecs(args.queries)
    gt = load_ground_truth(args.gt)
    ls_list = [int(v) for v in args.ls.split(",")]
    records = run_benchmark(index, data, queries, gt, ls_list=ls_list, R=args.R,
                            alpha=args.alpha, m=args.m, k=args.k, seed=args.seed,
                            threads=args.threads, reps=args.reps)
    cfg = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    text = records_to_csv(records, cfg)
    out = _open_out(args.out)
    try:
        out.write(text)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_scale(args) -> int:
    sizes = [int(v) for v in args.sizes.split(",")]
    records = run_scaling_study(sizes, dim=args.dim, K=args.K, K1=args.K1,
                                K2=args.K2, build_ls=args.build_ls, R=args.R,
                                alpha=args.alpha, m=args.m, k=args.k,
                                n_queries=args.queries, target=args.target,
                                seed=args.seed, workers=args.workers,
                                passes=args.passes)
    cfg = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    text = scale_records_to_csv(records, cfg)
    out = _open_out(args.out)
    try:
        out.write(text)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_verify(args) -> int:
    dataset = read_fvecs(args.data) if args.data else None
    spec = None
    if dataset is None:
        spec = SyntheticSpec(kind=args.kind, n=args.n, dim=args.dim,
                             seed=args.seed)
    index = load_index(args.index) if args.index else None
    limits = VerifyLimits(max_n_exact=args.max_n_exact)
    report = verify_suite(dataset=dataset, spec=spec, index=index, limits=limits)
    print(report.render())
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magsearch",
        description="Graph-based maximum inner product search toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic fvecs dataset")
    p.add_argument("--kind", choices=["gaussian", "blobs", "heavytail"],
                   default="gaussian")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--center-scale", dest="center_scale", type=float, default=10.0)
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--sigma-log", dest="sigma_log", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("gt", help="compute exact ground truth (ivecs)")
    p.add_argument("--data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--metric", choices=["ip", "l2"], default="ip")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gt)

    p = sub.add_parser("stats", help="print data-topology indicators")
    p.add_argument("--data", required=True)
    p.add_argument("--clusters", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("build", help="build an index file")
    p.add_argument("--data", required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--K1", type=int, required=True)
    p.add_argument("--K2", type=int, required=True)
    p.add_argument("--ls", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--knn", choices=["exact", "nndescent"], default="exact")
    p.add_argument("--nn-iters", dest="nn_iters", type=int, default=10)
    p.add_argument("--passes", type=int, default=3)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("search", help="run queries against an index")
    p.add_argument("--index", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--ls", type=int, required=True)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--metric", choices=["ip", "l2"], default="ip")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("bench", help="recall/QPS sweep over pool sizes")
    p.add_argument("--index", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--ls", required=True, help="comma-separated pool sizes")
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("scale", help="distance computations at matched recall vs n")
    p.add_argument("--sizes", default="1000,4000,16000,64000")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--K", type=int, default=32)
    p.add_argument("--K1", type=int, default=16)
    p.add_argument("--K2", type=int, default=16)
    p.add_argument("--build-ls", dest="build_ls", type=int, default=64)
    p.add_argument("--R", type=int, default=32)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--target", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--passes", type=int, default=3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("verify", help="run the invariant-verification suite")
    p.add_argument("--data", help="fvecs dataset (default: synthetic)")
    p.add_argument("--kind", choices=["gaussian", "blobs", "heavytail"],
                   default="gaussian")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--index", help="optional index file to validate")
    p.add_argument("--max-n-exact", dest="max_n_exact", type=int, default=2000)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
