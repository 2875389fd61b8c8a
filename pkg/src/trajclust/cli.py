"""Command-line pipeline: generate, matrix, project, cluster, cocluster,
evaluate, report.

Stages exchange files (dataset CSV, matrix JSON, similarity CSV + sidecar,
partition/model JSON) so the projected-graph route and the co-clustering
route share the generate/matrix front end. All randomness flows from the
--seed flags; identical invocations produce byte-identical artifacts. Every
JSON output records the invocation under a "provenance" key.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 internal
bookkeeping error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__, analysis, bigraph, cocluster, community, generator, network
from .errors import (
    EXIT_DATA,
    EXIT_INTERNAL,
    EXIT_OK,
    EXIT_USAGE,
    AuditError,
    TrajclustError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _provenance(command: str, args: argparse.Namespace, seed=None) -> dict:
    options = {
        key: value
        for key, value in sorted(vars(args).items())
        if key != "func" and value is not None
    }
    return {
        "tool": "trajclust",
        "version": __version__,
        "command": command,
        "options": {key: _plain(value) for key, value in options.items()},
        "seed": seed,
    }


def _plain(value):
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="trajclust", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"trajclust {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("generate", help="generate a labeled synthetic dataset", parser_class=_Parser)
    p.add_argument("--network", required=True, help="road network text file")
    p.add_argument("--classes", type=int, required=True, help="number of classes")
    p.add_argument("--min-size", type=int, default=12, help="minimum class size")
    p.add_argument("--max-size", type=int, default=20, help="maximum class size")
    p.add_argument("--rows", type=int, default=10, help="zone grid rows")
    p.add_argument("--cols", type=int, default=10, help="zone grid columns")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--max-attempts", type=int, default=100, help="resampling budget")
    p.add_argument("-o", "--output", required=True, help="dataset CSV to write")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("matrix", help="build the traversal matrix from a dataset", parser_class=_Parser)
    p.add_argument("-i", "--input", required=True, help="dataset CSV")
    p.add_argument("--network", help="optional network file for path validation")
    p.add_argument("-o", "--output", required=True, help="matrix JSON to write")
    p.set_defaults(func=_cmd_matrix)

    p = sub.add_parser("project", help="project the matrix onto one node kind", parser_class=_Parser)
    p.add_argument("-i", "--input", required=True, help="matrix JSON")
    p.add_argument("--kind", choices=("trajectory", "segment"), required=True)
    p.add_argument("--network", help="network file (required for --kind trajectory)")
    p.add_argument("-o", "--output", required=True, help="similarity CSV to write (+ JSON sidecar)")
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("cluster", help="modularity clustering of a similarity graph", parser_class=_Parser)
    p.add_argument("-i", "--input", required=True, help="similarity CSV (sidecar JSON alongside)")
    p.add_argument("--target-k", type=int, help="cut the hierarchy at this cluster count")
    p.add_argument("--best-q", action="store_true", help="cut at the best recorded modularity (default)")
    p.add_argument("--refine", dest="refine", action="store_true", default=True, help="single-node refinement passes (default)")
    p.add_argument("--no-refine", dest="refine", action="store_false")
    p.add_argument("--dendrogram", help="optional dendrogram JSON to write")
    p.add_argument("-o", "--output", required=True, help="partition JSON to write")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("cocluster", help="MAP co-clustering of the traversal matrix", parser_class=_Parser)
    p.add_argument("-i", "--input", required=True, help="dataset CSV or matrix JSON")
    p.add_argument("--restarts", type=int, default=0, help="extra randomized starts")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for restarts")
    p.add_argument("-o", "--output", required=True, help="model JSON to write")
    p.set_defaults(func=_cmd_cocluster)

    p = sub.add_parser("evaluate", help="compare a clustering against dataset labels", parser_class=_Parser)
    p.add_argument("--pred", required=True, help="partition JSON or co-cluster model JSON")
    p.add_argument("--truth", required=True, help="labeled dataset CSV")
    p.add_argument("-o", "--output", required=True, help="evaluation JSON to write")
    p.add_argument("--plots", help="directory for confusion-matrix PNG")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="crossed-matrix / frequency / MI report for a model", parser_class=_Parser)
    p.add_argument("--model", required=True, help="co-cluster model JSON")
    p.add_argument("--matrix", required=True, help="matrix JSON or dataset CSV")
    p.add_argument("--bits", action="store_true", help="report MI in bits instead of nats")
    p.add_argument("--csv-dir", help="directory for CSV exports of the matrices")
    p.add_argument("--plots", help="directory for grayscale PNGs")
    p.add_argument("-o", "--output", required=True, help="report JSON to write")
    p.set_defaults(func=_cmd_report)
    return parser


def _cmd_generate(args) -> int:
    net = network.load_network(args.network)
    cfg = generator.GeneratorConfig(
        classes=args.classes,
        min_size=args.min_size,
        max_size=args.max_size,
        seed=args.seed,
        rows=args.rows,
        cols=args.cols,
        max_attempts=args.max_attempts,
    )
    ds = generator.generate(net, cfg)
    generator.save_dataset(ds, args.output)
    sizes = ds.class_sizes()
    print(
        f"generated {len(ds)} trajectories in {len(sizes)} classes "
        f"(sizes {', '.join(str(sizes[k]) for k in sorted(sizes, key=int))}) -> {args.output}"
    )
    return EXIT_OK


def _cmd_matrix(args) -> int:
    net = network.load_network(args.network) if args.network else None
    ds = generator.load_dataset(args.input, net)
    matrix = bigraph.build_traversal_matrix(ds)
    bigraph.save_matrix(matrix, args.output, provenance=_provenance("matrix", args))
    print(
        f"traversal matrix: {matrix.n_trajectories} trajectories x "
        f"{matrix.n_segments} segments, {matrix.total} traversals -> {args.output}"
    )
    return EXIT_OK


def _load_matrix_any(path):
    text = str(path)
    if text.endswith(".csv"):
        return bigraph.build_traversal_matrix(generator.load_dataset(path))
    return bigraph.load_matrix(path)


def _cmd_project(args) -> int:
    matrix = _load_matrix_any(args.input)
    if args.kind == "trajectory":
        if not args.network:
            raise _UsageError("--kind trajectory requires --network for segment lengths")
        graph = bigraph.project_trajectories(matrix, network.load_network(args.network))
    else:
        graph = bigraph.project_segments(matrix)
    bigraph.save_similarity(graph, args.output)
    print(
        f"{args.kind} similarity graph: {graph.n_nodes} nodes, "
        f"{graph.n_edges} edges -> {args.output}"
    )
    return EXIT_OK


def _cmd_cluster(args) -> int:
    if args.target_k is not None and args.best_q:
        raise _UsageError("pass at most one of --target-k and --best-q")
    graph = bigraph.load_similarity(args.input)
    dendrogram = community.agglomerate(graph)
    if args.target_k is not None:
        partition = community.cut(dendrogram, target=args.target_k)
    else:
        partition = community.cut(dendrogram, best_q=True)
    if args.refine:
        partition = community.refine(graph, partition)
    q = community.modularity(graph, partition)
    provenance = _provenance("cluster", args)
    if args.dendrogram:
        community.save_dendrogram(dendrogram, args.dendrogram, provenance=provenance)
    community.save_partition(partition, graph.kind, args.output, provenance=provenance)
    print(f"modularity clustering: k={partition.k} Q={q:.6f} -> {args.output}")
    return EXIT_OK


def _cmd_cocluster(args) -> int:
    matrix = _load_matrix_any(args.input)
    model = cocluster.vns_search(matrix, restarts=args.restarts, seed=args.seed, jobs=args.jobs)
    model.audit()
    result = model.result()
    cocluster.save_model(
        result, args.output, provenance=_provenance("cocluster", args, seed=args.seed)
    )
    print(
        f"co-clustering: k_T={result.k_trajectories} k_S={result.k_segments} "
        f"cost={result.cost:.6f} nats -> {args.output}"
    )
    return EXIT_OK


def _load_pred_partition(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if "trajectory_partition" in payload:
        result = cocluster.load_model(path)
        return result.trajectory_partition
    partition, _kind = community.load_partition(path)
    return partition.assignment


def _cmd_evaluate(args) -> int:
    pred = _load_pred_partition(args.pred)
    ds = generator.load_dataset(args.truth)
    truth = {t.id: t.label for t in ds.trajectories if t.label is not None}
    if set(truth) != {t.id for t in ds.trajectories}:
        raise TrajclustError("dataset has unlabeled trajectories; cannot evaluate")
    ari = analysis.adjusted_rand_index(pred, {k: str(v) for k, v in truth.items()})
    report = analysis.confusion(pred, truth)
    payload = {
        "ari": ari,
        "confusion": report.to_payload(),
        "provenance": _provenance("evaluate", args),
    }
    _write_json(args.output, payload)
    if args.plots:
        import os

        os.makedirs(args.plots, exist_ok=True)
        analysis.save_matrix_plot(
            report.counts,
            os.path.join(args.plots, "confusion.png"),
            title="clusters x classes",
        )
    print(
        f"ARI={ari:.4f} ({len(report.cluster_ids)} clusters vs "
        f"{len(report.class_labels)} classes) -> {args.output}"
    )
    return EXIT_OK


def _cmd_report(args) -> int:
    result = cocluster.load_model(args.model)
    matrix = _load_matrix_any(args.matrix)
    unit = "bits" if args.bits else "nats"
    mi = analysis.mutual_information(result, unit=unit)
    crossed = analysis.crossed_matrix(result, matrix)
    payload = {
        "mutual_information": mi.to_payload(),
        "crossed": crossed.to_payload(),
        "provenance": _provenance("report", args),
    }
    _write_json(args.output, payload)
    if args.csv_dir:
        import os

        os.makedirs(args.csv_dir, exist_ok=True)
        _write_csv_matrix(
            os.path.join(args.csv_dir, "block_counts.csv"), crossed.block_counts
        )
        _write_csv_matrix(
            os.path.join(args.csv_dir, "block_densities.csv"), crossed.block_densities
        )
        mi_grid = _mi_grid(mi, result.k_trajectories, result.k_segments)
        _write_csv_matrix(os.path.join(args.csv_dir, "mutual_information.csv"), mi_grid)
    if args.plots:
        import os

        os.makedirs(args.plots, exist_ok=True)
        analysis.save_crossed_plot(
            crossed, matrix, os.path.join(args.plots, "crossed.png"), title="crossed matrix"
        )
        analysis.save_matrix_plot(
            crossed.block_counts,
            os.path.join(args.plots, "frequency.png"),
            title="co-cluster frequency",
        )
        analysis.save_matrix_plot(
            _mi_grid(mi, result.k_trajectories, result.k_segments),
            os.path.join(args.plots, "mutual_information.png"),
            title=f"mutual information ({unit})",
        )
    print(
        f"report: total MI={mi.total:.6f} {unit} over "
        f"{result.k_trajectories}x{result.k_segments} co-clusters -> {args.output}"
    )
    return EXIT_OK


def _mi_grid(mi: analysis.MIReport, k_rows: int, k_cols: int):
    import numpy as np

    grid = np.zeros((k_rows, k_cols))
    for cell in mi.cells:
        grid[cell.trajectory_cluster, cell.segment_cluster] = cell.mi
    return grid


def _write_csv_matrix(path, values) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in values:
            fh.write(",".join(repr(float(v)) if isinstance(v, float) else str(int(v)) for v in row))
            fh.write("\n")


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # argparse exits itself for --help / --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    if getattr(args, "func", None) is None:
        print("usage error: a subcommand is required (see --help)", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AuditError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (TrajclustError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
