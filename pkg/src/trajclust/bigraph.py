"""Bipartite traversal matrix and its two weighted similarity projections.

The traversal matrix counts how often each trajectory visited each road
segment; only segments with at least one traversal get a column. Projecting
onto trajectories (or segments) produces a weighted undirected similarity
graph whose edge weights are cosines of tf-idf style contribution vectors:

  weight of segment s within trajectory T =
      visit-length share of s in T  *  ln(n_trajectories / n_visitors(s))

  weight of trajectory T for segment s =
      visit share of T among s's traversals  *  ln(n_segments / n_distinct(T))

Natural logarithms throughout. Pairs that share only universally-visited
segments (rarity factor 0) get similarity 0 and therefore no edge.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError
from .generator import TrajectoryDataset
from .network import RoadNetwork


@dataclass(frozen=True, eq=False)
class TraversalMatrix:
    """Trajectory x segment visit counts, with ids kept alongside indices."""

    trajectory_ids: tuple[int, ...]
    segment_ids: tuple[int, ...]
    counts: np.ndarray

    def __post_init__(self):
        if self.counts.shape != (len(self.trajectory_ids), len(self.segment_ids)):
            raise ValidationError("count matrix shape does not match the id lists")
        if np.any(self.counts < 0):
            raise ValidationError("negative traversal count")
        if self.counts.size:
            if np.any(self.counts.sum(axis=1) == 0):
                raise ValidationError("every trajectory row needs at least one traversal")
            if np.any(self.counts.sum(axis=0) == 0):
                raise ValidationError("every segment column needs at least one traversal")

    @property
    def n_trajectories(self) -> int:
        return len(self.trajectory_ids)

    @property
    def n_segments(self) -> int:
        return len(self.segment_ids)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_index(self, trajectory_id: int) -> int:
        try:
            return self._row_lookup[trajectory_id]
        except KeyError:
            raise ValidationError(f"unknown trajectory id {trajectory_id}") from None

    def col_index(self, segment_id: int) -> int:
        try:
            return self._col_lookup[segment_id]
        except KeyError:
            raise ValidationError(f"unknown segment id {segment_id}") from None

    @property
    def _row_lookup(self) -> dict[int, int]:
        lookup = self.__dict__.get("_row_lookup_cache")
        if lookup is None:
            lookup = {tid: i for i, tid in enumerate(self.trajectory_ids)}
            self.__dict__["_row_lookup_cache"] = lookup
        return lookup

    @property
    def _col_lookup(self) -> dict[int, int]:
        lookup = self.__dict__.get("_col_lookup_cache")
        if lookup is None:
            lookup = {sid: j for j, sid in enumerate(self.segment_ids)}
            self.__dict__["_col_lookup_cache"] = lookup
        return lookup

    def count(self, trajectory_id: int, segment_id: int) -> int:
        return int(self.counts[self.row_index(trajectory_id), self.col_index(segment_id)])


def build_traversal_matrix(ds: TrajectoryDataset) -> TraversalMatrix:
    """Count segment visits per trajectory; columns restricted to visited segments."""
    if len(ds) == 0:
        raise ValidationError("cannot build a traversal matrix from an empty dataset")
    segment_ids = sorted({sid for t in ds.trajectories for sid in t.segments})
    col = {sid: j for j, sid in enumerate(segment_ids)}
    counts = np.zeros((len(ds), len(segment_ids)), dtype=np.int64)
    for i, t in enumerate(ds.trajectories):
        for sid in t.segments:
            counts[i, col[sid]] += 1
    return TraversalMatrix(
        trajectory_ids=tuple(t.id for t in ds.trajectories),
        segment_ids=tuple(segment_ids),
        counts=counts,
    )


def _segment_weights(matrix: TraversalMatrix, net: RoadNetwork) -> np.ndarray:
    """Full matrix of per-(trajectory, segment) contribution weights."""
    lengths = np.array([net.segment(sid).length for sid in matrix.segment_ids])
    weighted = matrix.counts * lengths[np.newaxis, :]
    row_mass = weighted.sum(axis=1)
    tf = weighted / row_mass[:, np.newaxis]
    visitors = (matrix.counts > 0).sum(axis=0)
    idf = np.log(matrix.n_trajectories / visitors)
    return tf * idf[np.newaxis, :]


def _trajectory_weights(matrix: TraversalMatrix) -> np.ndarray:
    """Full matrix of per-(trajectory, segment) relevance weights."""
    col_visits = matrix.counts.sum(axis=0)
    share = matrix.counts / col_visits[np.newaxis, :]
    distinct = (matrix.counts > 0).sum(axis=1)
    rarity = np.log(matrix.n_segments / distinct)
    return share * rarity[:, np.newaxis]


def segment_contribution(matrix: TraversalMatrix, net: RoadNetwork, segment_id: int, trajectory_id: int) -> float:
    """Weight of one segment within one trajectory (visit-length share x rarity)."""
    i = matrix.row_index(trajectory_id)
    j = matrix.col_index(segment_id)
    if matrix.counts[i, j] == 0:
        raise ValidationError(
            f"trajectory {trajectory_id} never visited segment {segment_id}"
        )
    return float(_segment_weights(matrix, net)[i, j])


def trajectory_relevance(matrix: TraversalMatrix, trajectory_id: int, segment_id: int) -> float:
    """Weight of one trajectory for one segment (visit share x trajectory rarity)."""
    i = matrix.row_index(trajectory_id)
    j = matrix.col_index(segment_id)
    if matrix.counts[i, j] == 0:
        raise ValidationError(
            f"trajectory {trajectory_id} never visited segment {segment_id}"
        )
    return float(_trajectory_weights(matrix)[i, j])


class SimilarityGraph:
    """Weighted undirected graph over trajectory ids or segment ids.

    Stores each edge once under its sorted node pair; weights are strictly
    positive cosines, so they lie in (0, 1] up to float round-off.
    """

    def __init__(self, kind: str, nodes, edges):
        if kind not in ("trajectory", "segment"):
            raise ValidationError(f"unknown node kind {kind!r}")
        self.kind = kind
        self.nodes = tuple(nodes)
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise ValidationError("duplicate node ids")
        adj: dict[int, dict[int, float]] = {v: {} for v in self.nodes}
        store: dict[tuple[int, int], float] = {}
        for (a, b), w in edges.items():
            if a == b:
                raise ValidationError(f"self-loop on node {a}")
            if a not in node_set or b not in node_set:
                raise ValidationError(f"edge ({a}, {b}) references unknown node")
            w = float(w)
            if not w > 0:
                raise ValidationError(f"edge ({a}, {b}) has non-positive weight {w}")
            key = (a, b) if a < b else (b, a)
            if key in store and store[key] != w:
                raise ValidationError(f"conflicting weights for edge {key}")
            store[key] = w
            adj[a][b] = w
            adj[b][a] = w
        self._edges = dict(sorted(store.items()))
        self._adj = adj

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self._edges)

    @property
    def total_weight(self) -> float:
        return float(sum(self._edges.values()))

    def has_edge(self, a: int, b: int) -> bool:
        key = (a, b) if a < b else (b, a)
        return key in self._edges

    def weight(self, a: int, b: int) -> float:
        key = (a, b) if a < b else (b, a)
        try:
            return self._edges[key]
        except KeyError:
            raise ValidationError(f"no edge between {a} and {b}") from None

    def neighbors(self, v: int) -> dict[int, float]:
        try:
            return self._adj[v]
        except KeyError:
            raise ValidationError(f"unknown node {v}") from None

    def weighted_degree(self, v: int) -> float:
        return float(sum(self.neighbors(v).values()))

    def edges(self):
        """Iterate (a, b, weight) with a < b, sorted by node pair."""
        for (a, b), w in self._edges.items():
            yield a, b, w


def _project(kind: str, node_ids, vectors: np.ndarray) -> SimilarityGraph:
    """Cosine-similarity graph from row vectors, via an inverted index.

    Only pairs that co-occur on some strictly-positive coordinate are
    evaluated, so the cost scales with co-occurrence rather than all pairs.
    """
    norms = np.sqrt((vectors * vectors).sum(axis=1))
    zero = [node_ids[i] for i in np.nonzero(norms == 0)[0]]
    if zero:
        warnings.warn(
            f"{len(zero)} {kind} node(s) have all-zero contribution vectors "
            f"and will be isolated: {zero[:5]}{'...' if len(zero) > 5 else ''}",
            stacklevel=3,
        )
    dots: dict[tuple[int, int], float] = {}
    n_rows, n_cols = vectors.shape
    for j in range(n_cols):
        column = vectors[:, j]
        rows = np.nonzero(column > 0)[0]
        if len(rows) < 2:
            continue
        vals = column[rows]
        for a_pos in range(len(rows)):
            i = int(rows[a_pos])
            vi = vals[a_pos]
            for b_pos in range(a_pos + 1, len(rows)):
                k = int(rows[b_pos])
                key = (i, k)
                dots[key] = dots.get(key, 0.0) + float(vi * vals[b_pos])
    edges = {}
    for (i, k), dot in sorted(dots.items()):
        if dot > 0:
            edges[(node_ids[i], node_ids[k])] = dot / (norms[i] * norms[k])
    return SimilarityGraph(kind, node_ids, edges)


def project_trajectories(matrix: TraversalMatrix, net: RoadNetwork) -> SimilarityGraph:
    """Similarity graph over trajectories from segment-contribution vectors."""
    return _project("trajectory", matrix.trajectory_ids, _segment_weights(matrix, net))


def project_segments(matrix: TraversalMatrix) -> SimilarityGraph:
    """Similarity graph over segments from trajectory-relevance vectors."""
    return _project("segment", matrix.segment_ids, _trajectory_weights(matrix).T)


# ---------------------------------------------------------------------------
# File interchange


def save_matrix(matrix: TraversalMatrix, path, provenance: dict | None = None) -> None:
    payload = {
        "trajectory_ids": list(matrix.trajectory_ids),
        "segment_ids": list(matrix.segment_ids),
        "entries": [
            [int(i), int(j), int(matrix.counts[i, j])]
            for i, j in zip(*np.nonzero(matrix.counts))
        ],
    }
    if provenance is not None:
        payload["provenance"] = provenance
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_matrix(path) -> TraversalMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        trajectory_ids = tuple(int(t) for t in payload["trajectory_ids"])
        segment_ids = tuple(int(s) for s in payload["segment_ids"])
        entries = payload["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad traversal-matrix file: {exc}", path=path) from None
    counts = np.zeros((len(trajectory_ids), len(segment_ids)), dtype=np.int64)
    for entry in entries:
        i, j, c = (int(v) for v in entry)
        counts[i, j] = c
    return TraversalMatrix(trajectory_ids, segment_ids, counts)


def save_similarity(graph: SimilarityGraph, csv_path, sidecar_path=None) -> None:
    """Write edges as CSV plus a JSON sidecar holding node kind and node list."""
    if sidecar_path is None:
        sidecar_path = _sidecar_of(csv_path)
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("node_a,node_b,weight\n")
        for a, b, w in graph.edges():
            fh.write(f"{a},{b},{w!r}\n")
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump({"kind": graph.kind, "nodes": list(graph.nodes)}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_similarity(csv_path, sidecar_path=None) -> SimilarityGraph:
    if sidecar_path is None:
        sidecar_path = _sidecar_of(csv_path)
    with open(sidecar_path, "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    try:
        kind = sidecar["kind"]
        nodes = tuple(int(v) for v in sidecar["nodes"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad similarity sidecar: {exc}", path=sidecar_path) from None
    edges = {}
    with open(csv_path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "node_a,node_b,weight":
        raise ParseError("expected header 'node_a,node_b,weight'", path=csv_path, line=1)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError("expected 3 comma-separated fields", path=csv_path, line=lineno)
        try:
            edges[(int(parts[0]), int(parts[1]))] = float(parts[2])
        except ValueError:
            raise ParseError("bad edge record", path=csv_path, line=lineno) from None
    return SimilarityGraph(kind, nodes, edges)


def _sidecar_of(csv_path):
    text = str(csv_path)
    if text.endswith(".csv"):
        return text[: -len(".csv")] + ".json"
    return text + ".json"
