"""Hierarchical modularity clustering of a weighted similarity graph.

Agglomeration is greedy best-merge: repeatedly merge the pair of clusters
with the largest modularity gain while a positive gain exists, then keep
merging by least-negative gain so every connected component collapses into a
single tree. Clusters in different components are never merged, so the
dendrogram of a disconnected graph is a forest. A lazy max-heap with
stale-entry invalidation keeps merge selection well under the cubic worst
case on sparse graphs.

Cutting the dendrogram at a prefix of its merge list yields the nested
partitions ("levels"); refine() then applies single-node best-move passes to
any partition.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

from .bigraph import SimilarityGraph
from .errors import ParseError, ValidationError

_TIE_EPS = 1e-12


@dataclass(frozen=True)
class Partition:
    """Node -> cluster-id map with ids dense in [0, k)."""

    assignment: dict
    k: int

    def __post_init__(self):
        used = set(self.assignment.values())
        if self.k != len(used) or used != set(range(self.k)):
            raise ValidationError("cluster ids must be dense in [0, k)")

    @classmethod
    def from_assignment(cls, mapping, node_order=None) -> "Partition":
        """Canonicalize arbitrary labels: clusters numbered by first appearance."""
        order = list(node_order) if node_order is not None else sorted(mapping)
        relabel: dict = {}
        assignment = {}
        for node in order:
            label = mapping[node]
            if label not in relabel:
                relabel[label] = len(relabel)
            assignment[node] = relabel[label]
        return cls(assignment=assignment, k=len(relabel))

    def clusters(self) -> list[list]:
        groups: list[list] = [[] for _ in range(self.k)]
        for node, cid in self.assignment.items():
            groups[cid].append(node)
        return [sorted(g) for g in groups]

    def __len__(self) -> int:
        return len(self.assignment)


@dataclass(frozen=True)
class Dendrogram:
    """Singleton leaves plus an ordered merge list with post-merge modularity.

    Leaf cluster i corresponds to nodes[i]; the t-th merge creates cluster
    id len(nodes) + t. singleton_q is the modularity of the all-singletons
    partition (the empty prefix).
    """

    nodes: tuple
    merges: tuple
    singleton_q: float

    @property
    def n_merges(self) -> int:
        return len(self.merges)

    def q_at(self, prefix: int) -> float:
        if prefix == 0:
            return self.singleton_q
        return self.merges[prefix - 1][2]

    def n_clusters_at(self, prefix: int) -> int:
        return len(self.nodes) - prefix

    def partition_at(self, prefix: int) -> Partition:
        if not 0 <= prefix <= self.n_merges:
            raise ValidationError(f"merge prefix {prefix} out of range")
        n = len(self.nodes)
        parent = list(range(n + prefix))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for t in range(prefix):
            a, b, _q = self.merges[t]
            new = n + t
            parent[find(a)] = new
            parent[find(b)] = new
        labels = {self.nodes[i]: find(i) for i in range(n)}
        return Partition.from_assignment(labels, node_order=self.nodes)


def modularity(graph: SimilarityGraph, partition: Partition) -> float:
    """Q = sum over clusters of intra-weight share minus squared degree share."""
    if set(partition.assignment) != set(graph.nodes):
        raise ValidationError("partition does not cover exactly the graph's nodes")
    total = graph.total_weight
    if total == 0:
        raise ValidationError("modularity is undefined on a graph with no edges")
    intra = [0.0] * partition.k
    degree = [0.0] * partition.k
    for node in graph.nodes:
        degree[partition.assignment[node]] += graph.weighted_degree(node)
    for a, b, w in graph.edges():
        if partition.assignment[a] == partition.assignment[b]:
            intra[partition.assignment[a]] += w
    q = 0.0
    for c in range(partition.k):
        q += intra[c] / total - (degree[c] / (2.0 * total)) ** 2
    return q


def agglomerate(graph: SimilarityGraph) -> Dendrogram:
    """Greedy modularity agglomeration over connected cluster pairs."""
    if graph.n_nodes == 0:
        raise ValidationError("cannot agglomerate an empty graph")
    nodes = graph.nodes
    n = len(nodes)
    total = graph.total_weight
    if total == 0:
        # No edges: every node is its own component, nothing ever merges.
        return Dendrogram(nodes=nodes, merges=(), singleton_q=0.0)

    index = {v: i for i, v in enumerate(nodes)}
    # Community state, keyed by the minimum member index.
    degree = {i: graph.weighted_degree(v) for i, v in enumerate(nodes)}
    between: dict[int, dict[int, float]] = {i: {} for i in range(n)}
    for a, b, w in graph.edges():
        i, j = index[a], index[b]
        between[i][j] = between[i].get(j, 0.0) + w
        between[j][i] = between[j].get(i, 0.0) + w
    dendro_id = {i: i for i in range(n)}
    version = {i: 0 for i in range(n)}
    alive = set(range(n))

    def gain(i: int, j: int) -> float:
        return between[i][j] / total - degree[i] * degree[j] / (2.0 * total * total)

    heap: list[tuple[float, int, int, int, int]] = []
    for i in range(n):
        for j in between[i]:
            if j > i:
                heap.append((-gain(i, j), i, j, 0, 0))
    heapq.heapify(heap)

    q = _singleton_q(graph)
    singleton_q = q
    merges: list[tuple[int, int, float]] = []
    while heap:
        neg_dq, i, j, vi, vj = heapq.heappop(heap)
        if i not in alive or j not in alive:
            continue
        if version[i] != vi or version[j] != vj:
            continue
        q += -neg_dq
        merges.append((dendro_id[i], dendro_id[j], q))
        # Merge j into i (i < j by construction).
        alive.discard(j)
        degree[i] += degree[j]
        row_i, row_j = between[i], between[j]
        row_i.pop(j, None)
        for k, w in row_j.items():
            if k == i:
                continue
            row_i[k] = row_i.get(k, 0.0) + w
            row_k = between[k]
            row_k.pop(j, None)
            row_k[i] = row_i[k]
        del between[j]
        dendro_id[i] = n + len(merges) - 1
        version[i] += 1
        version[j] += 1
        for k in sorted(row_i):
            a, b = (i, k) if i < k else (k, i)
            heapq.heappush(heap, (-gain(a, b), a, b, version[a], version[b]))
    return Dendrogram(nodes=nodes, merges=tuple(merges), singleton_q=singleton_q)


def _singleton_q(graph: SimilarityGraph) -> float:
    total = graph.total_weight
    return -sum((graph.weighted_degree(v) / (2.0 * total)) ** 2 for v in graph.nodes)


def cut(dendrogram: Dendrogram, target: int | None = None, best_q: bool = False) -> Partition:
    """Partition at a requested granularity.

    Either pass target (a cluster count) or best_q=True, which picks the
    merge prefix with maximal recorded modularity, ties going to fewer
    clusters.
    """
    if best_q == (target is not None):
        raise ValidationError("pass exactly one of target or best_q")
    n = len(dendrogram.nodes)
    if best_q:
        best_prefix = 0
        best = dendrogram.singleton_q
        for p in range(1, dendrogram.n_merges + 1):
            q = dendrogram.q_at(p)
            # Later prefixes win ties: fewer clusters at equal modularity.
            if q >= best - _TIE_EPS:
                best = max(best, q)
                best_prefix = p
        return dendrogram.partition_at(best_prefix)
    if not 1 <= target <= n:
        raise ValidationError(f"target cluster count {target} out of range [1, {n}]")
    prefix = n - target
    if prefix > dendrogram.n_merges:
        raise ValidationError(
            f"target {target} below the {n - dendrogram.n_merges} connected components"
        )
    return dendrogram.partition_at(prefix)


def refine(graph: SimilarityGraph, partition: Partition, max_passes: int | None = None) -> Partition:
    """Single-node best-move passes until a full pass makes no move.

    Each node may move to a neighboring cluster when that strictly increases
    modularity; the returned partition never has lower Q than the input.
    """
    if set(partition.assignment) != set(graph.nodes):
        raise ValidationError("partition does not cover exactly the graph's nodes")
    total = graph.total_weight
    if total == 0:
        raise ValidationError("modularity is undefined on a graph with no edges")
    assign = dict(partition.assignment)
    degree_of = {v: graph.weighted_degree(v) for v in graph.nodes}
    cluster_degree: dict[int, float] = {}
    for v in graph.nodes:
        cluster_degree[assign[v]] = cluster_degree.get(assign[v], 0.0) + degree_of[v]

    passes = 0
    while max_passes is None or passes < max_passes:
        moved = False
        for v in graph.nodes:
            current = assign[v]
            link: dict[int, float] = {}
            for u, w in graph.neighbors(v).items():
                link[assign[u]] = link.get(assign[u], 0.0) + w
            d_v = degree_of[v]
            base_link = link.get(current, 0.0)
            base_deg = cluster_degree[current] - d_v
            # Smallest target id wins ties because candidates come sorted.
            best_gain = _TIE_EPS
            best_target = current
            for target_cluster in sorted(link):
                if target_cluster == current:
                    continue
                dq = (link[target_cluster] - base_link) / total - d_v * (
                    cluster_degree[target_cluster] - base_deg
                ) / (2.0 * total * total)
                if dq > best_gain:
                    best_gain = dq
                    best_target = target_cluster
            if best_target != current:
                assign[v] = best_target
                cluster_degree[current] -= d_v
                cluster_degree[best_target] += d_v
                moved = True
        passes += 1
        if not moved:
            break
    return Partition.from_assignment(assign, node_order=graph.nodes)


# ---------------------------------------------------------------------------
# File interchange


def save_dendrogram(dendrogram: Dendrogram, path, provenance: dict | None = None) -> None:
    payload = {
        "nodes": list(dendrogram.nodes),
        "singleton_q": dendrogram.singleton_q,
        "merges": [[int(a), int(b), float(q)] for a, b, q in dendrogram.merges],
    }
    if provenance is not None:
        payload["provenance"] = provenance
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dendrogram(path) -> Dendrogram:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        return Dendrogram(
            nodes=tuple(int(v) for v in payload["nodes"]),
            merges=tuple((int(a), int(b), float(q)) for a, b, q in payload["merges"]),
            singleton_q=float(payload["singleton_q"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad dendrogram file: {exc}", path=path) from None


def save_partition(partition: Partition, kind: str, path, provenance: dict | None = None) -> None:
    nodes = sorted(partition.assignment)
    payload = {
        "kind": kind,
        "k": partition.k,
        "nodes": nodes,
        "clusters": [partition.assignment[v] for v in nodes],
    }
    if provenance is not None:
        payload["provenance"] = provenance
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_partition(path) -> tuple[Partition, str]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        nodes = [int(v) for v in payload["nodes"]]
        clusters = [int(c) for c in payload["clusters"]]
        kind = payload["kind"]
        if len(nodes) != len(clusters):
            raise ValueError("nodes and clusters differ in length")
        partition = Partition(assignment=dict(zip(nodes, clusters)), k=int(payload["k"]))
    except (KeyError, TypeError, ValueError, ValidationError) as exc:
        raise ParseError(f"bad partition file: {exc}", path=path) from None
    return partition, kind
