"""Cluster-quality reports: confusion matrices, ARI, crossed matrices, MI.

All functions are pure over immutable inputs. Mutual information is reported
per co-cluster in nats (with a bits toggle): each cell carries its joint
traversal probability, the marginals, the mass expected under independence,
and the cell's signed contribution

    mi = P(joint) * log(P(joint) / (P(row) P(col)))

with the 0 log 0 convention that empty cells contribute exactly 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bigraph import TraversalMatrix
from .errors import ValidationError


def _as_assignment(partition) -> dict:
    """Accept community.Partition or a plain node -> cluster mapping."""
    assignment = getattr(partition, "assignment", partition)
    if not isinstance(assignment, dict):
        raise ValidationError("expected a Partition or a node -> cluster dict")
    return assignment


@dataclass(frozen=True)
class ContingencyReport:
    """Cluster x class counts with marginals and per-cluster purity."""

    cluster_ids: tuple
    class_labels: tuple
    counts: np.ndarray
    row_marginals: np.ndarray
    col_marginals: np.ndarray
    purity: dict
    total: int

    def to_payload(self) -> dict:
        return {
            "cluster_ids": list(self.cluster_ids),
            "class_labels": [str(c) for c in self.class_labels],
            "counts": [[int(v) for v in row] for row in self.counts],
            "row_marginals": [int(v) for v in self.row_marginals],
            "col_marginals": [int(v) for v in self.col_marginals],
            "purity": {str(k): float(v) for k, v in sorted(self.purity.items())},
            "total": int(self.total),
        }


def confusion(pred, truth: dict) -> ContingencyReport:
    """Count elements per (predicted cluster, true class) pair.

    `pred` maps elements to cluster ids, `truth` maps the same elements to
    class labels. Purity of a cluster is the share of its majority class.
    """
    pred = _as_assignment(pred)
    if set(pred) != set(truth):
        raise ValidationError("prediction and truth cover different element sets")
    if not pred:
        raise ValidationError("cannot build a confusion report from no elements")
    cluster_ids = tuple(sorted(set(pred.values())))
    class_labels = tuple(sorted({str(v) for v in truth.values()}))
    row = {c: i for i, c in enumerate(cluster_ids)}
    col = {c: j for j, c in enumerate(class_labels)}
    counts = np.zeros((len(cluster_ids), len(class_labels)), dtype=np.int64)
    for element, cluster in pred.items():
        counts[row[cluster], col[str(truth[element])]] += 1
    row_marginals = counts.sum(axis=1)
    purity = {
        cluster_ids[i]: float(counts[i].max() / row_marginals[i])
        for i in range(len(cluster_ids))
    }
    return ContingencyReport(
        cluster_ids=cluster_ids,
        class_labels=class_labels,
        counts=counts,
        row_marginals=row_marginals,
        col_marginals=counts.sum(axis=0),
        purity=purity,
        total=int(counts.sum()),
    )


def adjusted_rand_index(p1, p2) -> float:
    """Chance-corrected pair-counting agreement between two partitions.

    1.0 for identical partitions, around 0 for independent ones; exact
    integer pair counts, so the only rounding is the final division.
    """
    a1 = _as_assignment(p1)
    a2 = _as_assignment(p2)
    if set(a1) != set(a2):
        raise ValidationError("partitions cover different element sets")
    n = len(a1)
    if n == 0:
        raise ValidationError("partitions are empty")
    table: dict[tuple, int] = {}
    rows: dict = {}
    cols: dict = {}
    for element in a1:
        key = (a1[element], a2[element])
        table[key] = table.get(key, 0) + 1
        rows[key[0]] = rows.get(key[0], 0) + 1
        cols[key[1]] = cols.get(key[1], 0) + 1
    index = sum(math.comb(v, 2) for v in table.values())
    sum_rows = sum(math.comb(v, 2) for v in rows.values())
    sum_cols = sum(math.comb(v, 2) for v in cols.values())
    pairs = math.comb(n, 2)
    if pairs == 0:
        return 1.0
    expected = sum_rows * sum_cols / pairs
    maximum = (sum_rows + sum_cols) / 2.0
    if maximum == expected:
        return 1.0
    return (index - expected) / (maximum - expected)


@dataclass(frozen=True)
class MICell:
    trajectory_cluster: int
    segment_cluster: int
    count: int
    p_joint: float
    p_trajectory: float
    p_segment: float
    expected_mass: float
    mi: float


@dataclass(frozen=True)
class MIReport:
    """Per-co-cluster mutual-information contributions plus their total."""

    cells: tuple
    total: float
    unit: str

    def to_payload(self) -> dict:
        return {
            "unit": self.unit,
            "total": float(self.total),
            "cells": [
                {
                    "trajectory_cluster": cell.trajectory_cluster,
                    "segment_cluster": cell.segment_cluster,
                    "count": cell.count,
                    "p_joint": cell.p_joint,
                    "p_trajectory": cell.p_trajectory,
                    "p_segment": cell.p_segment,
                    "expected_mass": cell.expected_mass,
                    "mi": cell.mi,
                }
                for cell in self.cells
            ],
        }


def mutual_information(model, unit: str = "nats") -> MIReport:
    """Mutual information between the two cluster partitions of a co-clustering.

    `model` is anything exposing contingency_table() (a CoClusterModel result
    or a saved CoClusterResult); probabilities are traversal-mass shares.
    """
    if unit not in ("nats", "bits"):
        raise ValidationError(f"unit must be 'nats' or 'bits', got {unit!r}")
    table = np.asarray(model.contingency_table(), dtype=np.int64)
    total = int(table.sum())
    if total <= 0:
        raise ValidationError("contingency table has no traversals")
    scale = 1.0 if unit == "nats" else 1.0 / math.log(2.0)
    p_rows = table.sum(axis=1) / total
    p_cols = table.sum(axis=0) / total
    cells = []
    mi_total = 0.0
    for c in range(table.shape[0]):
        for d in range(table.shape[1]):
            count = int(table[c, d])
            p_joint = count / total
            expected = float(p_rows[c] * p_cols[d])
            if count > 0:
                mi = p_joint * math.log(p_joint / expected) * scale
            else:
                mi = 0.0
            mi_total += mi
            cells.append(
                MICell(
                    trajectory_cluster=c,
                    segment_cluster=d,
                    count=count,
                    p_joint=p_joint,
                    p_trajectory=float(p_rows[c]),
                    p_segment=float(p_cols[d]),
                    expected_mass=expected,
                    mi=mi,
                )
            )
    return MIReport(cells=tuple(cells), total=mi_total, unit=unit)


@dataclass(frozen=True)
class CrossedMatrixReport:
    """Block-ordered view of the traversal matrix under two partitions.

    Rows (trajectories) and columns (segments) are sorted by cluster, then
    id; boundaries mark where each cluster's block starts, and densities are
    traversals per cell (block total / block area).
    """

    row_order: tuple
    col_order: tuple
    row_blocks: tuple
    col_blocks: tuple
    block_counts: np.ndarray
    block_densities: np.ndarray

    def to_payload(self) -> dict:
        return {
            "row_order": list(self.row_order),
            "col_order": list(self.col_order),
            "row_blocks": list(self.row_blocks),
            "col_blocks": list(self.col_blocks),
            "block_counts": [[int(v) for v in row] for row in self.block_counts],
            "block_densities": [[float(v) for v in row] for row in self.block_densities],
        }


def crossed_matrix(source, matrix: TraversalMatrix) -> CrossedMatrixReport:
    """Block structure of the traversal matrix under a pair of partitions.

    `source` is either a co-clustering result (anything with
    trajectory_partition / segment_partition dicts) or a
    (row_partition, col_partition) pair of node -> cluster mappings.
    """
    if hasattr(source, "trajectory_partition"):
        row_part = _as_assignment(source.trajectory_partition)
        col_part = _as_assignment(source.segment_partition)
    else:
        row_source, col_source = source
        row_part = _as_assignment(row_source)
        col_part = _as_assignment(col_source)
    if set(row_part) != set(matrix.trajectory_ids):
        raise ValidationError("row partition does not cover the matrix's trajectories")
    if set(col_part) != set(matrix.segment_ids):
        raise ValidationError("column partition does not cover the matrix's segments")
    row_clusters = sorted(set(row_part.values()))
    col_clusters = sorted(set(col_part.values()))
    row_order = sorted(matrix.trajectory_ids, key=lambda t: (row_part[t], t))
    col_order = sorted(matrix.segment_ids, key=lambda s: (col_part[s], s))
    row_blocks = []
    seen = None
    for pos, t in enumerate(row_order):
        if row_part[t] != seen:
            row_blocks.append(pos)
            seen = row_part[t]
    col_blocks = []
    seen = None
    for pos, s in enumerate(col_order):
        if col_part[s] != seen:
            col_blocks.append(pos)
            seen = col_part[s]
    row_of = {c: i for i, c in enumerate(row_clusters)}
    col_of = {c: j for j, c in enumerate(col_clusters)}
    counts = np.zeros((len(row_clusters), len(col_clusters)), dtype=np.int64)
    sizes_r = np.zeros(len(row_clusters), dtype=np.int64)
    sizes_c = np.zeros(len(col_clusters), dtype=np.int64)
    for t in matrix.trajectory_ids:
        sizes_r[row_of[row_part[t]]] += 1
    for s in matrix.segment_ids:
        sizes_c[col_of[col_part[s]]] += 1
    for i, t in enumerate(matrix.trajectory_ids):
        ri = row_of[row_part[t]]
        row = matrix.counts[i]
        for j in np.nonzero(row)[0]:
            counts[ri, col_of[col_part[matrix.segment_ids[j]]]] += int(row[j])
    areas = sizes_r[:, np.newaxis] * sizes_c[np.newaxis, :]
    densities = counts / areas
    return CrossedMatrixReport(
        row_order=tuple(row_order),
        col_order=tuple(col_order),
        row_blocks=tuple(row_blocks),
        col_blocks=tuple(col_blocks),
        block_counts=counts,
        block_densities=densities,
    )


# ---------------------------------------------------------------------------
# Optional grayscale density plots (static files only)


def save_matrix_plot(values, path, title: str | None = None, boundaries=None) -> None:
    """Render a 2D array as a grayscale PNG; darker means larger."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    grid = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(grid, cmap="Greys", aspect="auto", interpolation="nearest")
    if boundaries is not None:
        row_bounds, col_bounds = boundaries
        for r in row_bounds:
            if r > 0:
                ax.axhline(r - 0.5, color="red", linewidth=0.6)
        for c in col_bounds:
            if c > 0:
                ax.axvline(c - 0.5, color="red", linewidth=0.6)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_crossed_plot(report: CrossedMatrixReport, matrix: TraversalMatrix, path, title=None) -> None:
    """Plot the reordered raw traversal matrix with cluster block boundaries."""
    row_pos = {t: i for i, t in enumerate(report.row_order)}
    col_pos = {s: j for j, s in enumerate(report.col_order)}
    grid = np.zeros((len(report.row_order), len(report.col_order)))
    for i, t in enumerate(matrix.trajectory_ids):
        row = matrix.counts[i]
        for j in np.nonzero(row)[0]:
            grid[row_pos[t], col_pos[matrix.segment_ids[j]]] = row[j]
    save_matrix_plot(grid, path, title=title, boundaries=(report.row_blocks, report.col_blocks))
