"""Direct MAP co-clustering of the traversal matrix.

The model groups trajectories and segments simultaneously and is scored by a
coding-length style criterion, in nats (lower is better):

    log n + log m                                   choice of cluster counts
  + log B(n, k_T) + log B(m, k_S)                   partitions into clusters
  + log C(N + k_T k_S - 1, k_T k_S - 1)             traversals over co-clusters
  + sum_c log C(N_c + n_c - 1, n_c - 1)             cluster totals over members
  + sum_d log C(M_d + m_d - 1, m_d - 1)
  + log N! - sum_{c,d} log N_cd!                    traversal multinomials
  + sum_c (log N_c! - sum_{i in c} log n_i!)
  + sum_d (log M_d! - sum_{j in d} log m_j!)

where B(n, k) = sum_{j<=k} Stirling2(n, j), N_cd are co-cluster traversal
counts, N_c / M_d their marginals, n_c / m_d cluster cardinalities and
n_i / m_j per-item traversal totals. The first block prices the model
(conciseness), the factorial block prices re-encoding the data with it
(accuracy); minimizing the sum trades the two off.

Optimization is agglomerative greedy from any starting model (canonically
all-singleton), followed by single-element swap passes, wrapped in
multi-start VNS with random initial partitions. Merge candidates live in
lazy per-side heaps keyed by the pair-local part of the merge delta; the
side-wide part (partition prior and co-cluster count prior) is added at
selection time since it is identical for every pair of a side. Keys are
re-certified against an exact recomputation before a merge is applied, and
termination is confirmed by a full exact sweep, so stale entries can never
stop the search early.
"""

from __future__ import annotations

import heapq
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .bigraph import TraversalMatrix
from .errors import AuditError, ParseError, ValidationError

_AXIS = {"trajectory": 0, "segment": 1}
_SIDE = {0: "trajectory", 1: "segment"}
_EPS_IMPROVE = 1e-10
_EPS_KEY = 1e-12

_log_b_cache: dict[int, np.ndarray] = {}


def _log_b_row(n: int) -> np.ndarray:
    """b[k] = log sum_{j<=k} Stirling2(n, j) for k in 1..n (b[0] = -inf).

    Log-domain dynamic programming over the Stirling recurrence
    S2(n, j) = j S2(n-1, j) + S2(n-1, j-1), accumulated with logaddexp.
    """
    if n < 1:
        raise ValidationError("log B(n, k) needs n >= 1")
    cached = _log_b_cache.get(n)
    if cached is not None:
        return cached
    row = np.full(n + 1, -np.inf)
    row[1] = 0.0
    js = np.log(np.arange(1, n + 1, dtype=float))
    for _ in range(2, n + 1):
        row = np.concatenate(([-np.inf], np.logaddexp(js + row[1:], row[0:n])))
    b = np.concatenate(([-np.inf], np.logaddexp.accumulate(row[1:])))
    _log_b_cache[n] = b
    return b


def _lgamma(x) -> float:
    return math.lgamma(float(x))


def _log_choose(a, b) -> float:
    return _lgamma(a + 1) - _lgamma(b + 1) - _lgamma(a - b + 1)


def _alloc(total, card) -> float:
    """log C(total + card - 1, card - 1): ways to split `total` over `card` bins."""
    return _lgamma(total + card) - _lgamma(card) - _lgamma(total + 1)


def _alloc_vec(total: np.ndarray, card: np.ndarray) -> np.ndarray:
    return gammaln(total + card) - gammaln(card) - gammaln(total + 1.0)


class CoClusterModel:
    """Mutable co-clustering state over a fixed TraversalMatrix.

    Rows and columns are assigned to internal cluster slots (at most one per
    item); dead slots are skipped via alive masks. All caches needed by the
    cost terms are maintained incrementally and can be checked against a
    from-scratch recomputation with audit().
    """

    def __init__(self, matrix: TraversalMatrix, row_labels, col_labels):
        self.matrix = matrix
        self.n = matrix.n_trajectories
        self.m = matrix.n_segments
        self.N = matrix.total
        counts = matrix.counts
        self._item_tot = [counts.sum(axis=1), counts.sum(axis=0)]
        self._assign = [None, None]
        self._alive = [np.zeros(self.n, dtype=bool), np.zeros(self.m, dtype=bool)]
        self._card = [np.zeros(self.n, dtype=np.int64), np.zeros(self.m, dtype=np.int64)]
        self._tot = [np.zeros(self.n, dtype=np.int64), np.zeros(self.m, dtype=np.int64)]
        self._version = [np.zeros(self.n, dtype=np.int64), np.zeros(self.m, dtype=np.int64)]
        self._k = [0, 0]
        self._K = np.zeros((self.n, self.m), dtype=np.int64)
        self._log_b = [_log_b_row(self.n), _log_b_row(self.m)]
        self._lg_n_total = _lgamma(self.N + 1)
        self._item_fact = [
            float(gammaln(self._item_tot[0] + 1.0).sum()),
            float(gammaln(self._item_tot[1] + 1.0).sum()),
        ]
        self._install_labels(0, row_labels)
        self._install_labels(1, col_labels)
        self._rebuild_K()
        self._cost = self._exact_cost()

    # -- construction ------------------------------------------------------

    def _install_labels(self, axis: int, labels) -> None:
        labels = np.asarray(labels)
        size = self.n if axis == 0 else self.m
        if labels.shape != (size,):
            raise ValidationError(f"{_SIDE[axis]} label vector must have length {size}")
        # Slot of a cluster = smallest member index, which keeps slot ids
        # stable under the merge convention (merge into the smaller slot).
        slot_of: dict[int, int] = {}
        for i, lab in enumerate(labels.tolist()):
            if lab not in slot_of:
                slot_of[lab] = i
        assign = np.array([slot_of[lab] for lab in labels.tolist()], dtype=np.int64)
        self._assign[axis] = assign
        alive = self._alive[axis]
        alive[:] = False
        alive[np.unique(assign)] = True
        self._k[axis] = int(alive.sum())
        card = self._card[axis]
        card[:] = 0
        np.add.at(card, assign, 1)
        tot = self._tot[axis]
        tot[:] = 0
        np.add.at(tot, assign, self._item_tot[axis])

    def _rebuild_K(self) -> None:
        K = np.zeros((self.n, self.m), dtype=np.int64)
        np.add.at(K, self._assign[0], self.matrix.counts)
        K2 = np.zeros_like(K)
        np.add.at(K2.T, self._assign[1], K.T)
        self._K = K2

    def copy(self) -> "CoClusterModel":
        dup = object.__new__(CoClusterModel)
        dup.matrix = self.matrix
        dup.n, dup.m, dup.N = self.n, self.m, self.N
        dup._item_tot = self._item_tot
        dup._assign = [a.copy() for a in self._assign]
        dup._alive = [a.copy() for a in self._alive]
        dup._card = [a.copy() for a in self._card]
        dup._tot = [a.copy() for a in self._tot]
        dup._version = [a.copy() for a in self._version]
        dup._k = list(self._k)
        dup._K = self._K.copy()
        dup._log_b = self._log_b
        dup._lg_n_total = self._lg_n_total
        dup._item_fact = self._item_fact
        dup._cost = self._cost
        return dup

    # -- inspection --------------------------------------------------------

    def k(self, side: str) -> int:
        return self._k[_axis_of(side)]

    def cluster_ids(self, side: str) -> list[int]:
        return np.nonzero(self._alive[_axis_of(side)])[0].tolist()

    def members(self, side: str, cluster: int) -> list[int]:
        axis = _axis_of(side)
        self._require_live(axis, cluster)
        return np.nonzero(self._assign[axis] == cluster)[0].tolist()

    @property
    def cached_cost(self) -> float:
        return self._cost

    def _K_axis(self, axis: int) -> np.ndarray:
        return self._K if axis == 0 else self._K.T

    def _require_live(self, axis: int, cluster: int) -> None:
        alive = self._alive[axis]
        if not (0 <= cluster < alive.shape[0]) or not alive[cluster]:
            raise ValidationError(f"unknown {_SIDE[axis]} cluster id {cluster}")

    # -- cost --------------------------------------------------------------

    def _exact_terms(self) -> dict[str, float]:
        live0, live1 = self._alive
        k0, k1 = self._k
        tot0 = self._tot[0][live0]
        tot1 = self._tot[1][live1]
        card0 = self._card[0][live0]
        card1 = self._card[1][live1]
        K_live = self._K[np.ix_(live0, live1)]
        grid_cells = k0 * k1
        return {
            "cluster_count_header": math.log(self.n) + math.log(self.m),
            "trajectory_partition_prior": float(self._log_b[0][k0]),
            "segment_partition_prior": float(self._log_b[1][k1]),
            "cell_count_prior": _log_choose(self.N + grid_cells - 1, grid_cells - 1),
            "trajectory_count_prior": float(_alloc_vec(tot0.astype(float), card0.astype(float)).sum()),
            "segment_count_prior": float(_alloc_vec(tot1.astype(float), card1.astype(float)).sum()),
            "cell_multinomial": self._lg_n_total - float(gammaln(K_live + 1.0).sum()),
            "trajectory_multinomial": float(gammaln(tot0 + 1.0).sum()) - self._item_fact[0],
            "segment_multinomial": float(gammaln(tot1 + 1.0).sum()) - self._item_fact[1],
        }

    def _exact_cost(self) -> float:
        return float(sum(self._exact_terms().values()))

    def audit(self) -> None:
        """Recompute contingency and marginals from scratch; raise on mismatch."""
        for axis in (0, 1):
            assign = self._assign[axis]
            alive = self._alive[axis]
            if np.any(~alive[assign]):
                raise AuditError(f"{_SIDE[axis]} assignment points at a dead slot")
            card = np.zeros_like(self._card[axis])
            np.add.at(card, assign, 1)
            if not np.array_equal(card, self._card[axis]):
                raise AuditError(f"{_SIDE[axis]} cluster cardinalities diverged")
            tot = np.zeros_like(self._tot[axis])
            np.add.at(tot, assign, self._item_tot[axis])
            if not np.array_equal(tot, self._tot[axis]):
                raise AuditError(f"{_SIDE[axis]} cluster traversal totals diverged")
            if int(alive.sum()) != self._k[axis]:
                raise AuditError(f"{_SIDE[axis]} cluster count diverged")
        K = np.zeros((self.n, self.m), dtype=np.int64)
        np.add.at(K, self._assign[0], self.matrix.counts)
        K2 = np.zeros_like(K)
        np.add.at(K2.T, self._assign[1], K.T)
        if not np.array_equal(K2, self._K):
            raise AuditError("co-cluster contingency counts diverged")

    # -- merge machinery ----------------------------------------------------

    def _merge_shift(self, axis: int) -> float:
        """Part of a merge delta shared by every pair of a side."""
        k_here = self._k[axis]
        k_other = self._k[1 - axis]
        before = k_here * k_other
        after = (k_here - 1) * k_other
        d_partition = float(self._log_b[axis][k_here - 1] - self._log_b[axis][k_here])
        d_grid = _log_choose(self.N + after - 1, after - 1) - _log_choose(
            self.N + before - 1, before - 1
        )
        return d_partition + d_grid

    def _pair_local_delta(self, axis: int, c1: int, c2: int) -> float:
        other_live = self._alive[1 - axis]
        Ka = self._K_axis(axis)
        r1 = Ka[c1][other_live]
        r2 = Ka[c2][other_live]
        cells_gain = float(
            (gammaln(r1 + r2 + 1.0) - gammaln(r1 + 1.0) - gammaln(r2 + 1.0)).sum()
        )
        tot = self._tot[axis]
        card = self._card[axis]
        t1, t2 = int(tot[c1]), int(tot[c2])
        a1, a2 = int(card[c1]), int(card[c2])
        d_alloc = _alloc(t1 + t2, a1 + a2) - _alloc(t1, a1) - _alloc(t2, a2)
        d_mult = _lgamma(t1 + t2 + 1) - _lgamma(t1 + 1) - _lgamma(t2 + 1)
        return d_alloc + d_mult - cells_gain

    def _local_deltas_vs(self, axis: int, c: int, candidates: np.ndarray) -> np.ndarray:
        other_live = self._alive[1 - axis]
        Ka = self._K_axis(axis)
        rc = Ka[c][other_live]
        R = Ka[candidates][:, other_live]
        cells_gain = (gammaln(R + rc + 1.0) - gammaln(R + 1.0)).sum(axis=1) - float(
            gammaln(rc + 1.0).sum()
        )
        tot = self._tot[axis].astype(float)
        card = self._card[axis].astype(float)
        T = tot[candidates]
        C = card[candidates]
        tc = float(tot[c])
        cc = float(card[c])
        d_alloc = _alloc_vec(T + tc, C + cc) - _alloc_vec(T, C) - _alloc(tc, cc)
        d_mult = gammaln(T + tc + 1.0) - gammaln(T + 1.0) - _lgamma(tc + 1)
        return d_alloc + d_mult - cells_gain

    def _apply_merge(self, axis: int, c1: int, c2: int, delta: float) -> int:
        keep, gone = (c1, c2) if c1 < c2 else (c2, c1)
        Ka = self._K_axis(axis)
        Ka[keep] += Ka[gone]
        Ka[gone] = 0
        self._tot[axis][keep] += self._tot[axis][gone]
        self._tot[axis][gone] = 0
        self._card[axis][keep] += self._card[axis][gone]
        self._card[axis][gone] = 0
        assign = self._assign[axis]
        assign[assign == gone] = keep
        self._alive[axis][gone] = False
        self._k[axis] -= 1
        self._version[axis][keep] += 1
        self._version[axis][gone] += 1
        self._cost += delta
        return keep

    # -- move machinery -----------------------------------------------------

    def _profile(self, axis: int, item: int) -> np.ndarray:
        """Item's traversal counts aggregated over the opposite side's slots."""
        raw = self.matrix.counts[item] if axis == 0 else self.matrix.counts[:, item]
        other_assign = self._assign[1 - axis]
        profile = np.zeros(other_assign.shape[0], dtype=np.int64)
        nz = np.nonzero(raw)[0]
        np.add.at(profile, other_assign[nz], raw[nz])
        return profile

    def _move_deltas(self, axis: int, item: int):
        """Deltas of moving one item to every other cluster and to a new singleton.

        Returns (targets, deltas, new_slot, new_delta); new_slot/new_delta are
        None when the item is already a singleton.
        """
        A = int(self._assign[axis][item])
        other_live = self._alive[1 - axis]
        profile = self._profile(axis, item)
        x = profile[other_live]
        t = int(self._item_tot[axis][item])
        tot = self._tot[axis]
        card = self._card[axis]
        Ka = self._K_axis(axis)
        T_A = int(tot[A])
        c_A = int(card[A])
        KA = Ka[A][other_live]
        rem_cells = float((gammaln(KA + 1.0) - gammaln(KA - x + 1.0)).sum())
        if c_A > 1:
            d_A = (
                _alloc(T_A - t, c_A - 1)
                - _alloc(T_A, c_A)
                + _lgamma(T_A - t + 1)
                - _lgamma(T_A + 1)
                + rem_cells
            )
        else:
            d_A = -_alloc(T_A, c_A) + _lgamma(1) - _lgamma(T_A + 1) + rem_cells

        k_here = self._k[axis]
        k_other = self._k[1 - axis]
        slots = np.nonzero(self._alive[axis])[0]
        targets = slots[slots != A]
        deltas = np.zeros(0, dtype=float)
        if targets.size:
            KB = Ka[targets][:, other_live]
            add_cells = (gammaln(KB + x + 1.0) - gammaln(KB + 1.0)).sum(axis=1)
            T_B = tot[targets].astype(float)
            C_B = card[targets].astype(float)
            d_B = (
                _alloc_vec(T_B + t, C_B + 1)
                - _alloc_vec(T_B, C_B)
                + gammaln(T_B + t + 1.0)
                - gammaln(T_B + 1.0)
                - add_cells
            )
            shift = 0.0
            if c_A == 1:
                before = k_here * k_other
                after = (k_here - 1) * k_other
                shift = float(self._log_b[axis][k_here - 1] - self._log_b[axis][k_here])
                shift += _log_choose(self.N + after - 1, after - 1) - _log_choose(
                    self.N + before - 1, before - 1
                )
            deltas = d_A + d_B + shift

        new_slot = None
        new_delta = None
        if c_A > 1:
            dead = np.nonzero(~self._alive[axis])[0]
            new_slot = int(dead[0])
            before = k_here * k_other
            after = (k_here + 1) * k_other
            shift_up = float(self._log_b[axis][k_here + 1] - self._log_b[axis][k_here])
            shift_up += _log_choose(self.N + after - 1, after - 1) - _log_choose(
                self.N + before - 1, before - 1
            )
            new_delta = (
                d_A
                + _lgamma(t + 1)
                - float(gammaln(x + 1.0).sum())
                + shift_up
            )
        return targets, deltas, new_slot, new_delta

    def _apply_move(self, axis: int, item: int, target: int, delta: float) -> None:
        A = int(self._assign[axis][item])
        profile = self._profile(axis, item)
        Ka = self._K_axis(axis)
        Ka[A] -= profile
        Ka[target] += profile
        t = int(self._item_tot[axis][item])
        self._tot[axis][A] -= t
        self._tot[axis][target] += t
        self._card[axis][A] -= 1
        if not self._alive[axis][target]:
            self._alive[axis][target] = True
            self._k[axis] += 1
        self._card[axis][target] += 1
        self._assign[axis][item] = target
        if self._card[axis][A] == 0:
            self._alive[axis][A] = False
            self._k[axis] -= 1
        self._version[axis][A] += 1
        self._version[axis][target] += 1
        self._cost += delta

    # -- export -------------------------------------------------------------

    def result(self) -> "CoClusterResult":
        order = []
        for axis in (0, 1):
            slots = np.nonzero(self._alive[axis])[0]
            first_member = [int(np.nonzero(self._assign[axis] == s)[0][0]) for s in slots]
            order.append([int(s) for _, s in sorted(zip(first_member, slots.tolist()))])
        rows, cols = order
        contingency = self._K[np.ix_(rows, cols)].copy()
        row_rank = {slot: i for i, slot in enumerate(rows)}
        col_rank = {slot: i for i, slot in enumerate(cols)}
        traj_partition = {
            int(tid): row_rank[int(self._assign[0][i])]
            for i, tid in enumerate(self.matrix.trajectory_ids)
        }
        seg_partition = {
            int(sid): col_rank[int(self._assign[1][j])]
            for j, sid in enumerate(self.matrix.segment_ids)
        }
        return CoClusterResult(
            trajectory_partition=traj_partition,
            segment_partition=seg_partition,
            k_trajectories=self._k[0],
            k_segments=self._k[1],
            contingency=contingency,
            cost=self._exact_cost(),
            terms=self._exact_terms(),
        )


@dataclass(frozen=True, eq=False)
class CoClusterResult:
    """Frozen snapshot of a co-clustering: partitions, counts, cost breakdown."""

    trajectory_partition: dict
    segment_partition: dict
    k_trajectories: int
    k_segments: int
    contingency: np.ndarray
    cost: float
    terms: dict

    def contingency_table(self) -> np.ndarray:
        return self.contingency


def _axis_of(side: str) -> int:
    try:
        return _AXIS[side]
    except KeyError:
        raise ValidationError(f"side must be 'trajectory' or 'segment', got {side!r}") from None


# ---------------------------------------------------------------------------
# Public operations


def finest_model(matrix: TraversalMatrix) -> CoClusterModel:
    """One trajectory and one segment per cluster."""
    return CoClusterModel(matrix, np.arange(matrix.n_trajectories), np.arange(matrix.n_segments))


def model_from_labels(matrix: TraversalMatrix, row_labels, col_labels) -> CoClusterModel:
    """Model with explicit cluster labels per row and per column."""
    return CoClusterModel(matrix, row_labels, col_labels)


def random_model(matrix: TraversalMatrix, rng: np.random.Generator) -> CoClusterModel:
    """Random start: per side, cluster count log-uniform in [1, n], uniform assignment."""
    labels = []
    for size in (matrix.n_trajectories, matrix.n_segments):
        k = int(math.ceil(math.exp(float(rng.random()) * math.log(size)))) if size > 1 else 1
        k = min(max(k, 1), size)
        labels.append(rng.integers(k, size=size))
    return CoClusterModel(matrix, labels[0], labels[1])


def cost(model: CoClusterModel) -> float:
    """Exact criterion value in nats; audits the incremental state first."""
    model.audit()
    exact = model._exact_cost()
    model._cost = exact
    return exact


def cost_terms(model: CoClusterModel) -> dict:
    """Per-term breakdown of the criterion (nats)."""
    return model._exact_terms()


def merge_delta(model: CoClusterModel, side: str, c1: int, c2: int) -> float:
    """Cost change of merging two clusters of one side, computed incrementally."""
    axis = _axis_of(side)
    model._require_live(axis, c1)
    model._require_live(axis, c2)
    if c1 == c2:
        raise ValidationError("cannot merge a cluster with itself")
    return model._pair_local_delta(axis, c1, c2) + model._merge_shift(axis)


def apply_merge(model: CoClusterModel, side: str, c1: int, c2: int) -> int:
    """Merge two clusters in place; returns the surviving cluster id."""
    delta = merge_delta(model, side, c1, c2)
    return model._apply_merge(_axis_of(side), c1, c2, delta)


def greedy(model: CoClusterModel) -> CoClusterModel:
    """Best-merge agglomeration while the best merge strictly improves cost.

    The input model is not modified. Ties go to the smallest
    (side, cluster, cluster) triple, trajectory side first.
    """
    work = model.copy()
    heaps: list[list] = [[], []]
    for axis in (0, 1):
        slots = np.nonzero(work._alive[axis])[0]
        version = work._version[axis]
        for idx, c in enumerate(slots.tolist()):
            cands = slots[idx + 1 :]
            if not cands.size:
                continue
            locals_ = work._local_deltas_vs(axis, c, cands)
            for cand, val in zip(cands.tolist(), locals_.tolist()):
                heaps[axis].append((val, c, cand, version[c], version[cand]))
        heapq.heapify(heaps[axis])

    def clean_top(axis: int):
        heap = heaps[axis]
        alive = work._alive[axis]
        version = work._version[axis]
        while heap:
            val, a, b, va, vb = heap[0]
            if not alive[a] or not alive[b] or version[a] != va or version[b] != vb:
                heapq.heappop(heap)
                continue
            return heap[0]
        return None

    def push_batch(axis: int, c: int) -> None:
        slots = np.nonzero(work._alive[axis])[0]
        cands = slots[slots != c]
        if not cands.size:
            return
        version = work._version[axis]
        locals_ = work._local_deltas_vs(axis, c, cands)
        for cand, val in zip(cands.tolist(), locals_.tolist()):
            a, b = (c, cand) if c < cand else (cand, c)
            heapq.heappush(heaps[axis], (val, a, b, version[a], version[b]))

    def sweep():
        """Exact deltas for every live pair; returns (best, entries)."""
        best = None
        entries = []
        for axis in (0, 1):
            if work._k[axis] < 2:
                continue
            shift = work._merge_shift(axis)
            slots = np.nonzero(work._alive[axis])[0]
            version = work._version[axis]
            for idx, c in enumerate(slots.tolist()):
                cands = slots[idx + 1 :]
                if not cands.size:
                    continue
                locals_ = work._local_deltas_vs(axis, c, cands)
                for cand, val in zip(cands.tolist(), locals_.tolist()):
                    entries.append((axis, (val, c, cand, version[c], version[cand])))
                    total = val + shift
                    key = (total, axis, c, cand)
                    if best is None or key < best[0]:
                        best = (key, axis, c, cand, val)
        return best, entries

    while True:
        tops = []
        for axis in (0, 1):
            if work._k[axis] < 2:
                continue
            top = clean_top(axis)
            if top is not None:
                total = top[0] + work._merge_shift(axis)
                tops.append((total, axis, top[1], top[2], top))
        if not tops:
            break
        total, axis, a, b, entry = min(tops)
        heapq.heappop(heaps[axis])
        exact_local = work._pair_local_delta(axis, a, b)
        if abs(exact_local - entry[0]) > _EPS_KEY:
            # Key drifted because the other side changed; re-certify.
            heapq.heappush(heaps[axis], (exact_local, a, b, entry[3], entry[4]))
            continue
        exact_total = exact_local + work._merge_shift(axis)
        if exact_total < -_EPS_IMPROVE:
            keep = work._apply_merge(axis, a, b, exact_total)
            push_batch(axis, keep)
            continue
        # Best candidate no longer improves; confirm with a full exact sweep
        # so stale keys can never terminate the search early.
        best, entries = sweep()
        if best is None or best[0][0] >= -_EPS_IMPROVE:
            break
        for ax, item in entries:
            heapq.heappush(heaps[ax], item)
        _, axis, a, b, val = best
        exact_total = val + work._merge_shift(axis)
        keep = work._apply_merge(axis, a, b, exact_total)
        push_batch(axis, keep)

    work._cost = work._exact_cost()
    return work


def post_optimize(
    model: CoClusterModel,
    rng: np.random.Generator | None = None,
    max_passes: int | None = None,
) -> CoClusterModel:
    """Single-element swap passes until a full pass makes no improving move.

    Every trajectory and segment may move to the cluster (or a fresh
    singleton) that lowers cost most; cost never increases. Pass order is
    shuffled by `rng` when given, otherwise items are visited in index order.
    """
    work = model.copy()
    items = [(0, i) for i in range(work.n)] + [(1, j) for j in range(work.m)]
    passes = 0
    while max_passes is None or passes < max_passes:
        if rng is not None:
            order = [items[int(p)] for p in rng.permutation(len(items))]
        else:
            order = items
        moved = False
        for axis, item in order:
            targets, deltas, new_slot, new_delta = work._move_deltas(axis, item)
            best_delta = None
            best_target = None
            if targets.size:
                idx = int(np.lexsort((targets, deltas))[0])
                best_delta = float(deltas[idx])
                best_target = int(targets[idx])
            if new_delta is not None and (
                best_delta is None
                or new_delta < best_delta - _EPS_KEY
                or (abs(new_delta - best_delta) <= _EPS_KEY and new_slot < best_target)
            ):
                best_delta = new_delta
                best_target = new_slot
            if best_delta is not None and best_delta < -_EPS_IMPROVE:
                work._apply_move(axis, item, best_target, best_delta)
                moved = True
        passes += 1
        if not moved:
            break
    work._cost = work._exact_cost()
    return work


def _vns_single(matrix: TraversalMatrix, seed: int, r: int) -> CoClusterModel:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(r,))))
    start = finest_model(matrix) if r == 0 else random_model(matrix, rng)
    return post_optimize(greedy(start), rng=rng)


def _vns_single_packed(args) -> tuple[float, int, "CoClusterModel"]:
    matrix, seed, r = args
    model = _vns_single(matrix, seed, r)
    return model.cached_cost, r, model


def vns_search(
    matrix: TraversalMatrix,
    restarts: int = 0,
    seed: int = 0,
    jobs: int = 1,
) -> CoClusterModel:
    """Multi-start search: greedy + swaps from the all-singleton model, then
    `restarts` more runs from random initial partitions; best cost wins.

    Deterministic for a given (seed, restarts); ties go to the earliest run.
    Runs are independent, so jobs > 1 parallelizes them without changing the
    result.
    """
    if restarts < 0:
        raise ValidationError("restarts must be >= 0")
    runs = range(restarts + 1)
    if jobs > 1 and restarts > 0:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_vns_single_packed, [(matrix, seed, r) for r in runs]))
    else:
        results = [_vns_single_packed((matrix, seed, r)) for r in runs]
    _, _, best = min(results, key=lambda entry: (entry[0], entry[1]))
    return best


# ---------------------------------------------------------------------------
# File interchange


def save_model(result: CoClusterResult, path, provenance: dict | None = None) -> None:
    traj_nodes = sorted(result.trajectory_partition)
    seg_nodes = sorted(result.segment_partition)
    payload = {
        "trajectory_partition": {
            "kind": "trajectory",
            "k": result.k_trajectories,
            "nodes": traj_nodes,
            "clusters": [result.trajectory_partition[v] for v in traj_nodes],
        },
        "segment_partition": {
            "kind": "segment",
            "k": result.k_segments,
            "nodes": seg_nodes,
            "clusters": [result.segment_partition[v] for v in seg_nodes],
        },
        "contingency": [[int(v) for v in row] for row in result.contingency],
        "cost": result.cost,
        "cost_terms": {key: float(val) for key, val in sorted(result.terms.items())},
    }
    if provenance is not None:
        payload["provenance"] = provenance
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> CoClusterResult:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        traj = payload["trajectory_partition"]
        seg = payload["segment_partition"]
        result = CoClusterResult(
            trajectory_partition={
                int(v): int(c) for v, c in zip(traj["nodes"], traj["clusters"])
            },
            segment_partition={
                int(v): int(c) for v, c in zip(seg["nodes"], seg["clusters"])
            },
            k_trajectories=int(traj["k"]),
            k_segments=int(seg["k"]),
            contingency=np.array(payload["contingency"], dtype=np.int64),
            cost=float(payload["cost"]),
            terms={key: float(val) for key, val in payload["cost_terms"].items()},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad co-cluster model file: {exc}", path=path) from None
    return result
