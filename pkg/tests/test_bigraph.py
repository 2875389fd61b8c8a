import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trajclust import bigraph, network
from trajclust.bigraph import (
    SimilarityGraph,
    TraversalMatrix,
    build_traversal_matrix,
    load_matrix,
    load_similarity,
    project_segments,
    project_trajectories,
    save_matrix,
    save_similarity,
    segment_contribution,
    trajectory_relevance,
)
from trajclust.errors import ValidationError
from trajclust.generator import Trajectory, TrajectoryDataset


def _dataset(paths):
    return TrajectoryDataset(
        tuple(Trajectory(i, None, tuple(p)) for i, p in enumerate(paths))
    )


def _line_net(segment_lengths):
    """Chain network with one directed segment per given (id, length)."""
    vertices = [(i, float(i), 0.0) for i in range(len(segment_lengths) + 1)]
    segments = [
        (sid, i, i + 1, length, 50.0)
        for i, (sid, length) in enumerate(segment_lengths)
    ]
    return network.RoadNetwork(vertices, segments)


def test_build_matrix_counts_repeated_visits():
    ds = _dataset([[1, 2, 1]])
    m = build_traversal_matrix(ds)
    assert m.trajectory_ids == (0,)
    assert m.segment_ids == (1, 2)
    assert m.count(0, 1) == 2
    assert m.count(0, 2) == 1
    assert m.total == 3


def test_build_matrix_five_trajectories_eight_segments():
    paths = [[0, 1, 2], [1, 2, 3], [3, 4], [5, 6], [6, 7, 0]]
    ds = _dataset(paths)
    m = build_traversal_matrix(ds)
    assert m.counts.shape == (5, 8)
    for i, p in enumerate(paths):
        for sid in m.segment_ids:
            assert (m.count(i, sid) > 0) == (sid in p)


def test_build_matrix_rejects_empty_dataset():
    with pytest.raises(ValidationError):
        build_traversal_matrix(TrajectoryDataset())


def test_matrix_columns_restricted_to_visited_segments():
    ds = _dataset([[10], [12]])
    m = build_traversal_matrix(ds)
    assert m.segment_ids == (10, 12)
    assert (m.counts.sum(axis=0) > 0).all()
    assert (m.counts.sum(axis=1) > 0).all()


# -- per-entry weights ---------------------------------------------------------


def test_segment_contribution_two_trajectory_example():
    # T1 = [s1 (100 m), s2 (50 m)], T2 = [s2]; w(s1, T1) = (100/150) ln 2.
    net = _line_net([(1, 100.0), (2, 50.0)])
    ds = TrajectoryDataset((Trajectory(0, None, (1, 2)), Trajectory(1, None, (2,))))
    m = build_traversal_matrix(ds)
    expected = (100.0 / 150.0) * math.log(2.0)
    assert segment_contribution(m, net, 1, 0) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.4621, abs=5e-5)


def test_segment_contribution_universal_segment_is_zero():
    net = _line_net([(1, 100.0), (2, 50.0)])
    ds = TrajectoryDataset((Trajectory(0, None, (1, 2)), Trajectory(1, None, (1,))))
    m = build_traversal_matrix(ds)
    assert segment_contribution(m, net, 1, 0) == 0.0
    assert segment_contribution(m, net, 1, 1) == 0.0


def test_segment_contribution_single_trajectory_idf_zero():
    net = _line_net([(1, 100.0)])
    ds = _dataset([[1]])
    m = build_traversal_matrix(ds)
    assert segment_contribution(m, net, 1, 0) == 0.0


def test_segment_contribution_requires_visit_and_network_length():
    net = _line_net([(1, 100.0), (2, 50.0)])
    ds = TrajectoryDataset((Trajectory(0, None, (1,)), Trajectory(1, None, (2,))))
    m = build_traversal_matrix(ds)
    with pytest.raises(ValidationError):
        segment_contribution(m, net, 2, 0)
    tiny = _line_net([(1, 100.0)])
    with pytest.raises(ValidationError):
        segment_contribution(m, tiny, 2, 1)


def test_trajectory_relevance_examples():
    # T visits every segment -> 0.
    ds = _dataset([[0, 1], [1]])
    m = build_traversal_matrix(ds)
    assert trajectory_relevance(m, 0, 0) == 0.0
    # s visited once by T only; T visits 2 of 8 segments -> 1 * ln 4.
    paths = [[0, 1], [1, 2, 3], [3, 4, 5], [5, 6, 7]]
    m = build_traversal_matrix(_dataset(paths))
    assert m.n_segments == 8
    assert trajectory_relevance(m, 0, 0) == pytest.approx(math.log(4.0), abs=1e-12)
    # two trajectories visit s once each; T visits 1 of 2 segments -> 0.5 ln 2.
    m = build_traversal_matrix(_dataset([[0], [0, 1]]))
    assert trajectory_relevance(m, 0, 0) == pytest.approx(0.5 * math.log(2.0), abs=1e-12)
    assert 0.5 * math.log(2.0) == pytest.approx(0.3466, abs=5e-5)


def test_trajectory_relevance_requires_visit():
    m = build_traversal_matrix(_dataset([[0], [1]]))
    with pytest.raises(ValidationError):
        trajectory_relevance(m, 0, 1)


@st.composite
def count_matrices(draw):
    n = draw(st.integers(min_value=1, max_value=5))
    m = draw(st.integers(min_value=1, max_value=6))
    counts = np.array(
        draw(
            st.lists(
                st.lists(st.integers(min_value=0, max_value=3), min_size=m, max_size=m),
                min_size=n,
                max_size=n,
            )
        ),
        dtype=np.int64,
    )
    counts[np.arange(n), draw(st.integers(0, m - 1))] += 1  # no empty rows
    for j in range(m):
        if counts[:, j].sum() == 0:
            counts[draw(st.integers(0, n - 1)), j] += 1
    lengths = draw(
        st.lists(
            st.sampled_from([25.0, 50.0, 100.0, 250.0]), min_size=m, max_size=m
        )
    )
    return counts, lengths


def _matrix_and_net(counts, lengths):
    n, m = counts.shape
    matrix = TraversalMatrix(tuple(range(n)), tuple(range(m)), counts)
    vertices = [(i, float(i), 0.0) for i in range(m + 1)]
    segments = [(j, j, j + 1, lengths[j], 50.0) for j in range(m)]
    return matrix, network.RoadNetwork(vertices, segments)


@given(count_matrices())
@settings(max_examples=50, deadline=None)
def test_contribution_length_share_sums_to_one(case):
    counts, lengths = case
    matrix, net = _matrix_and_net(counts, lengths)
    n = matrix.n_trajectories
    visitors = (counts > 0).sum(axis=0)
    for i in range(n):
        share_sum = 0.0
        for j in np.nonzero(counts[i])[0]:
            idf = math.log(n / visitors[j])
            w = segment_contribution(matrix, net, int(matrix.segment_ids[j]), i)
            share = (
                counts[i, j] * lengths[j] / float((counts[i] * np.array(lengths)).sum())
            )
            if idf > 0:
                assert w / idf == pytest.approx(share, abs=1e-12)
            else:
                assert w == 0.0
            share_sum += share
        assert share_sum == pytest.approx(1.0, abs=1e-12)


# -- projections ---------------------------------------------------------------


def _dense_trajectory_cosine(counts, lengths):
    """Independent dense evaluation of the contribution-vector cosines."""
    counts = np.asarray(counts, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    n = counts.shape[0]
    weighted = counts * lengths
    tf = weighted / weighted.sum(axis=1, keepdims=True)
    idf = np.log(n / (counts > 0).sum(axis=0))
    w = tf * idf
    sims = {}
    for i in range(n):
        for j in range(i + 1, n):
            denom = np.linalg.norm(w[i]) * np.linalg.norm(w[j])
            if denom > 0:
                sims[(i, j)] = float(w[i] @ w[j] / denom)
    return sims


def _dense_segment_cosine(counts):
    counts = np.asarray(counts, dtype=float)
    m = counts.shape[1]
    share = counts / counts.sum(axis=0, keepdims=True)
    rarity = np.log(m / (counts > 0).sum(axis=1))
    w = (share * rarity[:, None]).T  # segment rows
    sims = {}
    for i in range(m):
        for j in range(i + 1, m):
            denom = np.linalg.norm(w[i]) * np.linalg.norm(w[j])
            if denom > 0:
                sims[(i, j)] = float(w[i] @ w[j] / denom)
    return sims


def test_project_trajectories_three_trajectory_toy():
    # T1=[a,b], T2=[b,c], T3=[c] with distinct lengths.
    counts = np.array([[1, 1, 0], [0, 1, 1], [0, 0, 1]], dtype=np.int64)
    lengths = [100.0, 50.0, 200.0]
    matrix, net = _matrix_and_net(counts, lengths)
    graph = project_trajectories(matrix, net)
    expected = _dense_trajectory_cosine(counts, lengths)
    assert graph.kind == "trajectory"
    assert not graph.has_edge(0, 0) if graph.n_edges else True
    got = {(a, b): w for a, b, w in graph.edges()}
    kept = {pair: w for pair, w in expected.items() if w > 0}
    assert set(got) == set(kept)
    for pair, w in kept.items():
        assert got[pair] == pytest.approx(w, abs=1e-12)
    assert (0, 2) not in got  # disjoint segment sets -> no edge


def test_project_segments_three_trajectory_toy():
    counts = np.array([[1, 1, 0], [0, 1, 1], [0, 0, 1]], dtype=np.int64)
    matrix, _ = _matrix_and_net(counts, [100.0, 50.0, 200.0])
    graph = project_segments(matrix)
    expected = _dense_segment_cosine(counts)
    got = {(a, b): w for a, b, w in graph.edges()}
    kept = {pair: w for pair, w in expected.items() if w > 0}
    assert graph.kind == "segment"
    assert set(got) == set(kept)
    for pair, w in kept.items():
        assert got[pair] == pytest.approx(w, abs=1e-12)


def test_projection_warns_on_zero_vectors():
    # A single trajectory makes every rarity factor ln(1) = 0.
    counts = np.array([[1, 1]], dtype=np.int64)
    matrix, net = _matrix_and_net(counts, [100.0, 50.0])
    with pytest.warns(UserWarning, match="all-zero"):
        graph = project_trajectories(matrix, net)
    assert graph.n_edges == 0


@given(count_matrices())
@settings(max_examples=50, deadline=None)
def test_projection_symmetry_range_and_shared_segment(case):
    counts, lengths = case
    matrix, net = _matrix_and_net(counts, lengths)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        graph = project_trajectories(matrix, net)
    for a, b, w in graph.edges():
        assert 0.0 < w <= 1.0 + 1e-12
        assert graph.weight(b, a) == w
        ia, ib = matrix.row_index(a), matrix.row_index(b)
        assert (np.minimum(counts[ia], counts[ib]) > 0).any()


@given(count_matrices(), st.sampled_from([0.5, 3.0, 7.25]))
@settings(max_examples=40, deadline=None)
def test_projection_scale_invariance(case, factor):
    counts, lengths = case
    matrix, net = _matrix_and_net(counts, lengths)
    matrix2, net2 = _matrix_and_net(counts, [length * factor for length in lengths])
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g1 = project_trajectories(matrix, net)
        g2 = project_trajectories(matrix2, net2)
    e1 = {(a, b): w for a, b, w in g1.edges()}
    e2 = {(a, b): w for a, b, w in g2.edges()}
    assert set(e1) == set(e2)
    for pair, w in e1.items():
        assert e2[pair] == pytest.approx(w, abs=1e-12)


# -- graph container and file interchange --------------------------------------


def test_similarity_graph_validation():
    with pytest.raises(ValidationError, match="self-loop"):
        SimilarityGraph("trajectory", (0, 1), {(0, 0): 0.5})
    with pytest.raises(ValidationError, match="unknown node"):
        SimilarityGraph("trajectory", (0, 1), {(0, 2): 0.5})
    with pytest.raises(ValidationError, match="non-positive"):
        SimilarityGraph("trajectory", (0, 1), {(0, 1): 0.0})
    with pytest.raises(ValidationError, match="node kind"):
        SimilarityGraph("vehicle", (0,), {})
    graph = SimilarityGraph("segment", (3, 1, 2), {(3, 1): 0.25, (1, 2): 1.0})
    assert graph.weighted_degree(1) == pytest.approx(1.25)
    assert graph.total_weight == pytest.approx(1.25)


def test_matrix_roundtrip(tmp_path):
    counts = np.array([[2, 0, 1], [0, 3, 1]], dtype=np.int64)
    matrix = TraversalMatrix((7, 9), (100, 200, 300), counts)
    path = tmp_path / "matrix.json"
    save_matrix(matrix, path, provenance={"command": "test"})
    loaded = load_matrix(path)
    assert loaded.trajectory_ids == matrix.trajectory_ids
    assert loaded.segment_ids == matrix.segment_ids
    assert np.array_equal(loaded.counts, matrix.counts)


def test_similarity_roundtrip(tmp_path):
    graph = SimilarityGraph("trajectory", (0, 1, 2), {(0, 1): 0.25, (1, 2): 0.75})
    csv_path = tmp_path / "sim.csv"
    save_similarity(graph, csv_path)
    loaded = load_similarity(csv_path)
    assert loaded.kind == "trajectory"
    assert loaded.nodes == graph.nodes
    assert list(loaded.edges()) == list(graph.edges())
