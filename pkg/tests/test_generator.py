import pytest

from trajclust import generator, network
from trajclust.data import synthetic_network_path
from trajclust.errors import GenerationError, ParseError, ValidationError
from trajclust.generator import (
    GeneratorConfig,
    Trajectory,
    TrajectoryDataset,
    generate,
    load_dataset,
    save_dataset,
)
from trajclust.network import build_grid, load_network, shortest_path


@pytest.fixture(scope="module")
def city():
    return load_network(synthetic_network_path())


def _grid_net(n=5, spacing=100.0):
    """Small n x n bidirectional street grid."""
    vertices = [(r * n + c, c * spacing, r * spacing) for r in range(n) for c in range(n)]
    segments = []
    sid = 0
    for r in range(n):
        for c in range(n):
            a = r * n + c
            if c + 1 < n:
                b = a + 1
                segments += [(sid, a, b, spacing, 50.0), (sid + 1, b, a, spacing, 50.0)]
                sid += 2
            if r + 1 < n:
                b = a + n
                segments += [(sid, a, b, spacing, 50.0), (sid + 1, b, a, spacing, 50.0)]
                sid += 2
    return network.RoadNetwork(vertices, segments)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(classes=0, min_size=1, max_size=1, seed=0),
        dict(classes=1, min_size=0, max_size=1, seed=0),
        dict(classes=1, min_size=3, max_size=2, seed=0),
        dict(classes=1, min_size=1, max_size=1, seed=0, rows=0, cols=5),
        dict(classes=3, min_size=1, max_size=1, seed=0, rows=1, cols=1),
        dict(classes=1, min_size=1, max_size=1, seed=0, max_attempts=0),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValidationError):
        GeneratorConfig(**kwargs)


def test_degenerate_single_trajectory():
    net = _grid_net(4)
    cfg = GeneratorConfig(classes=1, min_size=1, max_size=1, seed=3, rows=2, cols=2)
    ds = generate(net, cfg)
    assert len(ds) == 1
    assert ds.trajectories[0].label == "1"
    assert len(ds.trajectories[0].segments) >= 1


def test_same_seed_identical_different_seed_differs():
    net = _grid_net(6)
    cfg = GeneratorConfig(classes=3, min_size=2, max_size=5, seed=11, rows=3, cols=3)
    a = generate(net, cfg)
    b = generate(net, cfg)
    assert a == b
    c = generate(net, GeneratorConfig(classes=3, min_size=2, max_size=5, seed=12, rows=3, cols=3))
    assert a != c


def test_adding_a_class_preserves_earlier_draws():
    net = _grid_net(6)
    base = dict(min_size=2, max_size=5, seed=11, rows=3, cols=3)
    three = generate(net, GeneratorConfig(classes=3, **base))
    four = generate(net, GeneratorConfig(classes=4, **base))
    kept = tuple(t for t in four.trajectories if t.label in ("1", "2", "3"))
    renumbered = tuple(
        Trajectory(i, t.label, t.segments) for i, t in enumerate(three.trajectories)
    )
    assert kept == renumbered


def test_class_structure_and_zone_contract():
    net = _grid_net(6)
    cfg = GeneratorConfig(classes=4, min_size=3, max_size=7, seed=5, rows=3, cols=3)
    ds = generate(net, cfg)
    grid = build_grid(net, cfg.rows, cfg.cols)
    cell_of = {}
    for idx, cell in enumerate(grid.cells):
        for v in cell:
            cell_of[v] = idx
    by_class = {}
    for t in ds.trajectories:
        by_class.setdefault(t.label, []).append(t)
    assert set(by_class) == {"1", "2", "3", "4"}
    for label, members in by_class.items():
        assert cfg.min_size <= len(members) <= cfg.max_size
        departures = {cell_of[net.segment(t.segments[0]).source] for t in members}
        arrivals = {cell_of[net.segment(t.segments[-1]).target] for t in members}
        assert len(departures) == 1 and len(arrivals) == 1
        assert departures != arrivals
    # ids are sequential in class order
    assert [t.id for t in ds.trajectories] == list(range(len(ds)))
    labels = [t.label for t in ds.trajectories]
    assert labels == sorted(labels, key=int)


def test_every_trajectory_is_a_shortest_path():
    net = _grid_net(6)
    cfg = GeneratorConfig(classes=3, min_size=2, max_size=4, seed=9, rows=3, cols=3)
    ds = generate(net, cfg)
    for t in ds.trajectories:
        start = net.segment(t.segments[0]).source
        end = net.segment(t.segments[-1]).target
        best = shortest_path(net, start, end)
        assert net.path_travel_time(t.segments) == pytest.approx(
            net.path_travel_time(best), abs=1e-12
        )
        for a, b in zip(t.segments, t.segments[1:]):
            assert net.segment(a).target == net.segment(b).source


def test_generate_paper_scale_class_sizes(city):
    # Frozen seed whose per-class size draws are 14, 19, 20, 20, 12 (sum 85).
    cfg = GeneratorConfig(classes=5, min_size=12, max_size=20, seed=62591, rows=12, cols=12)
    ds = generate(city, cfg)
    assert len(ds) == 85
    assert ds.class_sizes() == {"1": 14, "2": 19, "3": 20, "4": 20, "5": 12}


def test_generate_exhaustion_errors():
    # One vertex only: a single non-empty zone can never pair with another.
    net = network.RoadNetwork([(0, 0.0, 0.0)], [])
    cfg = GeneratorConfig(classes=1, min_size=1, max_size=1, seed=0, rows=2, cols=2)
    with pytest.raises(GenerationError):
        generate(net, cfg)
    # Two mutually unreachable vertices: zone pair exists but no path.
    net2 = network.RoadNetwork([(0, 0.0, 0.0), (1, 100.0, 0.0)], [])
    cfg2 = GeneratorConfig(classes=1, min_size=1, max_size=1, seed=0, rows=1, cols=2, max_attempts=5)
    with pytest.raises(GenerationError, match="no reachable vertex pair"):
        generate(net2, cfg2)


# -- dataset file round trips -------------------------------------------------


def test_save_load_roundtrip_empty(tmp_path):
    path = tmp_path / "empty.csv"
    save_dataset(TrajectoryDataset(), path)
    assert path.read_text() == "trajectory_id,class,segments\n"
    assert load_dataset(path) == TrajectoryDataset()


def test_save_load_roundtrip_generated(tmp_path):
    net = _grid_net(6)
    ds = generate(net, GeneratorConfig(classes=3, min_size=2, max_size=5, seed=2, rows=3, cols=3))
    path = tmp_path / "ds.csv"
    save_dataset(ds, path)
    assert load_dataset(path) == ds
    assert load_dataset(path, net) == ds  # with validation enabled


def test_load_unlabeled_roundtrip(tmp_path):
    ds = TrajectoryDataset((Trajectory(0, None, (1, 2)), Trajectory(1, "7", (2,))))
    path = tmp_path / "mixed.csv"
    save_dataset(ds, path)
    assert load_dataset(path) == ds


@pytest.mark.parametrize(
    "body, lineno, match",
    [
        ("wrong,header,here\n", 1, "header"),
        ("trajectory_id,class,segments\n0,1\n", 2, "3 comma-separated"),
        ("trajectory_id,class,segments\n0,1,\n", 2, "empty segment"),
        ("trajectory_id,class,segments\nzero,1,2;3\n", 2, "trajectory id"),
        ("trajectory_id,class,segments\n0,1,2;x\n", 2, "segment id"),
        ("trajectory_id,class,segments\n0,1,2\n0,2,3\n", 3, "duplicate"),
    ],
)
def test_load_dataset_parse_errors(tmp_path, body, lineno, match):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(ParseError, match=match) as err:
        load_dataset(path)
    assert err.value.line == lineno


def test_load_dataset_validates_against_network(tmp_path):
    net = _grid_net(3)
    path = tmp_path / "bad.csv"
    path.write_text("trajectory_id,class,segments\n0,1,99999\n")
    with pytest.raises(ParseError, match="99999"):
        load_dataset(path, net)
    # connected in ids but not head-to-tail
    seg_ids = sorted(net.segment_ids())
    a = seg_ids[0]
    b = next(s for s in seg_ids if net.segment(s).source != net.segment(a).target)
    path.write_text(f"trajectory_id,class,segments\n0,1,{a};{b}\n")
    with pytest.raises(ParseError, match="head to tail"):
        load_dataset(path, net)
