"""Labeled synthetic trajectory datasets drawn from zone-grid endpoints.

Each class picks a departure zone and a distinct arrival zone on a grid laid
over the network's bounding box; every trajectory of the class is the
travel-time shortest path between a uniformly drawn departure vertex and
arrival vertex. Classes may share zones, which is what produces the
interactions (shared corridors, inverted flows) the clustering stages are
meant to expose.

Randomness discipline: one 64-bit seed; class i draws from the PCG64
substream SeedSequence(seed, spawn_key=(i,)), so adding classes never
perturbs the draws of earlier ones. Within a class the draw order is fixed:
size first, then the zone pair, then vertex pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GenerationError, ParseError, ValidationError
from .network import RoadNetwork, build_grid, shortest_path

DATASET_HEADER = "trajectory_id,class,segments"


@dataclass(frozen=True)
class GeneratorConfig:
    classes: int
    min_size: int
    max_size: int
    seed: int
    rows: int = 10
    cols: int = 10
    max_attempts: int = 100

    def __post_init__(self):
        if self.classes < 1:
            raise ValidationError("classes must be >= 1")
        if self.min_size < 1:
            raise ValidationError("min_size must be >= 1")
        if self.min_size > self.max_size:
            raise ValidationError("min_size must be <= max_size")
        if self.rows < 1 or self.cols < 1:
            raise ValidationError("grid dimensions must be >= 1")
        cells = self.rows * self.cols
        if self.classes > cells * (cells - 1):
            raise ValidationError(
                f"{self.classes} classes exceed the {cells * (cells - 1)} distinct zone pairs"
            )
        if self.max_attempts < 1:
            raise ValidationError("max_attempts must be >= 1")


@dataclass(frozen=True)
class Trajectory:
    id: int
    label: str | None
    segments: tuple[int, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValidationError(f"trajectory {self.id} has an empty segment sequence")


@dataclass(frozen=True)
class TrajectoryDataset:
    trajectories: tuple[Trajectory, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.trajectories)

    def labels(self) -> dict[int, str | None]:
        return {t.id: t.label for t in self.trajectories}

    def class_sizes(self) -> dict[str, int]:
        sizes: dict[str, int] = {}
        for t in self.trajectories:
            if t.label is not None:
                sizes[t.label] = sizes.get(t.label, 0) + 1
        return sizes


def _class_rng(seed: int, class_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(class_index,))))


def generate(net: RoadNetwork, cfg: GeneratorConfig) -> TrajectoryDataset:
    """Generate a labeled dataset; identical seeds give identical datasets.

    Raises GenerationError when zone sampling cannot find two distinct
    non-empty zones, or when a zone pair keeps producing unreachable vertex
    pairs for max_attempts draws.
    """
    if net.n_vertices == 0:
        raise ValidationError("cannot generate trajectories on an empty network")
    grid = build_grid(net, cfg.rows, cfg.cols)
    nonempty = grid.nonempty_cells()
    if len(nonempty) < 2:
        raise GenerationError(
            "zone sampling needs at least two non-empty zones; "
            f"grid {cfg.rows}x{cfg.cols} has {len(nonempty)}"
        )
    trajectories: list[Trajectory] = []
    next_id = 0
    for class_index in range(cfg.classes):
        rng = _class_rng(cfg.seed, class_index)
        label = str(class_index + 1)
        size = int(rng.integers(cfg.min_size, cfg.max_size + 1))
        departure, arrival = _draw_zone_pair(grid, rng, cfg.max_attempts)
        for _ in range(size):
            path = _draw_path(net, grid, departure, arrival, rng, cfg.max_attempts)
            trajectories.append(Trajectory(next_id, label, tuple(path)))
            next_id += 1
    return TrajectoryDataset(tuple(trajectories))


def _draw_zone_pair(grid, rng, max_attempts: int) -> tuple[int, int]:
    n_cells = grid.n_cells
    for _ in range(max_attempts):
        departure = int(rng.integers(n_cells))
        arrival = int(rng.integers(n_cells))
        if departure == arrival:
            continue
        if grid.cells[departure] and grid.cells[arrival]:
            return departure, arrival
    raise GenerationError(
        f"zone resampling exhausted after {max_attempts} attempts; "
        "too many empty grid cells"
    )


def _draw_path(net, grid, departure: int, arrival: int, rng, max_attempts: int) -> list[int]:
    dep_cell = grid.cells[departure]
    arr_cell = grid.cells[arrival]
    for _ in range(max_attempts):
        dep_vertex = dep_cell[int(rng.integers(len(dep_cell)))]
        arr_vertex = arr_cell[int(rng.integers(len(arr_cell)))]
        path = shortest_path(net, dep_vertex, arr_vertex)
        if path:
            return path
    raise GenerationError(
        f"no reachable vertex pair between zones {departure} and {arrival} "
        f"after {max_attempts} attempts"
    )


def save_dataset(ds: TrajectoryDataset, path) -> None:
    """Write the dataset CSV: one `id,class,seg;seg;...` line per trajectory."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(DATASET_HEADER + "\n")
        for t in ds.trajectories:
            label = t.label if t.label is not None else "-"
            fh.write(f"{t.id},{label},{';'.join(str(s) for s in t.segments)}\n")


def load_dataset(path, net: RoadNetwork | None = None) -> TrajectoryDataset:
    """Read a dataset CSV back; load_dataset(save_dataset(ds)) == ds.

    When a network is supplied, every segment id must exist in it and
    consecutive segments must be connected head to tail.
    """
    trajectories: list[Trajectory] = []
    seen_ids: set[int] = set()
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != DATASET_HEADER:
        raise ParseError(f"expected header {DATASET_HEADER!r}", path=path, line=1)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError("expected 3 comma-separated fields", path=path, line=lineno)
        raw_id, raw_label, raw_segments = parts
        try:
            traj_id = int(raw_id)
        except ValueError:
            raise ParseError(f"bad trajectory id {raw_id!r}", path=path, line=lineno) from None
        if traj_id in seen_ids:
            raise ParseError(f"duplicate trajectory id {traj_id}", path=path, line=lineno)
        seen_ids.add(traj_id)
        label = None if raw_label == "-" else raw_label
        try:
            segments = tuple(int(tok) for tok in raw_segments.split(";") if tok != "")
        except ValueError:
            raise ParseError("bad segment id list", path=path, line=lineno) from None
        if not segments:
            raise ParseError("empty segment sequence", path=path, line=lineno)
        if net is not None:
            _validate_path(net, segments, path, lineno)
        trajectories.append(Trajectory(traj_id, label, segments))
    return TrajectoryDataset(tuple(trajectories))


def _validate_path(net, segments, path, lineno):
    for sid in segments:
        if not net.has_segment(sid):
            raise ParseError(f"segment id {sid} not in network", path=path, line=lineno)
    for a, b in zip(segments, segments[1:]):
        if net.segment(a).target != net.segment(b).source:
            raise ParseError(
                f"segments {a} and {b} are not connected head to tail",
                path=path,
                line=lineno,
            )
