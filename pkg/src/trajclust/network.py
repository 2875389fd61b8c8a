"""Directed road network: loading, validation, routing, and zone grids.

The network text format is line oriented. ``#`` starts a comment (full line
or trailing), blank lines are skipped, and the two record kinds are::

    N <vertex-id> <x> <y>
    E <segment-id> <from-id> <to-id> <length> <speed>

Ids are non-negative integers, lengths are meters, speeds are km/h.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class Segment:
    """Directed road segment with physical length (m) and speed limit (km/h)."""

    id: int
    source: int
    target: int
    length: float
    speed: float

    @property
    def travel_time(self) -> float:
        """Traversal cost used for routing: length / speed."""
        return self.length / self.speed


class RoadNetwork:
    """Immutable directed geometric graph of intersections and road segments.

    Safe for concurrent reads once constructed. Vertices are (x, y) points in
    an arbitrary planar coordinate system; all geometry is planar.
    """

    def __init__(self, vertices, segments):
        coords: dict[int, tuple[float, float]] = {}
        for vid, x, y in vertices:
            vid = int(vid)
            if vid < 0:
                raise ValidationError(f"vertex id {vid} is negative")
            if vid in coords:
                raise ValidationError(f"duplicate vertex id {vid}")
            coords[vid] = (float(x), float(y))
        segs: dict[int, Segment] = {}
        outgoing: dict[int, list[Segment]] = {vid: [] for vid in coords}
        for sid, src, dst, length, speed in segments:
            sid, src, dst = int(sid), int(src), int(dst)
            if sid < 0:
                raise ValidationError(f"segment id {sid} is negative")
            if sid in segs:
                raise ValidationError(f"duplicate segment id {sid}")
            if src not in coords:
                raise ValidationError(f"segment {sid} starts at unknown vertex {src}")
            if dst not in coords:
                raise ValidationError(f"segment {sid} ends at unknown vertex {dst}")
            length = float(length)
            speed = float(speed)
            if not length > 0:
                raise ValidationError(f"segment {sid} has non-positive length {length}")
            if not speed > 0:
                raise ValidationError(f"segment {sid} has non-positive speed {speed}")
            seg = Segment(sid, src, dst, length, speed)
            segs[sid] = seg
            outgoing[src].append(seg)
        for lst in outgoing.values():
            lst.sort(key=lambda s: s.id)
        self._coords = coords
        self._segments = segs
        self._outgoing = {vid: tuple(lst) for vid, lst in outgoing.items()}

    @property
    def n_vertices(self) -> int:
        return len(self._coords)

    @property
    def n_segments(self) -> int:
        return len(self._segments)

    def vertex_ids(self) -> list[int]:
        return sorted(self._coords)

    def segment_ids(self) -> list[int]:
        return sorted(self._segments)

    def has_vertex(self, vid: int) -> bool:
        return vid in self._coords

    def has_segment(self, sid: int) -> bool:
        return sid in self._segments

    def coordinates(self, vid: int) -> tuple[float, float]:
        try:
            return self._coords[vid]
        except KeyError:
            raise ValidationError(f"unknown vertex id {vid}") from None

    def segment(self, sid: int) -> Segment:
        try:
            return self._segments[sid]
        except KeyError:
            raise ValidationError(f"unknown segment id {sid}") from None

    def outgoing(self, vid: int) -> tuple[Segment, ...]:
        try:
            return self._outgoing[vid]
        except KeyError:
            raise ValidationError(f"unknown vertex id {vid}") from None

    def bounding_box(self) -> tuple[float, float, float, float]:
        """(min_x, min_y, max_x, max_y) over all vertices."""
        if not self._coords:
            raise ValidationError("network has no vertices")
        xs = [c[0] for c in self._coords.values()]
        ys = [c[1] for c in self._coords.values()]
        return min(xs), min(ys), max(xs), max(ys)

    def path_travel_time(self, segment_ids) -> float:
        return sum(self.segment(sid).travel_time for sid in segment_ids)


def load_network(path) -> RoadNetwork:
    """Parse and validate a network text file.

    Raises ParseError (with line number) for malformed records and
    ValidationError for semantic problems such as dangling endpoints.
    """
    vertices = []
    segments = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            kind = fields[0]
            try:
                if kind == "N":
                    if len(fields) != 4:
                        raise ValueError("expected: N <id> <x> <y>")
                    vertices.append((int(fields[1]), float(fields[2]), float(fields[3])))
                elif kind == "E":
                    if len(fields) != 6:
                        raise ValueError("expected: E <id> <from> <to> <length> <speed>")
                    segments.append(
                        (
                            int(fields[1]),
                            int(fields[2]),
                            int(fields[3]),
                            float(fields[4]),
                            float(fields[5]),
                        )
                    )
                else:
                    raise ValueError(f"unknown record kind {kind!r}")
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from None
    return RoadNetwork(vertices, segments)


def save_network(net: RoadNetwork, path) -> None:
    """Write a network back out in the text format accepted by load_network."""
    with open(path, "w", encoding="utf-8") as fh:
        for vid in net.vertex_ids():
            x, y = net.coordinates(vid)
            fh.write(f"N {vid} {x!r} {y!r}\n")
        for sid in net.segment_ids():
            seg = net.segment(sid)
            fh.write(f"E {sid} {seg.source} {seg.target} {seg.length!r} {seg.speed!r}\n")


def shortest_path(net: RoadNetwork, source: int, target: int) -> list[int] | None:
    """Minimum-travel-time directed path as a list of segment ids.

    Returns None when the target is unreachable and [] when source == target.
    Equal-cost ties resolve to the lexicographically smallest segment-id
    sequence, which makes the result deterministic.
    """
    for vid in (source, target):
        if not net.has_vertex(vid):
            raise ValidationError(f"unknown vertex id {vid}")
    if source == target:
        return []
    # Heap entries are (cost, segment-id path, vertex); tuple comparison on
    # ties yields exactly the lexicographic tie-break. With strictly positive
    # travel times, equal-cost paths to a vertex can never be prefixes of one
    # another, so the ordering is preserved under extension.
    heap: list[tuple[float, tuple[int, ...], int]] = [(0.0, (), source)]
    done: set[int] = set()
    while heap:
        cost, path, vid = heapq.heappop(heap)
        if vid == target:
            return list(path)
        if vid in done:
            continue
        done.add(vid)
        for seg in net.outgoing(vid):
            if seg.target not in done:
                heapq.heappush(heap, (cost + seg.travel_time, path + (seg.id,), seg.target))
    return None


@dataclass(frozen=True)
class ZoneGrid:
    """Partition of a network's vertices into rows x cols rectangular cells.

    Cells are indexed row-major: cell id = row * cols + col. The bounding box
    is the minimum bounding rectangle of all vertices; vertices that sit
    exactly on an interior cell border belong to the lower-index cell.
    """

    rows: int
    cols: int
    min_x: float
    min_y: float
    max_x: float
    max_y: float
    cells: tuple[tuple[int, ...], ...]

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    def cell(self, row: int, col: int) -> tuple[int, ...]:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise ValidationError(f"cell ({row}, {col}) out of range")
        return self.cells[row * self.cols + col]

    def nonempty_cells(self) -> list[int]:
        return [i for i, members in enumerate(self.cells) if members]


def _axis_cell(value: float, lo: float, hi: float, n: int) -> int:
    """Index of `value` among n equal intervals of [lo, hi], borders going low."""
    if hi <= lo:
        return 0
    t = (value - lo) / (hi - lo) * n
    idx = math.floor(t)
    if idx == t and idx > 0:
        idx -= 1
    return min(max(int(idx), 0), n - 1)


def build_grid(net: RoadNetwork, rows: int, cols: int) -> ZoneGrid:
    """Split the network's bounding box into a rows x cols grid of zones."""
    if rows < 1 or cols < 1:
        raise ValidationError("grid dimensions must be >= 1")
    if net.n_vertices == 0:
        raise ValidationError("cannot build a grid over an empty network")
    min_x, min_y, max_x, max_y = net.bounding_box()
    buckets: list[list[int]] = [[] for _ in range(rows * cols)]
    for vid in net.vertex_ids():
        x, y = net.coordinates(vid)
        row = _axis_cell(y, min_y, max_y, rows)
        col = _axis_cell(x, min_x, max_x, cols)
        buckets[row * cols + col].append(vid)
    return ZoneGrid(
        rows=rows,
        cols=cols,
        min_x=min_x,
        min_y=min_y,
        max_x=max_x,
        max_y=max_y,
        cells=tuple(tuple(b) for b in buckets),
    )
