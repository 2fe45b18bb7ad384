"""Staircase geometry of strictly simple planar point patterns.

Points of the plane are partially ordered componentwise.  A pattern is
*strictly simple* when no two points share an x- or y-coordinate and no
point sits on an axis, so dominance comparisons never tie.  The module
computes the staircase (lower-layer) regions generated by a pattern: the
level sets where fewer than ``k`` points lie strictly below-left, their
exposed corner antichains, the join envelopes spanned by adjacent corners,
and the decomposition of a pattern into successive antichain "lines".

All values are immutable after construction and every operation is a pure
function, so concurrent use needs no synchronization.
"""

from __future__ import annotations

import csv
import json
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvariantViolation, StrictSimplicityError

__all__ = [
    "Point",
    "Window",
    "PointPattern",
    "Antichain",
    "Staircase",
    "SingleLineDecomposition",
    "minimal_points",
    "min_antichain",
    "exposed_points",
    "level_set",
    "join_envelope",
    "decompose",
    "save_pattern",
    "load_pattern",
]


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def below(self, other: "Point") -> bool:
        """Componentwise <=."""
        return self.x <= other.x and self.y <= other.y

    def strictly_below(self, other: "Point") -> bool:
        """Strict inequality in both coordinates."""
        return self.x < other.x and self.y < other.y

    def join(self, other: "Point") -> "Point":
        return Point(max(self.x, other.x), max(self.y, other.y))

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Window:
    """Bounded observation window (0, x_max) x (0, y_max)."""

    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_max > 0 and self.y_max > 0):
            raise ValueError(f"window extents must be positive, got {self}")

    def contains(self, t: Point, strict: bool = False) -> bool:
        if strict:
            return 0 < t.x < self.x_max and 0 < t.y < self.y_max
        return 0 <= t.x <= self.x_max and 0 <= t.y <= self.y_max

    @property
    def corner(self) -> Point:
        return Point(self.x_max, self.y_max)


@dataclass(frozen=True)
class PointPattern:
    """A strictly simple finite configuration of points inside a window."""

    window: Window
    points: tuple[Point, ...]

    def __post_init__(self) -> None:
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        xs = [p.x for p in pts]
        ys = [p.y for p in pts]
        if len(set(xs)) != len(xs) or len(set(ys)) != len(ys):
            raise StrictSimplicityError("pattern has tied x- or y-coordinates")
        for p in pts:
            if p.x <= 0 or p.y <= 0:
                raise StrictSimplicityError(f"point {p} lies on an axis")
            if not self.window.contains(p, strict=True):
                raise ValueError(f"point {p} outside window {self.window}")

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def _require_inside(self, t: Point) -> None:
        if not self.window.contains(t):
            raise ValueError(f"evaluation point {t} outside window closure")

    def count(self, t: Point) -> int:
        """Number of pattern points componentwise <= t."""
        self._require_inside(t)
        return sum(1 for p in self.points if p.x <= t.x and p.y <= t.y)

    def count_strictly_below(self, t: Point) -> int:
        """Number of pattern points strictly below-left of t."""
        return sum(1 for p in self.points if p.x < t.x and p.y < t.y)

    def rectangle_increment(self, s: Point, t: Point) -> int:
        """Point count of the half-open rectangle (s1,t1] x (s2,t2]."""
        if not s.below(t):
            raise ValueError(f"rectangle corners not ordered: {s} !<= {t}")
        self._require_inside(t)
        return sum(
            1 for p in self.points if s.x < p.x <= t.x and s.y < p.y <= t.y
        )


@dataclass(frozen=True)
class Antichain:
    """Pairwise incomparable points in canonical order (x ascending)."""

    points: tuple[Point, ...]

    def __post_init__(self) -> None:
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        for a, b in zip(pts, pts[1:]):
            if not (a.x < b.x and a.y > b.y):
                raise ValueError(
                    f"not a canonical antichain: {a} then {b}"
                )

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def as_tuples(self) -> tuple[tuple[float, float], ...]:
        return tuple(p.as_tuple() for p in self.points)


def minimal_points(points) -> list[Point]:
    """Minimal elements under the componentwise order (ties handled)."""
    ordered = sorted(points, key=lambda p: (p.x, p.y))
    out: list[Point] = []
    best_y = float("inf")
    for p in ordered:
        if p.y < best_y:
            out.append(p)
            best_y = p.y
    return out


def min_antichain(points) -> Antichain:
    """Minimal elements of a coordinate-distinct point set, in canonical order.

    An empty input yields the empty antichain (no corners).
    """
    pts = list(points)
    xs = [p.x for p in pts]
    ys = [p.y for p in pts]
    if len(set(xs)) != len(xs) or len(set(ys)) != len(ys):
        raise StrictSimplicityError("input points have tied coordinates")
    return Antichain(tuple(minimal_points(pts)))


@dataclass(frozen=True)
class Staircase:
    """A closed lower layer, represented by its corner antichain.

    Membership: t is inside iff for every corner a, t.x <= a.x or
    t.y <= a.y.  No corners means the whole window; the single corner
    (0, 0) degenerates to the axes.
    """

    window: Window
    corners: Antichain
    _xs: tuple[float, ...] = field(init=False, repr=False, compare=False)
    _ys: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_xs", tuple(p.x for p in self.corners))
        object.__setattr__(self, "_ys", tuple(p.y for p in self.corners))

    @classmethod
    def whole(cls, window: Window) -> "Staircase":
        return cls(window, Antichain(()))

    @classmethod
    def axes(cls, window: Window) -> "Staircase":
        return cls(window, Antichain((Point(0.0, 0.0),)))

    @property
    def is_whole_window(self) -> bool:
        return len(self.corners) == 0

    def contains_xy(self, x: float, y: float) -> bool:
        # Binding constraint among corners with corner.x < x is the one
        # with the largest x (corner y's descend).
        i = bisect_left(self._xs, x)
        if i == 0:
            return True
        return y <= self._ys[i - 1]

    def contains(self, t: Point) -> bool:
        return self.contains_xy(t.x, t.y)

    def contains_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorized membership for arrays of coordinates."""
        if self.is_whole_window:
            return np.ones(np.shape(xs), dtype=bool)
        cx = np.asarray(self._xs)
        cy = np.asarray(self._ys)
        idx = np.searchsorted(cx, xs, side="left")
        out = idx == 0
        safe = np.where(idx > 0, idx - 1, 0)
        return out | (ys <= cy[safe])

    def intersect(self, other: "Staircase") -> "Staircase":
        """Intersection of two lower layers over the same window."""
        if self.window != other.window:
            raise ValueError("staircase windows differ")
        merged = minimal_points(list(self.corners) + list(other.corners))
        return Staircase(self.window, Antichain(tuple(merged)))


def _adjacent_joins(corners: Antichain) -> tuple[Point, ...]:
    pts = corners.points
    return tuple(
        Point(b.x, a.y) for a, b in zip(pts, pts[1:])
    )


def _envelope_from_corners(window: Window, corners: Antichain) -> Staircase:
    if len(corners) <= 1:
        return Staircase.whole(window)
    return Staircase(window, Antichain(_adjacent_joins(corners)))


@dataclass(frozen=True)
class SingleLineDecomposition:
    """Decomposition of a pattern into successive antichain lines.

    ``lines[k-1]`` holds the points of line k (possibly empty between
    occupied lines).  ``levels[k]`` is the staircase where fewer than k
    points lie strictly below-left; ``envelopes[k]`` is its join
    envelope.  Both lists run from index 0 (the axes / whole window) to
    ``len(pattern) + 1``.
    """

    pattern: PointPattern
    lines: tuple[Antichain, ...]
    levels: tuple[Staircase, ...]
    envelopes: tuple[Staircase, ...]

    def line(self, k: int) -> Antichain:
        """Points of line k (1-based); empty beyond the last line."""
        if k < 1:
            raise ValueError("line index starts at 1")
        if k > len(self.lines):
            return Antichain(())
        return self.lines[k - 1]

    def level(self, k: int) -> Staircase:
        return self.levels[min(k, len(self.levels) - 1)]

    def envelope(self, k: int) -> Staircase:
        return self.envelopes[min(k, len(self.envelopes) - 1)]


def _count_grid(pattern: PointPattern):
    """Sorted coordinate vectors and the dominance-count matrix C[i, j] =
    #{p : p.x <= xs[i], p.y <= ys[j]} over the candidate join grid."""
    xs = np.array(sorted(p.x for p in pattern.points))
    ys = np.array(sorted(p.y for p in pattern.points))
    n = len(pattern)
    perm = np.zeros((n, n), dtype=np.int64)
    x_rank = {x: i for i, x in enumerate(xs)}
    y_rank = {y: j for j, y in enumerate(ys)}
    for p in pattern.points:
        perm[x_rank[p.x], y_rank[p.y]] = 1
    counts = perm.cumsum(axis=0).cumsum(axis=1)
    return xs, ys, counts


def _exposed_from_counts(xs, ys, counts, k: int) -> tuple[Point, ...]:
    """Minimal points of {u on the join grid : count(u) >= k}."""
    reach = counts >= k
    rows = reach.any(axis=1)
    if not rows.any():
        return ()
    first = reach.argmax(axis=1)
    out: list[Point] = []
    best = np.inf
    for i in np.nonzero(rows)[0]:
        j = first[i]
        if ys[j] < best:
            out.append(Point(float(xs[i]), float(ys[j])))
            best = ys[j]
    return tuple(out)


def decompose(pattern: PointPattern) -> SingleLineDecomposition:
    """Split a pattern into lines and record every level staircase.

    Line k collects the minimal unassigned points lying in the previous
    join envelope but outside the previous level set.  Each stage checks
    the corner identity  level(k) = envelope(k-1) `intersect` line-k
    staircase  against the level set computed directly from dominance
    counts, and the lines are checked to partition the pattern.
    """
    window = pattern.window
    n = len(pattern)
    levels = [Staircase.axes(window)]
    envelopes = [Staircase.whole(window)]
    lines: list[Antichain] = []
    if n == 0:
        levels.append(Staircase.whole(window))
        envelopes.append(Staircase.whole(window))
        return SingleLineDecomposition(pattern, (), tuple(levels), tuple(envelopes))

    xs, ys, counts = _count_grid(pattern)
    assigned: set[tuple[float, float]] = set()
    for k in range(1, n + 2):
        prev_level = levels[k - 1]
        prev_env = envelopes[k - 1]
        candidates = [
            p
            for p in pattern.points
            if prev_env.contains(p) and not prev_level.contains(p)
        ]
        line = Antichain(tuple(minimal_points(candidates)))
        lines.append(line)
        assigned.update(p.as_tuple() for p in line)

        corners = Antichain(_exposed_from_counts(xs, ys, counts, k))
        level = Staircase(window, corners)
        via_identity = prev_env.intersect(Staircase(window, line))
        if via_identity.corners != corners:
            raise InvariantViolation(
                f"level-set identity failed at stage {k}: "
                f"{via_identity.corners} != {corners}"
            )
        levels.append(level)
        envelopes.append(_envelope_from_corners(window, corners))

    if len(assigned) != n:
        raise InvariantViolation("decomposition did not assign every point")
    while lines and len(lines[-1]) == 0:
        lines.pop()
    return SingleLineDecomposition(
        pattern, tuple(lines), tuple(levels), tuple(envelopes)
    )


def exposed_points(pattern: PointPattern, k: int) -> Antichain:
    """Corners of the k-th level set (empty if fewer than k points)."""
    if k < 1:
        raise ValueError("exposed points are defined for k >= 1")
    return level_set(pattern, k).corners


def level_set(pattern: PointPattern, k: int) -> Staircase:
    """Region where fewer than k pattern points lie strictly below-left.

    k = 0 degenerates to the axes; k > len(pattern) is the whole window.
    """
    if k < 0:
        raise ValueError("level index must be nonnegative")
    d = decompose(pattern)
    return d.level(k)


def join_envelope(pattern: PointPattern, k: int) -> Staircase:
    """Staircase spanned by joins of adjacent corners of level k.

    Whole window when level k has at most one corner (and for k = 0).
    """
    if k < 0:
        raise ValueError("level index must be nonnegative")
    d = decompose(pattern)
    return d.envelope(k)


def save_pattern(path, pattern: PointPattern, metadata: dict | None = None) -> None:
    """Write a pattern as CSV (header ``x,y``) plus a JSON sidecar.

    Floats are written with ``repr`` so the round-trip is exact.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for p in pattern.points:
            writer.writerow([repr(p.x), repr(p.y)])
    sidecar = {"window": {"x_max": pattern.window.x_max, "y_max": pattern.window.y_max}}
    if metadata:
        sidecar.update(metadata)
    with open(path.with_suffix(path.suffix + ".meta.json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_pattern(path, window: Window | None = None) -> tuple[PointPattern, dict]:
    """Read a pattern CSV written by :func:`save_pattern`.

    The window comes from the sidecar unless supplied explicitly.
    Returns the pattern and the sidecar metadata (empty dict if none).
    """
    path = Path(path)
    meta: dict = {}
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    if sidecar.exists():
        with open(sidecar) as fh:
            meta = json.load(fh)
    if window is None:
        if "window" not in meta:
            raise ValueError(f"no window sidecar for {path}; pass window=")
        window = Window(meta["window"]["x_max"], meta["window"]["y_max"])
    points = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is not None and [h.strip() for h in header] != ["x", "y"]:
            raise ValueError(f"unexpected pattern header {header!r} in {path}")
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"malformed pattern row {row!r} in {path}")
            points.append(Point(float(row[0]), float(row[1])))
    return PointPattern(window, tuple(points)), meta
