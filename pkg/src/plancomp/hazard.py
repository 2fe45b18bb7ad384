"""Continuous measures on a window: cumulative hazards and mean measures.

Three concrete forms share one contract, a nonnegative rectangle-mass
primitive:

* product      -- two one-dimensional nondecreasing antiderivatives;
* grid density -- piecewise-constant nonnegative density on a mesh;
* antiderivative -- a scalar field H with H(t) the mass below t.

On top of the primitive sit exact staircase-region masses (slab
decomposition), the avoidance probability exp(-mass) and its inverse, and
an increasingness scan.  Measures must be continuous: construction screens
reject mass concentrated on lines or curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, InvalidAvoidanceError, InvalidMeasureError
from .geometry import Point, Staircase, Window

__all__ = [
    "HazardMeasure",
    "ProductHazard",
    "GridHazard",
    "AntiderivativeHazard",
    "ScaledHazard",
    "Margin",
    "margin_power",
    "margin_from_callable",
    "region_mass",
    "avoidance_from_hazard",
    "AvoidanceFunction",
    "hazard_from_avoidance",
    "check_increasing",
    "IncreasingnessViolation",
    "concentration_screen",
]

# Tolerance for negative rectangle masses attributable to rounding alone.
_NEG_TOL = 1e-9


class HazardMeasure:
    """Base class: a finite continuous measure on a window."""

    window: Window

    def cdf(self, x: float, y: float) -> float:
        """Mass of [0, x] x [0, y]."""
        raise NotImplementedError

    def rect_mass(self, s: Point, t: Point) -> float:
        """Mass of the half-open rectangle (s1,t1] x (s2,t2]."""
        if not (s.x <= t.x and s.y <= t.y):
            raise ValueError(f"rectangle corners not ordered: {s} !<= {t}")
        v = (
            self.cdf(t.x, t.y)
            - self.cdf(s.x, t.y)
            - self.cdf(t.x, s.y)
            + self.cdf(s.x, s.y)
        )
        return _guard_nonnegative(v, self.total_mass)

    @property
    def total_mass(self) -> float:
        return self.cdf(self.window.x_max, self.window.y_max)

    def sample_points(self, m: int, rng: np.random.Generator):
        """Draw m i.i.d. points from the normalized measure."""
        raise NotImplementedError


def _guard_nonnegative(v: float, scale: float) -> float:
    if v < 0.0:
        if v < -_NEG_TOL * max(1.0, scale):
            raise InvalidMeasureError(f"negative rectangle mass {v}")
        return 0.0
    return v


@dataclass(frozen=True)
class Margin:
    """One-dimensional nondecreasing antiderivative with optional inverse.

    ``quantile`` maps a fraction in [0, 1] of the total mass on [0, high]
    back to a coordinate; when missing, sampling falls back to bracketed
    root finding.
    """

    fn: Callable[[float], float]
    quantile: Callable[[float], float] | None = None
    label: str = "margin"

    def mass(self, a: float, b: float) -> float:
        return self.fn(b) - self.fn(a)


def margin_power(scale: float = 1.0, exponent: float = 1.0) -> Margin:
    """Margin u -> scale * u**exponent (exponent > 0, scale >= 0)."""
    if exponent <= 0 or scale < 0:
        raise InvalidMeasureError("power margin needs exponent > 0, scale >= 0")

    def fn(u: float) -> float:
        return scale * u**exponent

    def quantile(q: float) -> float:
        return q ** (1.0 / exponent)

    return Margin(fn, quantile, f"power(scale={scale}, exponent={exponent})")


def margin_from_callable(fn, quantile=None, label: str = "callable") -> Margin:
    return Margin(fn, quantile, label)


def _screen_margin(margin: Margin, high: float) -> None:
    """Reject decreasing or jumpy 1-D antiderivatives."""
    grid = np.linspace(0.0, high, 257)
    vals = np.array([margin.fn(u) for u in grid])
    deltas = np.diff(vals)
    if deltas.min() < -_NEG_TOL * max(1.0, abs(vals[-1])):
        raise InvalidMeasureError(f"margin {margin.label} is decreasing")
    total = vals[-1] - vals[0]
    if total <= 0:
        return
    # Two-scale increment check: increments over width eps must shrink
    # roughly linearly in eps, else mass concentrates at a point.
    coarse = _max_increment(margin.fn, high, 1e-2 * high)
    fine = _max_increment(margin.fn, high, 1e-3 * high)
    if coarse > 0 and fine > 0.3 * coarse:
        raise InvalidMeasureError(
            f"margin {margin.label} concentrates mass at a point "
            f"(increment ratio {fine / coarse:.3g})"
        )


def _max_increment(fn, high: float, eps: float) -> float:
    edges = np.arange(0.0, high + eps, eps)
    edges[-1] = min(edges[-1], high)
    vals = np.array([fn(u) for u in edges])
    return float(np.diff(vals).max(initial=0.0))


class ProductHazard(HazardMeasure):
    """Product measure of two one-dimensional margins."""

    def __init__(self, window: Window, x: Margin, y: Margin):
        self.window = window
        self.x = x
        self.y = y
        _screen_margin(x, window.x_max)
        _screen_margin(y, window.y_max)
        self._x0 = x.fn(0.0)
        self._y0 = y.fn(0.0)

    def cdf(self, x: float, y: float) -> float:
        return (self.x.fn(x) - self._x0) * (self.y.fn(y) - self._y0)

    def rect_mass(self, s: Point, t: Point) -> float:
        if not (s.x <= t.x and s.y <= t.y):
            raise ValueError(f"rectangle corners not ordered: {s} !<= {t}")
        v = self.x.mass(s.x, t.x) * self.y.mass(s.y, t.y)
        return _guard_nonnegative(v, self.total_mass)

    def _sample_axis(self, margin: Margin, high: float, u: np.ndarray) -> np.ndarray:
        base = margin.fn(0.0)
        total = margin.fn(high) - base
        if margin.quantile is not None:
            return high * np.array([margin.quantile(q) for q in u])
        return np.array(
            [
                brentq(lambda v, qq=q: margin.fn(v) - base - qq * total, 0.0, high)
                for q in u
            ]
        )

    def sample_points(self, m: int, rng: np.random.Generator):
        xs = self._sample_axis(self.x, self.window.x_max, rng.uniform(size=m))
        ys = self._sample_axis(self.y, self.window.y_max, rng.uniform(size=m))
        return xs, ys


class GridHazard(HazardMeasure):
    """Piecewise-constant nonnegative density on a rectangular mesh."""

    def __init__(self, window: Window, x_edges, y_edges, density):
        self.window = window
        self.x_edges = np.asarray(x_edges, dtype=float)
        self.y_edges = np.asarray(y_edges, dtype=float)
        self.density = np.asarray(density, dtype=float)
        if self.x_edges.ndim != 1 or len(self.x_edges) < 2:
            raise InvalidMeasureError("x_edges must have at least two entries")
        if self.y_edges.ndim != 1 or len(self.y_edges) < 2:
            raise InvalidMeasureError("y_edges must have at least two entries")
        if np.any(np.diff(self.x_edges) <= 0) or np.any(np.diff(self.y_edges) <= 0):
            raise InvalidMeasureError("mesh edges must strictly increase")
        if self.x_edges[0] != 0.0 or self.y_edges[0] != 0.0:
            raise InvalidMeasureError("mesh must start at the origin")
        if (
            self.x_edges[-1] != window.x_max
            or self.y_edges[-1] != window.y_max
        ):
            raise InvalidMeasureError("mesh must span the whole window")
        nx, ny = len(self.x_edges) - 1, len(self.y_edges) - 1
        if self.density.shape != (nx, ny):
            raise InvalidMeasureError(
                f"density shape {self.density.shape} != cells ({nx}, {ny})"
            )
        if not np.all(np.isfinite(self.density)) or np.any(self.density < 0):
            raise InvalidMeasureError("density must be finite and nonnegative")
        self._cell_mass = (
            self.density
            * np.diff(self.x_edges)[:, None]
            * np.diff(self.y_edges)[None, :]
        )

    def _overlap(self, edges: np.ndarray, a: float, b: float) -> np.ndarray:
        lo = np.maximum(edges[:-1], a)
        hi = np.minimum(edges[1:], b)
        return np.maximum(hi - lo, 0.0)

    def cdf(self, x: float, y: float) -> float:
        ox = self._overlap(self.x_edges, 0.0, x)
        oy = self._overlap(self.y_edges, 0.0, y)
        return float(ox @ self.density @ oy)

    def rect_mass(self, s: Point, t: Point) -> float:
        if not (s.x <= t.x and s.y <= t.y):
            raise ValueError(f"rectangle corners not ordered: {s} !<= {t}")
        ox = self._overlap(self.x_edges, s.x, t.x)
        oy = self._overlap(self.y_edges, s.y, t.y)
        return float(ox @ self.density @ oy)

    def sample_points(self, m: int, rng: np.random.Generator):
        probs = self._cell_mass.ravel()
        total = probs.sum()
        if total <= 0:
            raise InvalidMeasureError("cannot sample from a zero measure")
        cells = rng.choice(len(probs), size=m, p=probs / total)
        ix, iy = np.unravel_index(cells, self._cell_mass.shape)
        xs = rng.uniform(self.x_edges[ix], self.x_edges[ix + 1])
        ys = rng.uniform(self.y_edges[iy], self.y_edges[iy + 1])
        return xs, ys


class AntiderivativeHazard(HazardMeasure):
    """Measure given by a scalar field H with H(t) = mass below t.

    The field is a black box, so construction validates it: nonnegative
    rectangle increments on a grid and the concentration screen.  Sampling
    requires a pointwise density together with an upper bound for
    rejection; without them the form cannot be sampled.
    """

    def __init__(
        self,
        window: Window,
        field: Callable[[float, float], float],
        density: Callable[[float, float], float] | None = None,
        density_bound: float | None = None,
        validate_resolution: int = 64,
        screen: bool = True,
    ):
        self.window = window
        self.field = field
        self.density = density
        self.density_bound = density_bound
        ok, violation = check_increasing(self, resolution=validate_resolution)
        if not ok:
            raise InvalidMeasureError(
                f"field has a negative rectangle increment: {violation}"
            )
        if screen:
            concentration_screen(self)

    def cdf(self, x: float, y: float) -> float:
        return (
            self.field(x, y)
            - self.field(x, 0.0)
            - self.field(0.0, y)
            + self.field(0.0, 0.0)
        )

    def sample_points(self, m: int, rng: np.random.Generator):
        if self.density is None or self.density_bound is None:
            raise ConfigError(
                "sampling an antiderivative-form measure needs a density "
                "callable and a density bound for rejection"
            )
        xs = np.empty(m)
        ys = np.empty(m)
        got = 0
        w = self.window
        while got < m:
            batch = max(2 * (m - got), 16)
            px = rng.uniform(0.0, w.x_max, size=batch)
            py = rng.uniform(0.0, w.y_max, size=batch)
            u = rng.uniform(0.0, self.density_bound, size=batch)
            dens = np.array([self.density(a, b) for a, b in zip(px, py)])
            if np.any(dens > self.density_bound * (1 + 1e-9)):
                raise InvalidMeasureError("density exceeds its declared bound")
            keep = u < dens
            take = min(int(keep.sum()), m - got)
            xs[got : got + take] = px[keep][:take]
            ys[got : got + take] = py[keep][:take]
            got += take
        return xs, ys


class ScaledHazard(HazardMeasure):
    """A validated base measure scaled by a positive factor."""

    def __init__(self, base: HazardMeasure, factor: float):
        if not (factor > 0 and math.isfinite(factor)):
            raise InvalidMeasureError(f"scale factor must be positive, got {factor}")
        self.base = base
        self.factor = factor
        self.window = base.window

    def cdf(self, x: float, y: float) -> float:
        return self.factor * self.base.cdf(x, y)

    def rect_mass(self, s: Point, t: Point) -> float:
        return self.factor * self.base.rect_mass(s, t)

    def sample_points(self, m: int, rng: np.random.Generator):
        # Scaling leaves the normalized point law unchanged.
        return self.base.sample_points(m, rng)


def region_mass(h: HazardMeasure, t: Point, layer: Staircase) -> float:
    """Mass of (region below t) intersected with a staircase, exactly.

    The complement within the rectangle below t is a disjoint union of
    vertical slabs spanned by consecutive clipped corners; their masses
    are subtracted from the rectangle mass.
    """
    if layer.window != h.window:
        raise ValueError("staircase window differs from measure window")
    total = h.rect_mass(Point(0.0, 0.0), t)
    kept = [c for c in layer.corners if c.x < t.x and c.y < t.y]
    for i, c in enumerate(kept):
        x_hi = kept[i + 1].x if i + 1 < len(kept) else t.x
        total -= h.rect_mass(Point(c.x, c.y), Point(x_hi, t.y))
    return _guard_nonnegative(total, h.total_mass)


def avoidance_from_hazard(
    h: HazardMeasure, t: Point, layer: Staircase | None = None
) -> float:
    """exp(-mass below t); with a staircase, exp(-mass of the clipped region)."""
    if layer is None:
        return math.exp(-h.rect_mass(Point(0.0, 0.0), t))
    return math.exp(-region_mass(h, t, layer))


@dataclass(frozen=True)
class AvoidanceFunction:
    """The scalar field t -> exp(-mass below t) of a hazard measure."""

    window: Window
    hazard: HazardMeasure

    def __call__(self, t: Point) -> float:
        return avoidance_from_hazard(self.hazard, t)

    def on_layer(self, t: Point, layer: Staircase) -> float:
        return avoidance_from_hazard(self.hazard, t, layer)


def hazard_from_avoidance(
    p: Callable[[float, float], float],
    window: Window,
    validate_resolution: int = 64,
    density: Callable[[float, float], float] | None = None,
    density_bound: float | None = None,
) -> AntiderivativeHazard:
    """Wrap -ln p as an antiderivative-form measure, validating p.

    p must be strictly positive, equal to one on the axes, with -ln p
    increasing (nonnegative rectangle increments) and free of mass
    concentration; otherwise the field is not the avoidance function of
    a valid continuous hazard and construction fails.
    """
    gx = np.linspace(0.0, window.x_max, validate_resolution + 1)
    gy = np.linspace(0.0, window.y_max, validate_resolution + 1)
    vals = np.array([[p(x, y) for y in gy] for x in gx])
    if np.any(vals <= 0.0):
        raise ValueError("avoidance values must be strictly positive")
    axis_vals = np.concatenate([vals[0, :], vals[:, 0]])
    if np.max(np.abs(axis_vals - 1.0)) > 1e-9:
        raise InvalidAvoidanceError("avoidance function must equal one on the axes")

    def field(x: float, y: float) -> float:
        return -math.log(p(x, y))

    try:
        return AntiderivativeHazard(
            window,
            field,
            density=density,
            density_bound=density_bound,
            validate_resolution=validate_resolution,
        )
    except InvalidMeasureError as exc:
        raise InvalidAvoidanceError(
            f"not an avoidance function of a continuous hazard: {exc}"
        ) from exc


@dataclass(frozen=True)
class IncreasingnessViolation:
    s: Point
    t: Point
    increment: float


def check_increasing(
    obj,
    window: Window | None = None,
    resolution: int = 64,
) -> tuple[bool, IncreasingnessViolation | None]:
    """Scan grid rectangles for a negative increment.

    Accepts a measure, an avoidance function (checked through -ln p), or
    a raw scalar field with an explicit window.  Cell increments are
    sufficient: any grid rectangle is a sum of cells.
    """
    if isinstance(obj, HazardMeasure):
        field, win = obj.cdf, obj.window
    elif isinstance(obj, AvoidanceFunction):
        win = obj.window
        field = lambda x, y: -math.log(obj(Point(x, y)))  # noqa: E731
    else:
        if window is None:
            raise ValueError("a raw scalar field needs an explicit window")
        field, win = obj, window
    gx = np.linspace(0.0, win.x_max, resolution + 1)
    gy = np.linspace(0.0, win.y_max, resolution + 1)
    vals = np.array([[field(x, y) for y in gy] for x in gx])
    inc = vals[1:, 1:] - vals[:-1, 1:] - vals[1:, :-1] + vals[:-1, :-1]
    tol = _NEG_TOL * max(1.0, float(np.abs(vals).max()))
    bad = np.argwhere(inc < -tol)
    if len(bad) == 0:
        return True, None
    i, j = map(int, bad[0])
    return False, IncreasingnessViolation(
        Point(gx[i], gy[j]), Point(gx[i + 1], gy[j + 1]), float(inc[i, j])
    )


def concentration_screen(h: HazardMeasure, positions: int = 100) -> None:
    """Reject measures concentrating mass on lines or curves.

    Two-scale checks: masses of width-eps strips (both orientations) must
    shrink roughly linearly in eps, which rules out mass on vertical and
    horizontal lines; masses of eps-sized cells must shrink roughly
    quadratically, which rules out concentration on any curve.  Scale
    pairs are 1e-2 and 1e-3 of the window extents.  Continuous measures
    with densities varying at scales below 1e-3 of the window can be
    rejected too; that is accepted screen behaviour.
    """
    w = h.window
    total = h.total_mass
    if not math.isfinite(total):
        raise InvalidMeasureError("measure has infinite total mass")
    if total <= 0:
        return

    def max_strip(frac: float, vertical: bool) -> float:
        extent = w.x_max if vertical else w.y_max
        eps = frac * extent
        edges = np.linspace(0.0, extent, int(round(1.0 / frac)) + 1)
        best = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            if vertical:
                m = h.rect_mass(Point(a, 0.0), Point(b, w.y_max))
            else:
                m = h.rect_mass(Point(0.0, a), Point(w.x_max, b))
            best = max(best, m)
        return best if eps > 0 else best

    for vertical, name in ((True, "vertical"), (False, "horizontal")):
        coarse = max_strip(1e-2, vertical)
        fine = max_strip(1e-3, vertical)
        if coarse > 0 and fine > 0.3 * coarse:
            raise InvalidMeasureError(
                f"mass concentrates on a {name} line "
                f"(strip ratio {fine / coarse:.3g})"
            )

    # Cell check: tile at the coarse scale, then refine the heaviest cells.
    nx = ny = positions
    gx = np.linspace(0.0, w.x_max, nx + 1)
    gy = np.linspace(0.0, w.y_max, ny + 1)
    masses = np.empty((nx, ny))
    for i in range(nx):
        for j in range(ny):
            masses[i, j] = h.rect_mass(Point(gx[i], gy[j]), Point(gx[i + 1], gy[j + 1]))
    coarse_max = float(masses.max())
    if coarse_max <= 0:
        return
    worst = np.dstack(np.unravel_index(np.argsort(masses, axis=None)[::-1], masses.shape))[0][:10]
    fine_max = 0.0
    for i, j in worst:
        fx = np.linspace(gx[i], gx[i + 1], 11)
        fy = np.linspace(gy[j], gy[j + 1], 11)
        for a in range(10):
            for b in range(10):
                m = h.rect_mass(Point(fx[a], fy[b]), Point(fx[a + 1], fy[b + 1]))
                fine_max = max(fine_max, m)
    if fine_max > 0.05 * coarse_max:
        raise InvalidMeasureError(
            f"mass concentrates on a curve (cell ratio {fine_max / coarse_max:.3g})"
        )
