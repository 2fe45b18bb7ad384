"""Seeded samplers: Poisson, Cox, single-line and single-jump models.

Reproducibility contract: replicate ``r`` of a run with master seed ``m``
draws from ``numpy.random.default_rng(SeedSequence((m, r)))``, so serial
and parallel executions agree and identical (spec, seed) pairs yield
identical patterns bit for bit.

Strict simplicity is enforced by full resample: a draw with tied
coordinates (or a coordinate exactly on the window boundary) is thrown
away entirely and redrawn, and a counter records how often that happened.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidMeasureError
from .geometry import Point, PointPattern, Window, min_antichain
from .hazard import (
    AntiderivativeHazard,
    GridHazard,
    HazardMeasure,
    ScaledHazard,
)

__all__ = [
    "derive_rng",
    "SampleStats",
    "sample_poisson",
    "sample_single_line",
    "sample_cox",
    "sample_single_jump",
    "pattern_first_line",
    "Draw",
    "PoissonModel",
    "CoxModel",
    "SingleLineModel",
    "ScalarLaw",
    "ScaleMixtureDriver",
    "TwoRegionDriver",
    "JumpModel1D",
    "JumpModel2D",
    "exponential_jump",
    "uniform_jump",
    "uniform_jump_2d",
]

_MAX_RESAMPLE = 1000


def derive_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for replicate ``index`` under ``master_seed``."""
    return np.random.default_rng(np.random.SeedSequence((master_seed, index)))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass
class SampleStats:
    """Mutable counters exposed in run reports."""

    draws: int = 0
    collisions: int = 0


def _strictly_simple(xs: np.ndarray, ys: np.ndarray, window: Window) -> bool:
    if len(xs) != len(set(xs.tolist())) or len(ys) != len(set(ys.tolist())):
        return False
    if len(xs) and (
        xs.min() <= 0.0
        or ys.min() <= 0.0
        or xs.max() >= window.x_max
        or ys.max() >= window.y_max
    ):
        return False
    return True


def sample_poisson(
    h: HazardMeasure, seed, stats: SampleStats | None = None
) -> PointPattern:
    """Draw a Poisson pattern with mean measure h on its window."""
    rng = _as_rng(seed)
    total = h.total_mass
    for _ in range(_MAX_RESAMPLE):
        if stats is not None:
            stats.draws += 1
        n = int(rng.poisson(total)) if total > 0 else 0
        if n == 0:
            return PointPattern(h.window, ())
        xs, ys = h.sample_points(n, rng)
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if _strictly_simple(xs, ys, h.window):
            return PointPattern(
                h.window, tuple(Point(float(a), float(b)) for a, b in zip(xs, ys))
            )
        if stats is not None:
            stats.collisions += 1
    raise RuntimeError("could not draw a strictly simple pattern; measure degenerate?")


def pattern_first_line(pattern: PointPattern) -> PointPattern:
    """Restrict a pattern to its minimal points (an antichain)."""
    return PointPattern(pattern.window, min_antichain(pattern.points).points)


def sample_single_line(
    h: HazardMeasure, seed, stats: SampleStats | None = None
) -> PointPattern:
    """First line (minimal points) of a Poisson pattern under h."""
    return pattern_first_line(sample_poisson(h, seed, stats))


@dataclass(frozen=True)
class ScalarLaw:
    """Menu of positive scalar laws for random driver components."""

    kind: str
    params: tuple[float, ...]

    @classmethod
    def uniform(cls, low: float, high: float) -> "ScalarLaw":
        if not (0 <= low < high):
            raise ValueError("uniform law needs 0 <= low < high")
        return cls("uniform", (low, high))

    @classmethod
    def fixed(cls, value: float) -> "ScalarLaw":
        if value <= 0:
            raise ValueError("fixed law needs a positive value")
        return cls("fixed", (value,))

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> "ScalarLaw":
        if sigma < 0:
            raise ValueError("lognormal law needs sigma >= 0")
        return cls("lognormal", (mu, sigma))

    def sample(self, rng: np.random.Generator) -> float:
        for _ in range(_MAX_RESAMPLE):
            if self.kind == "uniform":
                v = float(rng.uniform(self.params[0], self.params[1]))
            elif self.kind == "fixed":
                v = self.params[0]
            elif self.kind == "lognormal":
                v = float(rng.lognormal(self.params[0], self.params[1]))
            else:
                raise ValueError(f"unknown scalar law {self.kind!r}")
            if v > 0:
                return v
        raise RuntimeError(f"law {self} kept producing nonpositive values")


@dataclass(frozen=True)
class ScaleMixtureDriver:
    """Random driver W * base for a positive scalar W."""

    base: HazardMeasure
    law: ScalarLaw

    @property
    def window(self) -> Window:
        return self.base.window

    def realize(self, rng: np.random.Generator) -> tuple[HazardMeasure, dict]:
        w = self.law.sample(rng)
        return ScaledHazard(self.base, w), {"family": "scale_mixture", "w": w}


@dataclass(frozen=True)
class TwoRegionDriver:
    """Independent random intensities on the 2x2 block partition of a window."""

    window: Window
    law: ScalarLaw

    def realize(self, rng: np.random.Generator) -> tuple[HazardMeasure, dict]:
        intensities = [[self.law.sample(rng) for _ in range(2)] for _ in range(2)]
        h = GridHazard(
            self.window,
            [0.0, self.window.x_max / 2.0, self.window.x_max],
            [0.0, self.window.y_max / 2.0, self.window.y_max],
            intensities,
        )
        return h, {"family": "two_region", "intensities": intensities}


def sample_cox(
    driver, seed, stats: SampleStats | None = None
) -> tuple[HazardMeasure, dict, PointPattern]:
    """Realize the driver, then sample a Poisson pattern under it.

    Returns the realized measure and its description alongside the
    pattern; the realized driver is the information available at the
    origin for the conditional-hazard machinery.
    """
    rng = _as_rng(seed)
    realized, info = driver.realize(rng)
    pattern = sample_poisson(realized, rng, stats)
    return realized, info, pattern


def _screen_cdf_1d(cdf: Callable[[float], float], horizon: float, label: str) -> None:
    """Reject 1-D distribution functions with atoms (two-scale increments)."""

    def max_inc(eps: float) -> float:
        edges = np.arange(0.0, horizon + eps, eps)
        vals = np.array([cdf(u) for u in edges])
        return float(np.diff(vals).max(initial=0.0))

    coarse = max_inc(1e-2 * horizon)
    fine = max_inc(1e-3 * horizon)
    if coarse > 0 and fine > 0.3 * coarse:
        raise InvalidMeasureError(
            f"{label}: distribution concentrates at a point "
            f"(increment ratio {fine / coarse:.3g})"
        )


@dataclass(frozen=True)
class JumpModel1D:
    """Single jump time on the half line with continuous distribution F."""

    cdf: Callable[[float], float]
    quantile: Callable[[float], float]
    label: str = "jump-1d"

    def __post_init__(self) -> None:
        horizon = self.quantile(1.0 - 1e-9)
        _screen_cdf_1d(self.cdf, horizon, self.label)

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.quantile(rng.uniform()))


def exponential_jump(rate: float = 1.0) -> JumpModel1D:
    if rate <= 0:
        raise ValueError("rate must be positive")
    return JumpModel1D(
        cdf=lambda u: -math.expm1(-rate * u) if u > 0 else 0.0,
        quantile=lambda q: -math.log1p(-q) / rate,
        label=f"exponential(rate={rate})",
    )


def uniform_jump(high: float = 1.0) -> JumpModel1D:
    if high <= 0:
        raise ValueError("high must be positive")
    return JumpModel1D(
        cdf=lambda u: min(max(u / high, 0.0), 1.0),
        quantile=lambda q: q * high,
        label=f"uniform(0,{high})",
    )


@dataclass(frozen=True)
class Margin1D:
    """One coordinate of an independent-margins planar jump."""

    cdf: Callable[[float], float]
    survival: Callable[[float], float]
    density: Callable[[float], float]
    quantile: Callable[[float], float]


@dataclass(frozen=True)
class JumpModel2D:
    """Single planar jump with continuous joint distribution F.

    ``survival(u) = P(tau >= u)`` must be consistent with the joint cdf;
    construction spot-checks the inclusion-exclusion identity on a grid
    and rejects distributions concentrating mass at a point.  When the
    coordinates are independent, ``margins`` enables the product fast
    paths (sampling and separable integrals).
    """

    cdf: Callable[[float, float], float]
    survival: Callable[[float, float], float]
    density: Callable[[float, float], float]
    support: tuple[float, float]
    margins: tuple[Margin1D, Margin1D] | None = None
    label: str = "jump-2d"

    def __post_init__(self) -> None:
        a, b = self.support
        window = Window(a, b)
        # Reuses the measure validation: increasing increments + screens.
        AntiderivativeHazard(window, self.cdf, validate_resolution=32)
        for u1 in (0.25 * a, 0.5 * a, 0.75 * a):
            for u2 in (0.25 * b, 0.5 * b, 0.75 * b):
                via_cdf = (
                    1.0 - self.cdf(u1, b) - self.cdf(a, u2) + self.cdf(u1, u2)
                )
                if abs(self.survival(u1, u2) - via_cdf) > 1e-6:
                    raise InvalidMeasureError(
                        f"{self.label}: survival inconsistent with cdf at "
                        f"({u1}, {u2})"
                    )

    def sample(self, rng: np.random.Generator) -> Point:
        if self.margins is None:
            raise NotImplementedError(
                f"{self.label}: no sampler; provide margins or subclass"
            )
        mx, my = self.margins
        return Point(mx.quantile(rng.uniform()), my.quantile(rng.uniform()))


def uniform_jump_2d(a: float = 1.0, b: float = 1.0) -> JumpModel2D:
    """Uniform jump on [0, a] x [0, b]."""

    def margin(high: float) -> Margin1D:
        return Margin1D(
            cdf=lambda u: min(max(u / high, 0.0), 1.0),
            survival=lambda u: min(max(1.0 - u / high, 0.0), 1.0),
            density=lambda u: 1.0 / high if 0.0 <= u <= high else 0.0,
            quantile=lambda q: q * high,
        )

    mx, my = margin(a), margin(b)
    return JumpModel2D(
        cdf=lambda x, y: mx.cdf(x) * my.cdf(y),
        survival=lambda x, y: mx.survival(x) * my.survival(y),
        density=lambda x, y: mx.density(x) * my.density(y),
        support=(a, b),
        margins=(mx, my),
        label=f"uniform([0,{a}]x[0,{b}])",
    )


def sample_single_jump(model, seed):
    """One draw of the jump point (a float in 1-D, a Point in 2-D)."""
    rng = _as_rng(seed)
    return model.sample(rng)


@dataclass(frozen=True)
class Draw:
    """One replicate: the pattern, the compensator base measure, metadata.

    For Poisson and single-line models the base measure is the mean
    measure itself; for Cox it is the realized driver, which carries the
    extra information revealed at the origin.
    """

    pattern: PointPattern
    hazard: HazardMeasure
    info: dict


@dataclass
class PoissonModel:
    hazard: HazardMeasure
    stats: SampleStats = field(default_factory=SampleStats)

    kind = "poisson"

    @property
    def window(self) -> Window:
        return self.hazard.window

    def draw(self, rng: np.random.Generator) -> Draw:
        return Draw(sample_poisson(self.hazard, rng, self.stats), self.hazard, {})


@dataclass
class SingleLineModel:
    hazard: HazardMeasure
    stats: SampleStats = field(default_factory=SampleStats)

    kind = "single_line"

    @property
    def window(self) -> Window:
        return self.hazard.window

    def draw(self, rng: np.random.Generator) -> Draw:
        return Draw(sample_single_line(self.hazard, rng, self.stats), self.hazard, {})


@dataclass
class CoxModel:
    driver: ScaleMixtureDriver | TwoRegionDriver
    stats: SampleStats = field(default_factory=SampleStats)

    kind = "cox"

    @property
    def window(self) -> Window:
        return self.driver.window

    def draw(self, rng: np.random.Generator) -> Draw:
        realized, info = self.driver.realize(rng)
        pattern = sample_poisson(realized, rng, self.stats)
        return Draw(pattern, realized, {"driver": info})
