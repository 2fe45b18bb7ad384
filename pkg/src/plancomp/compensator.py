"""Compensator formulas: single-jump, regenerative 1-D, and the planar
star-compensator built from conditional cumulative hazards.

The planar formula sums, line by line, the mass that the line-k
conditional hazard assigns to the region below the evaluation point
clipped to the k-th level staircase, gated by the point not yet being
inside the previous level.  For Poisson and Cox bases the line-k hazard
is the base measure restricted to the band between the previous envelope
and the previous level, which makes every term an exact staircase-region
mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from scipy.integrate import dblquad, quad

from .errors import SingularHazardError
from .geometry import (
    Point,
    PointPattern,
    SingleLineDecomposition,
    Staircase,
    Window,
    decompose,
)
from .hazard import HazardMeasure, region_mass
from .simulate import JumpModel1D, JumpModel2D

__all__ = [
    "single_jump_compensator",
    "regenerative_compensator_1d",
    "single_jump_compensator_2d",
    "LineHazard",
    "ModelHazardProvider",
    "CompensatorEvaluation",
    "star_compensator",
    "star_compensator_path",
]

_DENOM_FLOOR = 1e-12


def single_jump_compensator(cdf: Callable[[float], float], tau: float, t: float) -> float:
    """Compensator of a single continuous jump time: -ln(1 - F(min(t, tau)))."""
    if tau <= 0:
        raise ValueError("jump time must be positive")
    if t < 0:
        raise ValueError("evaluation time must be nonnegative")
    u = min(t, tau)
    f = cdf(u)
    if f >= 1.0 - _DENOM_FLOOR:
        raise SingularHazardError(f"distribution saturates at u={u} (F={f})")
    return -math.log1p(-f)


def regenerative_compensator_1d(
    hazards: Sequence[Callable[[float], float]],
    jumps: Sequence[float],
    t: float,
) -> float:
    """Sum of stopped conditional cumulative hazards along the jump times.

    Term n contributes hazards[n-1](min(t, jump_n)) while the previous
    jump happened before t; jumps beyond the list are treated as infinite.
    Each hazard must be supported on (previous jump, infinity), i.e.
    vanish at and before its conditioning time.
    """
    jumps = list(jumps)
    if any(b <= a for a, b in zip(jumps, jumps[1:])):
        raise ValueError("jump times must be strictly increasing")
    if any(j <= 0 for j in jumps):
        raise ValueError("jump times must be positive")
    total = 0.0
    prev = 0.0
    for n, hz in enumerate(hazards):
        if prev >= t:
            break
        tau_n = jumps[n] if n < len(jumps) else math.inf
        total += hz(min(t, tau_n))
        prev = tau_n
    return total


def _product_integral(margins, upper: tuple[float, float], rel_tol: float) -> float:
    value = 1.0
    for m, hi in zip(margins, upper):
        part, _ = quad(
            lambda u, mm=m: mm.density(u) / mm.survival(u),
            0.0,
            hi,
            epsabs=1e-14,
            epsrel=rel_tol,
        )
        value *= part
    return value


def single_jump_compensator_2d(
    model: JumpModel2D,
    tau: Point,
    t: Point,
    mode: str = "star",
    rel_tol: float = 1e-8,
) -> float:
    """Planar single-jump compensator by adaptive quadrature.

    Integrates dF(u)/(1 - F(u)) (weak) or dF(u)/S(u) (star) over the
    rectangle below both t and tau.  Independent margins let the star
    integral factor into two one-dimensional quadratures.
    """
    if mode not in ("weak", "star"):
        raise ValueError(f"mode must be 'weak' or 'star', got {mode!r}")
    hi = (min(t.x, tau.x), min(t.y, tau.y))
    if hi[0] <= 0.0 or hi[1] <= 0.0:
        return 0.0

    if mode == "star":
        denom_corner = model.survival(hi[0], hi[1])
    else:
        denom_corner = 1.0 - model.cdf(hi[0], hi[1])
    if denom_corner <= _DENOM_FLOOR:
        raise SingularHazardError(
            f"{mode} denominator vanishes on the integration region "
            f"(value {denom_corner} at {hi})"
        )

    if mode == "star" and model.margins is not None:
        return _product_integral(model.margins, hi, rel_tol)

    if mode == "star":
        integrand = lambda y, x: model.density(x, y) / model.survival(x, y)  # noqa: E731
    else:
        integrand = lambda y, x: model.density(x, y) / (1.0 - model.cdf(x, y))  # noqa: E731
    value, _ = dblquad(
        integrand, 0.0, hi[0], 0.0, hi[1], epsabs=1e-12, epsrel=rel_tol
    )
    return value


@dataclass(frozen=True)
class LineHazard:
    """Base measure restricted to the band outer-minus-inner staircases.

    Evaluates base(B intersect (outer \\ inner)); the standard line-k
    hazard uses outer = envelope(k-1) and inner = level(k-1), so the
    mass vanishes on the previous level and beyond the previous envelope.
    """

    base: HazardMeasure
    outer: Staircase
    inner: Staircase

    def mass_below(self, t: Point, clip: Staircase | None = None) -> float:
        outer = self.outer if clip is None else self.outer.intersect(clip)
        inner = self.inner if clip is None else self.inner.intersect(clip)
        v = region_mass(self.base, t, outer) - region_mass(self.base, t, inner)
        return max(v, 0.0)

    def rect_mass(self, s: Point, t: Point) -> float:
        if not s.below(t):
            raise ValueError(f"rectangle corners not ordered: {s} !<= {t}")
        return max(
            self.mass_below(t)
            - self.mass_below(Point(s.x, t.y))
            - self.mass_below(Point(t.x, s.y))
            + self.mass_below(s),
            0.0,
        )


class ModelHazardProvider:
    """Conditional line hazards for models where conditioning collapses to
    a region restriction: Poisson mean measures and realized Cox drivers.

    Custom providers for research use only need ``window`` and a
    ``line_hazard(decomposition, k)`` returning an object with
    ``mass_below(t, clip=...)``.
    """

    def __init__(self, base: HazardMeasure):
        self.base = base

    @property
    def window(self) -> Window:
        return self.base.window

    def line_hazard(self, d: SingleLineDecomposition, k: int) -> LineHazard:
        if k < 1:
            raise ValueError("line index starts at 1")
        return LineHazard(self.base, d.envelope(k - 1), d.level(k - 1))


@dataclass(frozen=True)
class CompensatorEvaluation:
    """Star-compensator value at a point with its per-line breakdown."""

    t: Point
    value: float
    per_line: tuple[tuple[int, float], ...]


def star_compensator(
    pattern: PointPattern,
    provider,
    t: Point,
    decomposition: SingleLineDecomposition | None = None,
) -> CompensatorEvaluation:
    """Evaluate the regenerative star-compensator at t.

    Sums line contributions k = 1 .. len(pattern)+1; the contribution of
    line k is the line-k hazard mass of the region below t clipped to
    level k, and it is gated off once t lies inside level k-1 (after
    which every later term is zero as well).
    """
    if provider.window != pattern.window:
        raise ValueError("provider window differs from pattern window")
    if not pattern.window.contains(t):
        raise ValueError(f"evaluation point {t} outside window closure")
    d = decomposition if decomposition is not None else decompose(pattern)
    contribs: list[tuple[int, float]] = []
    value = 0.0
    for k in range(1, len(pattern) + 2):
        if d.level(k - 1).contains(t):
            contribs.extend((j, 0.0) for j in range(k, len(pattern) + 2))
            break
        c = provider.line_hazard(d, k).mass_below(t, clip=d.level(k))
        contribs.append((k, c))
        value += c
    return CompensatorEvaluation(t, value, tuple(contribs))


def star_compensator_path(
    pattern: PointPattern,
    provider,
    grid: Sequence[Point],
    decomposition: SingleLineDecomposition | None = None,
) -> list[CompensatorEvaluation]:
    """Evaluate the star-compensator on a lexicographically sorted grid."""
    pts = list(grid)
    keys = [(p.x, p.y) for p in pts]
    if keys != sorted(keys):
        raise ValueError("grid points must be sorted lexicographically")
    d = decomposition if decomposition is not None else decompose(pattern)
    return [star_compensator(pattern, provider, p, d) for p in pts]
