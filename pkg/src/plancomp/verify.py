"""Monte Carlo verification harness.

Each test turns a distributional identity into a CLT-bounded z-score
against an exact target computed from the hazard calculus, reported with
a pass/fail verdict at a declared sigma level.  Replicate r of a test
seeded with m draws from the derived stream (m, r), so reports are
reproducible bit for bit and replicate loops can be partitioned freely:
all aggregation is associative (count, sum, sum of squares).

Conditional expectations are tested in dual form: for the strong
martingale property the harness checks E[Z * increment] = 0 over a menu
of bounded functionals Z that, by construction, can only read the
pattern restricted to the conditioning region.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .compensator import ModelHazardProvider, single_jump_compensator, \
    single_jump_compensator_2d, star_compensator
from .errors import MeasurabilityError, UnsupportedModelError
from .geometry import Point, PointPattern, Staircase, Window, decompose
from .hazard import HazardMeasure
from .simulate import (
    CoxModel,
    JumpModel1D,
    JumpModel2D,
    PoissonModel,
    SingleLineModel,
    derive_rng,
    pattern_first_line,
)

__all__ = [
    "MCReport",
    "Accumulator",
    "RegionRestriction",
    "TestFunctional",
    "functional_one",
    "zero_indicator",
    "capped_count",
    "product_indicator",
    "default_functionals",
    "test_avoidance_factorization",
    "test_strong_martingale",
    "test_f4_diagnostic",
    "test_poisson_reconstruction",
    "test_single_jump_compensator_mean",
    "write_reports",
    "read_reports",
    "format_summary",
]


@dataclass(frozen=True)
class MCReport:
    """One verification record."""

    name: str
    estimate: float
    stderr: float
    n: int
    target: float
    z_score: float
    sigma: float
    verdict: str  # "pass" | "fail" | "inconclusive"
    seed: int
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "estimate": self.estimate,
            "target": self.target,
            "stderr": self.stderr,
            "z": self.z_score,
            "sigma": self.sigma,
            "verdict": self.verdict,
            "seed": self.seed,
            "n": self.n,
            "detail": self.detail,
        }


@dataclass
class Accumulator:
    """Associative accumulation of count, sum and sum of squares."""

    n: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, v: float) -> None:
        self.n += 1
        self.total += v
        self.total_sq += v * v

    def merge(self, other: "Accumulator") -> None:
        self.n += other.n
        self.total += other.total
        self.total_sq += other.total_sq

    @property
    def mean(self) -> float:
        return self.total / self.n if self.n else math.nan

    @property
    def stderr(self) -> float:
        if self.n < 2:
            return 0.0
        var = (self.total_sq - self.n * self.mean**2) / (self.n - 1)
        return math.sqrt(max(var, 0.0) / self.n)


def _verdict(estimate: float, target: float, stderr: float, sigma: float):
    if stderr > 0.0:
        z = (estimate - target) / stderr
        return z, ("pass" if abs(z) <= sigma else "fail")
    return 0.0, ("pass" if estimate == target else "fail")


def _report(name, acc: Accumulator, target, sigma, seed, detail="") -> MCReport:
    z, verdict = _verdict(acc.mean, target, acc.stderr, sigma)
    return MCReport(
        name=name,
        estimate=acc.mean,
        stderr=acc.stderr,
        n=acc.n,
        target=target,
        z_score=z,
        sigma=sigma,
        verdict=verdict,
        seed=seed,
        detail=detail,
    )


# ---------------------------------------------------------------------------
# Region restrictions and test functionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionRestriction:
    """A pattern restricted to a region; the only view functionals get.

    Regions: the rectangle below s, the lower layer left-or-below s, or a
    staircase.  Counting is only allowed for rectangles inside the
    region, so a functional structurally cannot read anything else.
    """

    window: Window
    points: tuple[Point, ...]
    kind: str
    anchor: Point | None = None
    layer: Staircase | None = None

    @classmethod
    def below(cls, pattern: PointPattern, s: Point) -> "RegionRestriction":
        pts = tuple(p for p in pattern.points if p.below(s))
        return cls(pattern.window, pts, "below", anchor=s)

    @classmethod
    def lower_layer(cls, pattern: PointPattern, s: Point) -> "RegionRestriction":
        pts = tuple(p for p in pattern.points if p.x <= s.x or p.y <= s.y)
        return cls(pattern.window, pts, "lower_layer", anchor=s)

    @classmethod
    def staircase(cls, pattern: PointPattern, layer: Staircase) -> "RegionRestriction":
        pts = tuple(p for p in pattern.points if layer.contains(p))
        return cls(pattern.window, pts, "staircase", layer=layer)

    def _rect_inside(self, b: Point) -> bool:
        if self.kind == "below":
            return b.below(self.anchor)
        if self.kind == "lower_layer":
            return b.x <= self.anchor.x or b.y <= self.anchor.y
        return self.layer.contains(b)

    def rect_count(self, a: Point, b: Point) -> int:
        """Points in (a1,b1] x (a2,b2]; the cell must lie in the region."""
        if not a.below(b):
            raise ValueError(f"rectangle corners not ordered: {a} !<= {b}")
        if not self._rect_inside(b):
            raise MeasurabilityError(
                f"cell with corner {b} reaches outside the {self.kind} region"
            )
        return sum(
            1 for p in self.points if a.x < p.x <= b.x and a.y < p.y <= b.y
        )


@dataclass(frozen=True)
class TestFunctional:
    """Bounded statistic of a region restriction."""

    identifier: str
    bound: float
    fn: Callable[[RegionRestriction], float]

    def __call__(self, r: RegionRestriction) -> float:
        return self.fn(r)


def functional_one() -> TestFunctional:
    return TestFunctional("one", 1.0, lambda r: 1.0)


def zero_indicator(a: Point, b: Point) -> TestFunctional:
    return TestFunctional(
        f"empty[{a.x},{a.y}][{b.x},{b.y}]",
        1.0,
        lambda r: 1.0 if r.rect_count(a, b) == 0 else 0.0,
    )


def capped_count(a: Point, b: Point, cap: int) -> TestFunctional:
    return TestFunctional(
        f"count{cap}[{a.x},{a.y}][{b.x},{b.y}]",
        float(cap),
        lambda r: float(min(r.rect_count(a, b), cap)),
    )


def product_indicator(a1: Point, b1: Point, a2: Point, b2: Point) -> TestFunctional:
    return TestFunctional(
        f"empty2[{b1.x},{b1.y}]x[{b2.x},{b2.y}]",
        1.0,
        lambda r: (
            1.0
            if r.rect_count(a1, b1) == 0 and r.rect_count(a2, b2) == 0
            else 0.0
        ),
    )


def default_functionals(s: Point, window: Window) -> list[TestFunctional]:
    """Menu of ten bounded functionals measurable on the lower layer at s."""
    o = Point(0.0, 0.0)
    sx, sy = s.x, s.y
    xm, ym = window.x_max, window.y_max
    half = Point(sx / 2, sy / 2)
    return [
        functional_one(),
        zero_indicator(o, s),
        zero_indicator(Point(0.0, sy), Point(sx, ym)),
        zero_indicator(Point(sx, 0.0), Point(xm, sy)),
        capped_count(o, s, 3),
        capped_count(Point(0.0, sy), Point(sx, ym), 2),
        capped_count(Point(sx, 0.0), Point(xm, sy), 2),
        product_indicator(o, Point(sx / 2, ym), Point(sx, 0.0), Point(xm, sy / 2)),
        capped_count(o, Point(sx, ym), 1),
        product_indicator(o, half, Point(half.x, 0.0), Point(sx, half.y)),
    ]


# ---------------------------------------------------------------------------
# Tests
# ---------------------------------------------------------------------------


def _require_kind(model, kinds, op: str) -> None:
    if getattr(model, "kind", None) not in kinds:
        raise UnsupportedModelError(
            f"{op} needs a model of kind {kinds}, got {getattr(model, 'kind', model)}"
        )


def test_avoidance_factorization(
    model,
    s: Point,
    t: Point,
    n: int,
    sigma: float,
    seed: int,
    name: str = "avoidance_factorization",
) -> MCReport:
    """Joint avoidance at incomparable s, t versus the hazard factorization.

    The exact target is exp(-(L(s) + L(t) - L(s^t))) with L the mass below
    a point; the estimate is the fraction of replicates whose line has no
    point below s and none below t.
    """
    _require_kind(model, ("single_line", "poisson"), "avoidance factorization")
    if (s.x - t.x) * (s.y - t.y) >= 0:
        raise ValueError(f"s={s} and t={t} must be incomparable")
    h = model.hazard
    o = Point(0.0, 0.0)
    meet = Point(min(s.x, t.x), min(s.y, t.y))
    target = math.exp(
        -(h.rect_mass(o, s) + h.rect_mass(o, t) - h.rect_mass(o, meet))
    )
    acc = Accumulator()
    for r in range(n):
        rng = derive_rng(seed, r)
        pattern = model.draw(rng).pattern
        if model.kind == "poisson":
            pattern = pattern_first_line(pattern)
        hit = pattern.count(s) == 0 and pattern.count(t) == 0
        acc.add(1.0 if hit else 0.0)
    return _report(name, acc, target, sigma, seed)


def _star_rect(pattern, provider, s: Point, t: Point, d) -> float:
    return (
        star_compensator(pattern, provider, t, d).value
        - star_compensator(pattern, provider, Point(s.x, t.y), d).value
        - star_compensator(pattern, provider, Point(t.x, s.y), d).value
        + star_compensator(pattern, provider, s, d).value
    )


def test_strong_martingale(
    model,
    s: Point,
    t: Point,
    functionals: Sequence[TestFunctional],
    n: int,
    sigma: float,
    seed: int,
    compensator_scale: float = 1.0,
    name_prefix: str = "strong_martingale",
) -> list[MCReport]:
    """E[Z * (N - compensator)(s, t]] = 0 for each bounded functional Z.

    Z sees only the pattern restricted to the lower layer at s.  Setting
    ``compensator_scale`` away from one is the adversarial power control:
    the Z = 1 test must then fail decisively.
    """
    _require_kind(model, ("poisson", "cox"), "strong martingale test")
    if not (s.below(t) and s != t):
        raise ValueError(f"need s <= t with s != t, got {s}, {t}")
    accs = [Accumulator() for _ in functionals]
    for r in range(n):
        rng = derive_rng(seed, r)
        draw = model.draw(rng)
        pattern = draw.pattern
        provider = ModelHazardProvider(draw.hazard)
        d = decompose(pattern)
        increment = pattern.rectangle_increment(s, t) - compensator_scale * _star_rect(
            pattern, provider, s, t, d
        )
        restriction = RegionRestriction.lower_layer(pattern, s)
        for acc, z in zip(accs, functionals):
            acc.add(z(restriction) * increment)
    return [
        _report(f"{name_prefix}:{z.identifier}", acc, 0.0, sigma, seed)
        for acc, z in zip(accs, functionals)
    ]


def _stratified_covariance(keys, us, vs, min_stratum: int):
    """Pooled covariance estimate across strata with enough occupancy.

    Returns (estimate, stderr, used, dropped, n_used); with a single
    stratum this reduces to the plain sample covariance.
    """
    strata: dict = {}
    for k, u, v in zip(keys, us, vs):
        strata.setdefault(k, ([], []))
        strata[k][0].append(u)
        strata[k][1].append(v)
    used = {k: s for k, s in strata.items() if len(s[0]) >= min_stratum}
    dropped = len(strata) - len(used)
    n_used = sum(len(s[0]) for s in used.values())
    if not used:
        return math.nan, math.nan, 0, dropped, 0
    est = 0.0
    var = 0.0
    for u_list, v_list in used.values():
        u = np.asarray(u_list, dtype=float)
        v = np.asarray(v_list, dtype=float)
        m = len(u)
        prods = (u - u.mean()) * (v - v.mean())
        cov = prods.sum() / (m - 1)
        se = prods.std(ddof=1) / math.sqrt(m) if m > 1 else 0.0
        w = m / n_used
        est += w * cov
        var += (w * se) ** 2
    return est, math.sqrt(var), len(used), dropped, n_used


def test_f4_diagnostic(
    model,
    t: Point,
    n: int,
    sigma: float,
    seed: int,
    cap: int = 3,
    min_stratum: int = 30,
    reveal_driver: bool = False,
    driver_bins: int = 10,
    name: str = "f4_diagnostic",
) -> MCReport:
    """Conditional-independence diagnostic at t.

    Conditioning on the count below t (stratification), the capped count
    in the column above t and the capped count in the row right of t must
    be uncorrelated.  For a Cox model with the driver hidden the shared
    random intensity couples the two side regions and the diagnostic must
    fail; revealing the driver (extra stratification on its quantized
    value) restores conditional independence.
    """
    _require_kind(model, ("poisson", "cox"), "conditional-independence diagnostic")
    w = model.window
    if not (0 < t.x < w.x_max and 0 < t.y < w.y_max):
        raise ValueError(f"t={t} must be interior to the window")
    if reveal_driver:
        if model.kind != "cox" or model.driver.__class__.__name__ != "ScaleMixtureDriver":
            raise UnsupportedModelError(
                "driver reveal is defined for scale-mixture Cox models"
            )
        law = model.driver.law
        if law.kind != "uniform":
            raise UnsupportedModelError("driver reveal needs a bounded uniform law")
        lo, hi = law.params

    keys, us, vs = [], [], []
    for r in range(n):
        rng = derive_rng(seed, r)
        draw = model.draw(rng)
        pattern = draw.pattern
        c = pattern.count(t)
        u = min(pattern.rectangle_increment(Point(0.0, t.y), Point(t.x, w.y_max)), cap)
        v = min(pattern.rectangle_increment(Point(t.x, 0.0), Point(w.x_max, t.y)), cap)
        if reveal_driver:
            wval = draw.info["driver"]["w"]
            b = min(int((wval - lo) / (hi - lo) * driver_bins), driver_bins - 1)
            keys.append((c, b))
        else:
            keys.append(c)
        us.append(u)
        vs.append(v)

    est, se, used, dropped, n_used = _stratified_covariance(keys, us, vs, min_stratum)
    detail = f"strata_used={used} strata_dropped={dropped} n_used={n_used}"
    if used == 0:
        return MCReport(
            name, math.nan, math.nan, n, 0.0, math.nan, sigma, "inconclusive",
            seed, detail,
        )
    if se > 0:
        z = est / se
        verdict = "pass" if abs(z) <= sigma else "fail"
    else:
        z, verdict = 0.0, ("pass" if est == 0.0 else "fail")
    return MCReport(name, est, se, n, 0.0, z, sigma, verdict, seed, detail)


def test_poisson_reconstruction(
    model_or_hazard,
    n_realizations: int,
    grid: Sequence[Point],
    seed: int,
    tol: float = 1e-9,
    name: str = "reconstruction",
) -> MCReport:
    """The star-compensator must reproduce the (realized) mean measure.

    Deterministic check: the maximum over realizations and grid points of
    |compensator - mass below t| must stay within slab-arithmetic
    tolerance.  Works for Poisson (fixed measure) and Cox (per-replicate
    realized driver) models.
    """
    model = (
        PoissonModel(model_or_hazard)
        if isinstance(model_or_hazard, HazardMeasure)
        else model_or_hazard
    )
    _require_kind(model, ("poisson", "cox"), "reconstruction check")
    o = Point(0.0, 0.0)
    max_err = 0.0
    for r in range(n_realizations):
        rng = derive_rng(seed, r)
        draw = model.draw(rng)
        provider = ModelHazardProvider(draw.hazard)
        d = decompose(draw.pattern)
        for g in grid:
            val = star_compensator(draw.pattern, provider, g, d).value
            err = abs(val - draw.hazard.rect_mass(o, g))
            max_err = max(max_err, err)
    verdict = "pass" if max_err < tol else "fail"
    return MCReport(
        name,
        max_err,
        0.0,
        n_realizations,
        0.0,
        0.0,
        0.0,
        verdict,
        seed,
        f"tolerance={tol} grid={len(grid)}",
    )


def test_single_jump_compensator_mean(
    model,
    t,
    mode: str,
    n: int,
    sigma: float,
    seed: int,
    name: str = "single_jump_mean",
) -> MCReport:
    """Mean of the computed compensator at t against P(jump below t)."""
    acc = Accumulator()
    if isinstance(model, JumpModel1D):
        target = model.cdf(t)
        for r in range(n):
            rng = derive_rng(seed, r)
            tau = model.sample(rng)
            acc.add(single_jump_compensator(model.cdf, tau, t))
    elif isinstance(model, JumpModel2D):
        target = model.cdf(t.x, t.y)
        for r in range(n):
            rng = derive_rng(seed, r)
            tau = model.sample(rng)
            acc.add(single_jump_compensator_2d(model, tau, t, mode))
    else:
        raise UnsupportedModelError(f"not a single-jump model: {model!r}")
    return _report(name, acc, target, sigma, seed, detail=f"mode={mode}")


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def write_reports(path, reports: Sequence[MCReport]) -> None:
    """One JSON record per line, written atomically."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        for rep in reports:
            fh.write(json.dumps(rep.to_dict(), sort_keys=True))
            fh.write("\n")
    tmp.replace(path)


def read_reports(path) -> list[MCReport]:
    out = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            out.append(
                MCReport(
                    name=d["name"],
                    estimate=d["estimate"],
                    stderr=d["stderr"],
                    n=d["n"],
                    target=d["target"],
                    z_score=d["z"],
                    sigma=d["sigma"],
                    verdict=d["verdict"],
                    seed=d["seed"],
                    detail=d.get("detail", ""),
                )
            )
    return out


def format_summary(reports: Sequence[MCReport]) -> str:
    """Human-readable table, one row per report."""
    headers = ["name", "estimate", "target", "stderr", "z", "verdict", "n", "seed"]
    rows = [
        [
            rep.name,
            f"{rep.estimate:.6g}",
            f"{rep.target:.6g}",
            f"{rep.stderr:.3g}",
            f"{rep.z_score:.3g}",
            rep.verdict.upper(),
            str(rep.n),
            str(rep.seed),
        ]
        for rep in reports
    ]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines)
