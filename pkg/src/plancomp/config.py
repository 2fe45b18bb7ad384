"""Experiment configuration: schema, validation, hashing and builders.

A single JSON file addresses an experiment: window, model, optional grid
and a test battery.  Builders turn the validated dictionary into the
measure, model and grid objects of the library.  The config hash is the
SHA-256 of the canonical (sorted-keys) JSON dump, so key order never
matters.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, InvalidMeasureError
from .geometry import Point, Window
from .hazard import (
    AntiderivativeHazard,
    GridHazard,
    HazardMeasure,
    ProductHazard,
    margin_power,
)
from .simulate import (
    CoxModel,
    PoissonModel,
    ScalarLaw,
    ScaleMixtureDriver,
    SingleLineModel,
    TwoRegionDriver,
    exponential_jump,
    uniform_jump,
    uniform_jump_2d,
)

__all__ = [
    "CONFIG_SCHEMA",
    "load_config",
    "validate_config",
    "config_hash",
    "window_from_config",
    "hazard_from_spec",
    "law_from_spec",
    "driver_from_spec",
    "model_from_config",
    "grid_from_config",
    "test_seed",
]

_LAW_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["uniform", "fixed", "lognormal"]},
        "low": {"type": "number"},
        "high": {"type": "number"},
        "value": {"type": "number"},
        "mu": {"type": "number"},
        "sigma": {"type": "number"},
    },
    "required": ["kind"],
}

_HAZARD_SCHEMA = {
    "type": "object",
    "properties": {
        "form": {"enum": ["product", "grid", "antiderivative"]},
        "x": {"type": "object"},
        "y": {"type": "object"},
        "x_edges": {"type": "array", "items": {"type": "number"}},
        "y_edges": {"type": "array", "items": {"type": "number"}},
        "density": {"type": "array"},
        "csv": {"type": "string"},
        "kind": {"type": "string"},
        "scale": {"type": "number"},
        "px": {"type": "number"},
        "py": {"type": "number"},
    },
    "required": ["form"],
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "window": {
            "type": "object",
            "properties": {
                "x_max": {"type": "number", "exclusiveMinimum": 0},
                "y_max": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["x_max", "y_max"],
        },
        "seed": {"type": "integer", "minimum": 0},
        "out_dir": {"type": "string"},
        "model": {
            "type": "object",
            "properties": {
                "kind": {
                    "enum": [
                        "poisson",
                        "cox",
                        "single_line",
                        "single_jump_1d",
                        "single_jump_2d",
                    ]
                },
                "hazard": _HAZARD_SCHEMA,
                "driver": {
                    "type": "object",
                    "properties": {
                        "family": {"enum": ["scale_mixture", "two_region"]},
                        "law": _LAW_SCHEMA,
                        "base": _HAZARD_SCHEMA,
                    },
                    "required": ["family", "law"],
                },
                "distribution": {"type": "object"},
            },
            "required": ["kind"],
        },
        "grid": {
            "type": "object",
            "properties": {
                "nx": {"type": "integer", "minimum": 1},
                "ny": {"type": "integer", "minimum": 1},
                "points": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": {"type": "number"},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
            },
        },
        "tests": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "name": {
                        "enum": [
                            "avoidance_factorization",
                            "strong_martingale",
                            "f4_diagnostic",
                            "reconstruction",
                            "single_jump_mean",
                        ]
                    },
                    "n": {"type": "integer", "minimum": 1},
                    "sigma": {"type": "number", "exclusiveMinimum": 0},
                    "s": {"type": "array", "items": {"type": "number"}},
                    "t": {},
                    "mode": {"enum": ["weak", "star"]},
                    "compensator_scale": {"type": "number"},
                    "reveal_driver": {"type": "boolean"},
                    "realizations": {"type": "integer", "minimum": 1},
                    "tolerance": {"type": "number", "exclusiveMinimum": 0},
                },
                "required": ["name"],
            },
        },
    },
    "required": ["window", "seed", "model"],
}


def validate_config(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {exc.message}") from exc
    kind = cfg["model"]["kind"]
    if kind in ("poisson", "single_line") and "hazard" not in cfg["model"]:
        raise ConfigError(f"model kind {kind!r} needs a 'hazard' spec")
    if kind == "cox" and "driver" not in cfg["model"]:
        raise ConfigError("model kind 'cox' needs a 'driver' spec")
    if kind.startswith("single_jump") and "distribution" not in cfg["model"]:
        raise ConfigError(f"model kind {kind!r} needs a 'distribution' spec")
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    cfg = validate_config(cfg)
    cfg["_dir"] = str(path.parent)
    return cfg


def config_hash(cfg: dict) -> str:
    """Canonical hash, stable under key reordering."""
    clean = {k: v for k, v in cfg.items() if not k.startswith("_")}
    dump = json.dumps(clean, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(dump.encode()).hexdigest()


def window_from_config(cfg: dict) -> Window:
    return Window(cfg["window"]["x_max"], cfg["window"]["y_max"])


def _margin_from_spec(spec: dict | None):
    spec = spec or {}
    kind = spec.get("kind", "power")
    if kind != "power":
        raise ConfigError(f"unknown margin kind {kind!r}")
    return margin_power(spec.get("scale", 1.0), spec.get("exponent", 1.0))


def hazard_from_spec(spec: dict, window: Window, base_dir: str = ".") -> HazardMeasure:
    form = spec["form"]
    if form == "product":
        return ProductHazard(
            window, _margin_from_spec(spec.get("x")), _margin_from_spec(spec.get("y"))
        )
    if form == "grid":
        if "csv" in spec:
            x_edges, y_edges, density = read_grid_csv(Path(base_dir) / spec["csv"])
        else:
            try:
                x_edges = spec["x_edges"]
                y_edges = spec["y_edges"]
                density = spec["density"]
            except KeyError as exc:
                raise ConfigError(f"grid hazard needs {exc} (or a 'csv' path)")
        return GridHazard(window, x_edges, y_edges, density)
    if form == "antiderivative":
        kind = spec.get("kind", "separable_power")
        if kind != "separable_power":
            raise ConfigError(f"unknown antiderivative kind {kind!r}")
        scale = spec.get("scale", 1.0)
        px = spec.get("px", 1.0)
        py = spec.get("py", 1.0)
        if scale < 0 or px < 1 or py < 1:
            raise ConfigError("separable_power needs scale >= 0 and px, py >= 1")

        def field(x: float, y: float) -> float:
            return scale * x**px * y**py

        def density(x: float, y: float) -> float:
            if x <= 0.0 or y <= 0.0:
                return 0.0
            return scale * px * py * x ** (px - 1) * y ** (py - 1)

        bound = density(window.x_max, window.y_max) if scale > 0 else 1.0
        return AntiderivativeHazard(
            window, field, density=density, density_bound=bound
        )
    raise ConfigError(f"unknown hazard form {form!r}")


def read_grid_csv(path):
    """Mesh-and-density CSV: x edges line, y edges line, then one row of
    cell densities per y interval (ascending), columns over x intervals."""
    rows = [
        [float(v) for v in line.split(",") if v.strip() != ""]
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]
    if len(rows) < 3:
        raise ConfigError(f"{path}: expected x edges, y edges and density rows")
    x_edges, y_edges = rows[0], rows[1]
    body = rows[2:]
    if len(body) != len(y_edges) - 1 or any(len(r) != len(x_edges) - 1 for r in body):
        raise ConfigError(f"{path}: density block does not match the mesh")
    density = np.array(body, dtype=float).T  # -> [x cell, y cell]
    return x_edges, y_edges, density


def write_grid_csv(path, x_edges, y_edges, density) -> None:
    density = np.asarray(density, dtype=float)
    lines = [
        ",".join(repr(float(v)) for v in x_edges),
        ",".join(repr(float(v)) for v in y_edges),
    ]
    for j in range(density.shape[1]):
        lines.append(",".join(repr(float(v)) for v in density[:, j]))
    Path(path).write_text("\n".join(lines) + "\n")


def law_from_spec(spec: dict) -> ScalarLaw:
    kind = spec["kind"]
    try:
        if kind == "uniform":
            return ScalarLaw.uniform(spec["low"], spec["high"])
        if kind == "fixed":
            return ScalarLaw.fixed(spec["value"])
        if kind == "lognormal":
            return ScalarLaw.lognormal(spec["mu"], spec["sigma"])
    except KeyError as exc:
        raise ConfigError(f"scalar law {kind!r} missing parameter {exc}")
    raise ConfigError(f"unknown scalar law {kind!r}")


def driver_from_spec(spec: dict, window: Window, base_dir: str = "."):
    family = spec["family"]
    law = law_from_spec(spec["law"])
    if family == "scale_mixture":
        if "base" not in spec:
            raise ConfigError("scale_mixture driver needs a 'base' hazard spec")
        base = hazard_from_spec(spec["base"], window, base_dir)
        return ScaleMixtureDriver(base, law)
    if family == "two_region":
        return TwoRegionDriver(window, law)
    raise ConfigError(f"unknown driver family {family!r}")


def _distribution_from_spec(spec: dict, kind: str, window: Window):
    dkind = spec.get("kind")
    if kind == "single_jump_1d":
        if dkind == "exponential":
            return exponential_jump(spec.get("rate", 1.0))
        if dkind == "uniform":
            return uniform_jump(spec.get("high", 1.0))
        raise ConfigError(f"unknown 1-D jump distribution {dkind!r}")
    if dkind == "uniform":
        return uniform_jump_2d(window.x_max, window.y_max)
    raise ConfigError(f"unknown 2-D jump distribution {dkind!r}")


def model_from_config(cfg: dict):
    """Build the model object addressed by a validated config."""
    window = window_from_config(cfg)
    spec = cfg["model"]
    kind = spec["kind"]
    base_dir = cfg.get("_dir", ".")
    try:
        if kind == "poisson":
            return PoissonModel(hazard_from_spec(spec["hazard"], window, base_dir))
        if kind == "single_line":
            return SingleLineModel(hazard_from_spec(spec["hazard"], window, base_dir))
        if kind == "cox":
            return CoxModel(driver_from_spec(spec["driver"], window, base_dir))
        return _distribution_from_spec(spec["distribution"], kind, window)
    except InvalidMeasureError as exc:
        raise ConfigError(f"configured measure rejected: {exc}") from exc


def grid_from_config(cfg: dict) -> list[Point]:
    """Evaluation grid, sorted lexicographically; defaults to interior 3x3."""
    window = window_from_config(cfg)
    spec = cfg.get("grid", {})
    if "points" in spec:
        pts = [Point(float(x), float(y)) for x, y in spec["points"]]
    else:
        nx = spec.get("nx", 3)
        ny = spec.get("ny", 3)
        xs = [window.x_max * i / (nx + 1) for i in range(1, nx + 1)]
        ys = [window.y_max * j / (ny + 1) for j in range(1, ny + 1)]
        pts = [Point(x, y) for x in xs for y in ys]
    for p in pts:
        if not window.contains(p):
            raise ConfigError(f"grid point {p} outside window")
    return sorted(pts, key=lambda p: (p.x, p.y))


def test_seed(master_seed: int, index: int) -> int:
    """Per-test master seed derived from the run seed and battery index."""
    state = np.random.SeedSequence((master_seed, index)).generate_state(1, np.uint64)
    return int(state[0])
