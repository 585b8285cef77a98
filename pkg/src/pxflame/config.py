"""Scenario configuration files: JSON validated against a schema, plus builders."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .exponent import ExponentField
from .grid import Grid, ScalarField
from .reaction import ReactionProfile
from .solver import DirichletProblem, SolverConfig


class ConfigError(ValueError):
    """Invalid scenario configuration; the message starts with the offending key path."""


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC = {"type": "array", "items": _NUM, "minItems": 1, "maxItems": 2}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "grid", "exponent", "boundary", "eps"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n"],
            "properties": {
                "n": {"type": "array", "items": {"type": "integer", "minimum": 3}, "minItems": 1, "maxItems": 2},
                "lower": _VEC,
                "upper": _VEC,
            },
        },
        "exponent": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "value"],
                    "properties": {"kind": {"const": "constant"}, "value": {"type": "number", "exclusiveMinimum": 1}},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "base", "gradient"],
                    "properties": {"kind": {"const": "linear"}, "base": _NUM, "gradient": _VEC},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "axis", "points"],
                    "properties": {
                        "kind": {"const": "table"},
                        "axis": {"type": "integer", "minimum": 0, "maximum": 1},
                        "points": {
                            "type": "array",
                            "minItems": 2,
                            "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                        },
                    },
                },
            ]
        },
        "reaction": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "mass"],
            "properties": {
                "kind": {"enum": ["quadratic", "table"]},
                "mass": _POS,
                "points": {
                    "type": "array",
                    "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                },
            },
        },
        "forcing": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {"kind": {"enum": ["constant", "linear"]}, "value": _NUM, "gradient": _VEC},
        },
        "boundary": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "left", "right"],
                    "properties": {"kind": {"const": "ends"}, "left": _NUM, "right": _NUM},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "offset", "gradient"],
                    "properties": {"kind": {"const": "affine"}, "offset": _NUM, "gradient": _VEC},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "center", "radius", "slope"],
                    "properties": {"kind": {"const": "radial_log"}, "center": _VEC, "radius": _POS, "slope": _POS},
                },
            ]
        },
        "eps": {"type": "array", "items": _POS, "minItems": 1},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": _POS,
                "max_iter": {"type": "integer", "minimum": 1},
                "delta": {"type": ["number", "null"], "minimum": 0},
            },
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "harnack": {"type": "boolean"},
                "barrier": {"type": "boolean"},
                "identity42": {"type": "boolean"},
                "nondegeneracy": {"type": "boolean"},
                "chi": {"type": "boolean"},
                "concentration": {"type": "boolean"},
                "lipschitz_margin": _POS,
                "harnack_balls": {"type": "integer", "minimum": 1},
                "bump_radius": _POS,
            },
        },
        "output": {"type": "string"},
    },
}

VERIFY_DEFAULTS = {
    "harnack": False,
    "barrier": False,
    "identity42": True,
    "nondegeneracy": False,
    "chi": True,
    "concentration": True,
    "lipschitz_margin": 0.05,
    "harnack_balls": 100,
    "bump_radius": 0.1,
}
SOLVER_DEFAULTS = {"tol": 1e-7, "max_iter": 200, "delta": None}
VERIFY_CHECKS = ("harnack", "barrier", "identity42", "nondegeneracy", "chi", "concentration")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    grid: dict
    exponent: dict
    reaction: dict
    forcing: dict
    boundary: dict
    eps: tuple[float, ...]
    solver: dict = field(default_factory=lambda: dict(SOLVER_DEFAULTS))
    verify: dict = field(default_factory=lambda: dict(VERIFY_DEFAULTS))
    output: str = ""

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        validate(data)
        d = copy.deepcopy(data)
        dim = len(d["grid"]["n"])
        grid = {
            "n": [int(k) for k in d["grid"]["n"]],
            "lower": [float(v) for v in d["grid"].get("lower", [0.0] * dim)],
            "upper": [float(v) for v in d["grid"].get("upper", [1.0] * dim)],
        }
        reaction = d.get("reaction", {"kind": "quadratic", "mass": 0.5})
        forcing = d.get("forcing", {"kind": "constant", "value": 0.0})
        return cls(
            name=d["name"],
            grid=grid,
            exponent=d["exponent"],
            reaction=reaction,
            forcing=forcing,
            boundary=d["boundary"],
            eps=tuple(float(e) for e in d["eps"]),
            solver={**SOLVER_DEFAULTS, **d.get("solver", {})},
            verify={**VERIFY_DEFAULTS, **d.get("verify", {})},
            output=d.get("output", ""),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eps"] = list(self.eps)
        if not d["output"]:
            del d["output"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @property
    def dim(self) -> int:
        return len(self.grid["n"])

    @property
    def mass(self) -> float:
        return float(self.reaction["mass"])


def _path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    return "/".join(parts) if parts else "<root>"


def validate(data: dict) -> None:
    """Schema plus cross-field checks; raises ConfigError naming the key path."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        # oneOf failures hide the useful message one level down
        leaf = min(err.context, key=lambda e: len(list(e.absolute_path)), default=err) if err.context else err
        raise ConfigError(f"{_path(leaf)}: {leaf.message}")
    eps = data["eps"]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("eps: schedule must be strictly decreasing")
    dim = len(data["grid"]["n"])
    for key in ("lower", "upper"):
        if key in data["grid"] and len(data["grid"][key]) != dim:
            raise ConfigError(f"grid/{key}: expected {dim} entries")
    lo = data["grid"].get("lower", [0.0] * dim)
    hi = data["grid"].get("upper", [1.0] * dim)
    if any(b <= a for a, b in zip(lo, hi)):
        raise ConfigError("grid/upper: must exceed lower")
    bd = data["boundary"]
    if bd["kind"] == "ends" and dim != 1:
        raise ConfigError("boundary/kind: 'ends' needs a 1D grid")
    for key, spec in (("exponent", data["exponent"]), ("boundary", bd), ("forcing", data.get("forcing", {}))):
        for sub in ("gradient", "center"):
            if sub in spec and len(spec[sub]) != dim:
                raise ConfigError(f"{key}/{sub}: expected {dim} entries")
    rc = data.get("reaction", {})
    if rc.get("kind") == "table" and not rc.get("points"):
        raise ConfigError("reaction/points: required for a table profile")


def load_config(path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<root>: not valid JSON ({exc})") from exc
    return ScenarioConfig.from_dict(data)


def bundled_scenarios() -> list[str]:
    root = resources.files("pxflame") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled(name: str) -> ScenarioConfig:
    root = resources.files("pxflame") / "scenarios"
    path = root / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"name: no bundled scenario {name!r}")
    return ScenarioConfig.from_dict(json.loads(path.read_text(encoding="utf-8")))


def resolve(name_or_path: str) -> ScenarioConfig:
    """A path to a JSON file, or the name of a bundled scenario."""
    p = Path(name_or_path)
    if p.suffix == ".json" or p.exists():
        return load_config(p)
    return bundled(name_or_path)


# -- builders ---------------------------------------------------------------------


def build_grid(cfg: ScenarioConfig, refine: int = 1) -> Grid:
    """Grid of the scenario; ``refine`` divides the spacing by an integer factor."""
    n = [(k - 1) * refine + 1 for k in cfg.grid["n"]]
    return Grid.uniform(n, cfg.grid["lower"], cfg.grid["upper"])


def build_exponent(cfg: ScenarioConfig, grid: Grid) -> ExponentField:
    spec = cfg.exponent
    if spec["kind"] == "constant":
        return ExponentField.constant(grid, spec["value"])
    x = grid.coords
    if spec["kind"] == "linear":
        grad = np.asarray(spec["gradient"], dtype=float)
        vals = spec["base"] + x @ grad
        return ExponentField.from_values(grid, vals, lipschitz=float(np.linalg.norm(grad)))
    pts = np.array(sorted(spec["points"]), dtype=float)
    vals = np.interp(x[..., spec["axis"]], pts[:, 0], pts[:, 1])
    slope = float(np.max(np.abs(np.diff(pts[:, 1]) / np.diff(pts[:, 0]))))
    return ExponentField.from_values(grid, vals, lipschitz=slope)


def build_reaction(cfg: ScenarioConfig) -> ReactionProfile:
    spec = cfg.reaction
    if spec["kind"] == "quadratic":
        return ReactionProfile.quadratic(spec["mass"])
    return ReactionProfile.table(spec["points"], spec["mass"])


def build_forcing(cfg: ScenarioConfig, grid: Grid) -> ScalarField:
    spec = cfg.forcing
    val = float(spec.get("value", 0.0))
    if spec["kind"] == "constant":
        return ScalarField(grid, np.full(grid.shape, val))
    grad = np.asarray(spec.get("gradient", [0.0] * grid.dim), dtype=float)
    return ScalarField(grid, val + grid.coords @ grad)


def boundary_function(cfg: ScenarioConfig):
    """The boundary data as a function of an (..., dim) coordinate array."""
    spec = cfg.boundary
    if spec["kind"] == "ends":
        lo, hi = cfg.grid["lower"][0], cfg.grid["upper"][0]
        a, b = spec["left"], spec["right"]
        return lambda x: a + (b - a) * (x[..., 0] - lo) / (hi - lo)
    if spec["kind"] == "affine":
        g = np.asarray(spec["gradient"], dtype=float)
        return lambda x: spec["offset"] + x @ g
    c = np.asarray(spec["center"], dtype=float)
    r0, s = spec["radius"], spec["slope"]

    def radial(x):
        r = np.linalg.norm(x - c, axis=-1)
        return np.where(r > r0, s * r0 * np.log(np.maximum(r, r0) / r0), 0.0)

    return radial


def build_boundary(cfg: ScenarioConfig, grid: Grid) -> ScalarField:
    vals = np.asarray(boundary_function(cfg)(grid.coords), dtype=float)
    return ScalarField(grid, np.where(grid.boundary_mask, vals, 0.0))


def build_problem(cfg: ScenarioConfig, refine: int = 1) -> DirichletProblem:
    grid = build_grid(cfg, refine)
    return DirichletProblem(
        grid,
        build_exponent(cfg, grid),
        build_forcing(cfg, grid),
        build_reaction(cfg),
        cfg.eps[-1],
        build_boundary(cfg, grid),
    )


def build_solver_config(cfg: ScenarioConfig) -> SolverConfig:
    s = cfg.solver
    return SolverConfig(delta=s["delta"], tol=s["tol"], max_iter=s["max_iter"])
