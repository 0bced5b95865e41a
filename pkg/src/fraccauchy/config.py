"""Experiment configuration: TOML files validated against a JSON schema.

A configuration has the blocks ``problem``, ``contour``, ``solver``,
``output`` and, for the study subcommands, ``study`` and ``mlval``. Vectors
are given either literally or as manufactured data of a prescribed
regularity::

    [problem]
    alpha = 0.5
    T = 1.0
    operator = { type = "diagonal", eigenvalues = [1.0, 10.0, 100.0] }
    u0 = { values = [1.0, -0.5, 0.25] }
    rhs = { vector = { regularity = 0.2, seed = 3 }, poly = [1.0, 0.5] }

    [output]
    times = [0.0, 0.5, 1.0]
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from fraccauchy.core import Array, FractionalOrder, ProblemData, SectorialOperator
from fraccauchy.operators import (
    DEFAULT_PHI_S,
    make_diagonal,
    make_laplacian_1d,
    make_scalar,
    manufacture_data,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """The configuration cannot be parsed, validated or resolved."""


# {{{ schema

_NUMBER_LIST = {"type": "array", "items": {"type": "number"}, "minItems": 1}

_VECTOR = {
    "type": "object",
    "properties": {
        "values": _NUMBER_LIST,
        "regularity": {"type": "number", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "scale": {"type": "number"},
    },
    "oneOf": [{"required": ["values"]}, {"required": ["regularity"]}],
    "additionalProperties": False,
}

_OPERATOR = {
    "type": "object",
    "properties": {
        "type": {"enum": ["diagonal", "laplacian1d", "scalar"]},
        "eigenvalues": _NUMBER_LIST,
        "geomspace": {
            "type": "object",
            "properties": {
                "start": {"type": "number", "exclusiveMinimum": 0},
                "stop": {"type": "number", "exclusiveMinimum": 0},
                "num": {"type": "integer", "minimum": 1},
            },
            "required": ["start", "stop", "num"],
            "additionalProperties": False,
        },
        "n": {"type": "integer", "minimum": 1},
        "lambda": {"type": "number"},
        "phi_s": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1.5707963267948966},
    },
    "required": ["type"],
    "additionalProperties": False,
    "allOf": [
        {
            "if": {"properties": {"type": {"const": "diagonal"}}},
            "then": {"oneOf": [{"required": ["eigenvalues"]}, {"required": ["geomspace"]}]},
        },
        {"if": {"properties": {"type": {"const": "laplacian1d"}}}, "then": {"required": ["n"]}},
        {"if": {"properties": {"type": {"const": "scalar"}}}, "then": {"required": ["lambda"]}},
    ],
}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "properties": {
        "problem": {
            "type": "object",
            "properties": {
                "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 2},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "operator": _OPERATOR,
                "u0": _VECTOR,
                "u1": _VECTOR,
                "rhs": {
                    "type": "object",
                    "properties": {
                        "vector": _VECTOR,
                        "poly": _NUMBER_LIST,
                        "regularity": {"type": "number", "minimum": 0},
                    },
                    "required": ["vector"],
                    "additionalProperties": False,
                },
            },
            "required": ["alpha", "operator", "u0"],
            "additionalProperties": False,
        },
        "contour": {
            "type": "object",
            "properties": {
                "node_count": {"type": "integer", "minimum": 8},
                "tol": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "solver": {
            "type": "object",
            "properties": {
                "formula": {"enum": ["new", "classic", "li", "ml_oracle"]},
                "correction": {"type": "integer", "minimum": 0},
                "panel_nodes": {"type": "integer", "minimum": 2},
                "depth": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "residual_tol": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "path": {"type": "string"},
                "times": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "grid": {
                    "type": "object",
                    "properties": {"num": {"type": "integer", "minimum": 1}},
                    "required": ["num"],
                    "additionalProperties": False,
                },
                "components": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "study": {
            "type": "object",
            "properties": {
                "node_counts": {"type": "array", "items": {"type": "integer", "minimum": 8}, "minItems": 2},
                "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2},
            },
            "additionalProperties": False,
        },
        "mlval": {
            "type": "object",
            "properties": {
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "beta": {"type": "number"},
                "z": {
                    "type": "array",
                    "items": {
                        "oneOf": [
                            {"type": "number"},
                            {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                        ]
                    },
                    "minItems": 1,
                },
            },
            "required": ["alpha", "beta", "z"],
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

# }}}


# {{{ loading


def load_config(path: str | Path) -> dict:
    """Read and validate a TOML configuration file."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    validate_config(raw)
    return raw


def validate_config(raw: dict) -> None:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from exc


def with_seed(raw: dict, seed: int | None) -> dict:
    """Copy of *raw* with *seed* added to every manufactured-vector seed."""
    cfg = copy.deepcopy(raw)
    if seed is None:
        return cfg
    prob = cfg.get("problem", {})
    specs = [prob.get("u0"), prob.get("u1"), prob.get("rhs", {}).get("vector")]
    for k, spec in enumerate(specs):
        if spec is not None and "regularity" in spec:
            spec["seed"] = int(spec.get("seed", k)) + int(seed)
    return cfg


def config_hash(cfg: dict) -> str:
    """Short SHA-256 digest of the canonical JSON form of *cfg*."""
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# }}}


# {{{ resolution


def build_operator(spec: dict) -> SectorialOperator:
    phi_s = spec.get("phi_s", DEFAULT_PHI_S)
    kind = spec["type"]
    try:
        if kind == "diagonal":
            if "eigenvalues" in spec:
                lam = np.asarray(spec["eigenvalues"], dtype=float)
            else:
                g = spec["geomspace"]
                lam = np.geomspace(g["start"], g["stop"], g["num"])
            return make_diagonal(lam, phi_s=phi_s)
        if kind == "laplacian1d":
            return make_laplacian_1d(spec["n"], phi_s=phi_s)
        return make_scalar(spec["lambda"], phi_s=phi_s)
    except ValueError as exc:
        raise ConfigError(f"invalid operator: {exc}") from exc


def build_vector(op: SectorialOperator, spec: dict | None, default_seed: int) -> tuple[Array, float]:
    """Vector and its regularity class (``inf`` for literal vectors)."""
    if spec is None:
        return np.zeros(op.dimension), math.inf
    scale = spec.get("scale", 1.0)
    if "values" in spec:
        x = np.asarray(spec["values"], dtype=float)
        if x.size != op.dimension:
            raise ConfigError(f"vector has {x.size} entries, operator dimension is {op.dimension}")
        return scale * x, math.inf
    data = manufacture_data(op, spec["regularity"], seed=int(spec.get("seed", default_seed)))
    return scale * data.vector, data.regularity


@dataclass(frozen=True)
class Experiment:
    """A resolved configuration."""

    raw: dict
    problem: ProblemData | None
    times: Array
    formula: str
    solver_params: dict
    residual_tol: float
    out_path: str | None
    components: bool

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def resolve(raw: dict) -> Experiment:
    """Turn a validated configuration into problem data and run settings."""
    prob = raw.get("problem")
    problem = None
    T = 1.0
    if prob is not None:
        T = float(prob.get("T", 1.0))
        op = build_operator(prob["operator"])
        u0, _ = build_vector(op, prob["u0"], 0)
        u1, _ = build_vector(op, prob.get("u1"), 1)
        try:
            order = FractionalOrder(float(prob["alpha"]))
            rhs = prob.get("rhs")
            if rhs is None:
                problem = ProblemData(order, op, u0, u1=u1, T=T)
            else:
                x, reg = build_vector(op, rhs["vector"], 2)
                reg = rhs.get("regularity", reg)
                poly = rhs.get("poly", [1.0])
                problem = ProblemData.with_polynomial_rhs(
                    order, op, u0, [c * x for c in poly], u1=u1, T=T, rhs_regularity=reg
                )
        except ValueError as exc:
            raise ConfigError(f"invalid problem: {exc}") from exc

    out = raw.get("output", {})
    if "times" in out:
        times = np.asarray(out["times"], dtype=float)
    else:
        times = np.linspace(0.0, T, out.get("grid", {}).get("num", 11))
    if np.any(np.diff(times) <= 0):
        raise ConfigError("output times must be strictly increasing")

    solver = raw.get("solver", {})
    contour = raw.get("contour", {})
    params = {
        "node_count": contour.get("node_count"),
        "tol": contour.get("tol", 1e-14),
        "correction": solver.get("correction"),
    }
    for key in ("panel_nodes", "depth"):
        if key in solver:
            params[key] = solver[key]
    return Experiment(
        raw=raw,
        problem=problem,
        times=times,
        formula=solver.get("formula", "new"),
        solver_params=params,
        residual_tol=solver.get("residual_tol", 1e-6),
        out_path=out.get("path"),
        components=out.get("components", True),
    )


# }}}
