"""Run configuration: YAML document, strict keys, dotted overrides, model builders."""

from __future__ import annotations

import copy
import hashlib
import json
import os
from importlib import resources

import numpy as np
import yaml

from .errors import ConfigurationError
from .grid import SpatialMesh, build_mesh
from .model import (
    ConvectionModel,
    FluxModel,
    JumpModel,
    LevyMeasureSpec,
    ModelSpec,
    WienerDiffusionModel,
)
from .noise import INITIAL, RngPolicy
from .scheme import SchemeConfig

SEED_ENV = "SPDELAB_SEED"
INITIAL_FAMILIES = ("zero", "sine", "x1mx", "bump", "random_h1")


def default_config() -> dict:
    text = resources.files("spdelab").joinpath("default.yaml").read_text()
    return yaml.safe_load(text)


def _check_keys(user, ref, prefix=""):
    if not isinstance(user, dict):
        raise ConfigurationError(f"{prefix or 'config'}: expected a mapping, got {type(user).__name__}")
    for key, val in user.items():
        path = f"{prefix}.{key}" if prefix else str(key)
        if key not in ref:
            raise ConfigurationError(f"unknown configuration key '{path}'")
        if isinstance(ref[key], dict):
            _check_keys(val, ref[key], path)


def _merge(base, user, prefix=""):
    out = copy.deepcopy(base)
    for key, val in user.items():
        path = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val, path)
        else:
            out[key] = _coerce_number(val, out.get(key), path)
    return out


def _coerce_number(value, default, path):
    """YAML 1.1 reads ``1e-15`` as a string; accept it where a number is expected."""
    numeric = isinstance(default, (int, float)) and not isinstance(default, bool)
    if numeric and isinstance(value, str):
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigurationError(f"'{path}' expects a number, got {value!r}") from exc
    return value


def apply_override(cfg: dict, assignment: str) -> dict:
    """Apply one ``dotted.path=value`` override (value parsed as YAML)."""
    if "=" not in assignment:
        raise ConfigurationError(f"override '{assignment}' is not of the form key=value")
    path, raw = assignment.split("=", 1)
    keys = path.strip().split(".")
    node, ref = cfg, default_config()
    for i, key in enumerate(keys):
        if not isinstance(ref, dict) or key not in ref:
            raise ConfigurationError(f"unknown configuration key '{'.'.join(keys[: i + 1])}'")
        if i == len(keys) - 1:
            if isinstance(ref[key], dict):
                raise ConfigurationError(f"'{path}' names a section, not a value")
            try:
                value = yaml.safe_load(raw)
            except yaml.YAMLError as exc:
                raise ConfigurationError(f"cannot parse value for '{path}': {exc}") from exc
            node[key] = _coerce_number(value, ref[key], path)
        else:
            node, ref = node[key], ref[key]
    return cfg


def load_config(path=None, overrides=(), seed=None) -> dict:
    """Resolve defaults, file, environment seed, overrides and explicit seed (in that order)."""
    cfg = default_config()
    if path is not None:
        try:
            with open(path) as fh:
                user = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"malformed YAML in {path}: {exc}") from exc
        _check_keys(user, cfg)
        cfg = _merge(cfg, user)
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            cfg["rng"]["seed"] = int(env)
        except ValueError as exc:
            raise ConfigurationError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    for item in overrides:
        apply_override(cfg, item)
    if seed is not None:
        cfg["rng"]["seed"] = int(seed)
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _build(section: str, cls, values: dict):
    try:
        return cls(**values)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{section}: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{section}: {exc}") from exc


def build_mesh_from(cfg: dict) -> SpatialMesh:
    m = cfg["mesh"]
    try:
        return build_mesh(m["nodes"], (m["a"], m["b"]))
    except ConfigurationError as exc:
        raise ConfigurationError(f"mesh: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"mesh: {exc}") from exc


def initial_datum(mesh: SpatialMesh, spec: dict, rng: RngPolicy | None = None, path: int = 0) -> np.ndarray:
    """Nodal initial datum of the configured family.

    ``random_h1`` draws sum_m xi_m sin(m pi x) / m with standard normal xi_m
    from the (path, 0, initial) stream.
    """
    fam = spec["family"]
    amp = float(spec["amplitude"])
    x = (mesh.nodes - mesh.a) / mesh.length
    if fam == "zero":
        return np.zeros(mesh.node_count)
    if fam == "sine":
        return amp * np.sin(int(spec["mode"]) * np.pi * x)
    if fam == "x1mx":
        return amp * x * (1.0 - x)
    if fam == "bump":
        w = float(spec["width"])
        if not w > 0.0:
            raise ConfigurationError("initial.width must be positive")
        return amp * np.exp(-(((x - 0.5) / w) ** 2))
    if fam == "random_h1":
        rng = rng if rng is not None else RngPolicy(0)
        n = int(spec["terms"])
        xi = rng.generator(path, 0, INITIAL).standard_normal(n)
        m = np.arange(1, n + 1)
        return amp * (xi / m) @ np.sin(np.pi * np.outer(m, x))
    raise ConfigurationError(f"initial.family must be one of {INITIAL_FAMILIES}, got {fam!r}")


def build_model(cfg: dict) -> ModelSpec:
    mesh = build_mesh_from(cfg)
    m = cfg["model"]
    flux = _build("model.flux", FluxModel, m["flux"])
    conv = _build("model.convection", ConvectionModel, m["convection"])
    diff = _build("model.diffusion", WienerDiffusionModel, m["diffusion"])
    levy = _build("model.levy", LevyMeasureSpec, m["levy"])
    jumps = _build("model.jumps", JumpModel, dict(m["jumps"], levy=levy))
    u0 = initial_datum(mesh, cfg["initial"], RngPolicy(int(cfg["rng"]["seed"])))
    return ModelSpec(mesh, flux, conv, diff, jumps, u0)


def build_scheme(cfg: dict, **changes) -> SchemeConfig:
    values = dict(cfg["scheme"])
    values.update(changes)
    return _build("scheme", SchemeConfig, values)


def build_rng(cfg: dict) -> RngPolicy:
    return _build("rng", RngPolicy, {"seed": int(cfg["rng"]["seed"])})
