"""Declarative experiment configuration (JSON).

Top-level keys: ``model``, ``levy``, ``discretizations``, ``ref_dim``,
``functionals``, ``mc_samples``, ``seed``, ``mode``.  Unknown keys are
rejected at every level, and errors name the offending field.

Coefficient vectors are described rather than listed::

    {"kind": "power", "scale": 1.0, "exponent": -3.0, "modes": 2048}
    {"kind": "constant", "value": 1.0, "modes": 2048}
    {"kind": "explicit", "values": [1.0, 0.5]}
    {"kind": "zero", "modes": 1}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .fem import FemMesh, SpectralTruncation
from .levy import LevyMeasureSpec
from .mild import ModelSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class VectorSpec:
    kind: str
    modes: int = 1
    scale: float = 1.0
    exponent: float = 0.0
    values: tuple = ()

    def build(self):
        k = np.arange(1, self.modes + 1, dtype=float)
        if self.kind == "power":
            return self.scale * k**self.exponent
        if self.kind == "constant":
            return np.full(self.modes, self.scale)
        if self.kind == "explicit":
            return np.array(self.values, dtype=float)
        return np.zeros(self.modes)

    def to_dict(self):
        if self.kind == "power":
            return {"kind": "power", "scale": self.scale, "exponent": self.exponent,
                    "modes": self.modes}
        if self.kind == "constant":
            return {"kind": "constant", "value": self.scale, "modes": self.modes}
        if self.kind == "explicit":
            return {"kind": "explicit", "values": list(self.values)}
        return {"kind": "zero", "modes": self.modes}


@dataclass(frozen=True)
class LevyConfig:
    kind: str
    intensity: float
    modes: int = 1
    exponent: float = 0.0
    trace: float = 1.0
    mode_probs: tuple = ()
    jump_scales: tuple = ()

    def build(self):
        if self.kind == "power":
            return LevyMeasureSpec.power_law(self.intensity, self.modes, self.exponent, self.trace)
        return LevyMeasureSpec(self.intensity, np.array(self.mode_probs), np.array(self.jump_scales))

    def to_dict(self):
        if self.kind == "power":
            return {"kind": "power", "intensity": self.intensity, "modes": self.modes,
                    "exponent": self.exponent, "trace": self.trace}
        return {"kind": "explicit", "intensity": self.intensity,
                "mode_probs": list(self.mode_probs), "jump_scales": list(self.jump_scales)}


@dataclass(frozen=True)
class Functional:
    """``squared_norm`` (||x||^2) or ``linear`` (<x, psi>)."""

    kind: str
    psi: VectorSpec | None = None
    name: str = ""

    @property
    def label(self):
        return self.name or self.kind

    def to_dict(self):
        d = {"type": self.kind}
        if self.psi is not None:
            d["psi"] = self.psi.to_dict()
        if self.name:
            d["name"] = self.name
        return d


@dataclass(frozen=True)
class ExperimentConfig:
    T: float
    x0: VectorSpec
    f: VectorSpec
    g: VectorSpec
    levy: LevyConfig
    discretizations: tuple
    ref_dim: int
    functionals: tuple = field(default_factory=lambda: (Functional("squared_norm"),))
    mc_samples: int = 10_000
    seed: int = 42
    mode: str = "analytic"

    def model_spec(self):
        return ModelSpec(self.x0.build(), self.f.build(), self.g.build(), self.T, self.levy.build())

    def replace(self, **changes):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        cfg = ExperimentConfig(**d)
        _check_semantics(cfg)
        return cfg


def default_config():
    """T = 1, x0_k = f_k = k^-3, g_k = 1, q_k proportional to 1/k (trace 1,
    intensity 50, 2048 modes), spectral levels N = 4..64, ref_dim = 2048."""
    K = 2048
    return ExperimentConfig(
        T=1.0,
        x0=VectorSpec("power", K, 1.0, -3.0),
        f=VectorSpec("power", K, 1.0, -3.0),
        g=VectorSpec("constant", K, 1.0),
        levy=LevyConfig("power", 50.0, K, -1.0, 1.0),
        discretizations=tuple(SpectralTruncation(n) for n in (4, 8, 16, 32, 64)),
        ref_dim=K,
        functionals=(Functional("squared_norm"),),
        mc_samples=10_000,
        seed=42,
        mode="analytic",
    )


# --- parsing ---------------------------------------------------------------

def _keys(d, path, required, optional=()):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object, got {type(d).__name__}")
    unknown = sorted(set(d) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
    missing = [k for k in required if k not in d]
    if missing:
        raise ConfigError(f"{path}: missing key(s) {', '.join(missing)}")


def _num(d, key, path, positive=False, nonneg=False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise ConfigError(f"{path}.{key}: expected a finite number, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(f"{path}.{key}: must be positive")
    if nonneg and v < 0:
        raise ConfigError(f"{path}.{key}: must be nonnegative")
    return float(v)


def _int(d, key, path, minimum=None):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}")
    return v


def _num_list(d, key, path):
    v = d[key]
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{path}.{key}: expected a non-empty list of numbers")
    for i, x in enumerate(v):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not np.isfinite(x):
            raise ConfigError(f"{path}.{key}[{i}]: expected a finite number, got {x!r}")
    return tuple(float(x) for x in v)


def _vector(d, path):
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(f"{path}: expected an object with a 'kind' key")
    kind = d["kind"]
    if kind == "power":
        _keys(d, path, ("kind", "exponent", "modes"), ("scale",))
        return VectorSpec("power", _int(d, "modes", path, 1),
                          _num(d, "scale", path) if "scale" in d else 1.0,
                          _num(d, "exponent", path))
    if kind == "constant":
        _keys(d, path, ("kind", "value", "modes"))
        return VectorSpec("constant", _int(d, "modes", path, 1), _num(d, "value", path))
    if kind == "explicit":
        _keys(d, path, ("kind", "values"))
        vals = _num_list(d, "values", path)
        return VectorSpec("explicit", len(vals), values=vals)
    if kind == "zero":
        _keys(d, path, ("kind",), ("modes",))
        return VectorSpec("zero", _int(d, "modes", path, 1) if "modes" in d else 1)
    raise ConfigError(f"{path}.kind: unknown vector kind {kind!r}")


def _levy(d, path):
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(f"{path}: expected an object with a 'kind' key")
    if d["kind"] == "power":
        _keys(d, path, ("kind", "intensity", "modes", "exponent"), ("trace",))
        cfg = LevyConfig("power", _num(d, "intensity", path, positive=True),
                         _int(d, "modes", path, 1), _num(d, "exponent", path),
                         _num(d, "trace", path, positive=True) if "trace" in d else 1.0)
    elif d["kind"] == "explicit":
        _keys(d, path, ("kind", "intensity", "mode_probs", "jump_scales"))
        cfg = LevyConfig("explicit", _num(d, "intensity", path, nonneg=True),
                         mode_probs=_num_list(d, "mode_probs", path),
                         jump_scales=_num_list(d, "jump_scales", path))
        cfg = LevyConfig(cfg.kind, cfg.intensity, len(cfg.mode_probs),
                         mode_probs=cfg.mode_probs, jump_scales=cfg.jump_scales)
    else:
        raise ConfigError(f"{path}.kind: unknown levy kind {d['kind']!r}")
    try:
        cfg.build()
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cfg


def _disc(d, path):
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"{path}: expected an object with a 'type' key")
    if d["type"] == "spectral":
        _keys(d, path, ("type", "N"))
        return SpectralTruncation(_int(d, "N", path, 1))
    if d["type"] == "fem":
        _keys(d, path, ("type", "M"))
        return FemMesh(_int(d, "M", path, 1))
    raise ConfigError(f"{path}.type: unknown discretization {d['type']!r}")


def _functional(d, path):
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"{path}: expected an object with a 'type' key")
    if d["type"] == "squared_norm":
        _keys(d, path, ("type",), ("name",))
        return Functional("squared_norm", name=str(d.get("name", "")))
    if d["type"] == "linear":
        _keys(d, path, ("type", "psi"), ("name",))
        return Functional("linear", _vector(d["psi"], f"{path}.psi"), str(d.get("name", "")))
    raise ConfigError(f"{path}.type: unknown functional {d['type']!r}")


def disc_to_dict(disc):
    if isinstance(disc, SpectralTruncation):
        return {"type": "spectral", "N": disc.N}
    return {"type": "fem", "M": disc.M}


def _check_semantics(cfg):
    levels = cfg.discretizations
    hs = [d.h for d in levels]
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ConfigError("discretizations: levels must be sorted by strictly decreasing h")
    for i, d in enumerate(levels):
        resolved = d.dim if isinstance(d, SpectralTruncation) else d.M + 1
        if cfg.ref_dim < 4 * resolved:
            raise ConfigError(
                f"ref_dim: {cfg.ref_dim} is not >= 4x the resolved dimension "
                f"{resolved} of discretizations[{i}]")
    data_modes = max(cfg.x0.modes, cfg.f.modes, cfg.g.modes, cfg.levy.modes)
    if cfg.ref_dim < data_modes:
        raise ConfigError(f"ref_dim: {cfg.ref_dim} does not cover the {data_modes} data/noise modes")
    if cfg.mode not in ("analytic", "mc"):
        raise ConfigError(f"mode: expected 'analytic' or 'mc', got {cfg.mode!r}")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed: must be an unsigned 64-bit integer")
    labels = [f.label for f in cfg.functionals]
    if len(set(labels)) != len(labels):
        raise ConfigError("functionals: names must be unique (set 'name' on linear functionals)")


TOP_KEYS = ("model", "levy", "discretizations", "ref_dim", "functionals",
            "mc_samples", "seed", "mode")


def parse_config(d):
    """Build an :class:`ExperimentConfig` from a decoded JSON document."""
    _keys(d, "config", TOP_KEYS)
    m = d["model"]
    _keys(m, "model", ("T", "x0", "f", "g"))
    discs = d["discretizations"]
    if not isinstance(discs, list) or not discs:
        raise ConfigError("discretizations: expected a non-empty list")
    funcs = d["functionals"]
    if not isinstance(funcs, list) or not funcs:
        raise ConfigError("functionals: expected a non-empty list")
    mode = d["mode"]
    if not isinstance(mode, str):
        raise ConfigError("mode: expected a string")
    cfg = ExperimentConfig(
        T=_num(m, "T", "model", positive=True),
        x0=_vector(m["x0"], "model.x0"),
        f=_vector(m["f"], "model.f"),
        g=_vector(m["g"], "model.g"),
        levy=_levy(d["levy"], "levy"),
        discretizations=tuple(_disc(x, f"discretizations[{i}]") for i, x in enumerate(discs)),
        ref_dim=_int(d, "ref_dim", "config", 1),
        functionals=tuple(_functional(x, f"functionals[{i}]") for i, x in enumerate(funcs)),
        mc_samples=_int(d, "mc_samples", "config", 2),
        seed=_int(d, "seed", "config", 0),
        mode=mode,
    )
    _check_semantics(cfg)
    return cfg


def config_to_dict(cfg):
    return {
        "model": {"T": cfg.T, "x0": cfg.x0.to_dict(), "f": cfg.f.to_dict(), "g": cfg.g.to_dict()},
        "levy": cfg.levy.to_dict(),
        "discretizations": [disc_to_dict(x) for x in cfg.discretizations],
        "ref_dim": cfg.ref_dim,
        "functionals": [f.to_dict() for f in cfg.functionals],
        "mc_samples": cfg.mc_samples,
        "seed": cfg.seed,
        "mode": cfg.mode,
    }


def dumps(cfg):
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"


def _no_duplicates(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise ConfigError(f"duplicate key {k!r}")
        seen[k] = v
    return seen


def loads(text):
    try:
        d = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(d)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
