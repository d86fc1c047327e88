"""Flat ``section.key = value`` run configuration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from .errors import AliasingError, ConfigError
from .model import PRESETS, SpinChainModel, build_nn_xxz, build_nnn_xxz, preset_model
from .noise import NoiseSpec

# key -> (type, default); None defaults are filled from the preset
SCHEMA: dict[str, tuple[type, object]] = {
    "model.preset": (str, "kcuf3"),
    "model.n": (int, 8),
    "model.J": (float, 1.0),
    "model.form": (str, None),  # nn | nnn, only without preset
    "model.epsilon": (float, None),
    "model.jp": (float, 0.0),
    "model.epsilonp": (float, 0.0),
    "run.engine": (str, "exact"),
    "run.prep": (str, "lanczos"),
    "run.chi_max": (int, 128),
    "run.truncation_tol": (float, 1e-10),
    "run.seed": (int, 0),
    "run.channels": (str, "ZZ"),
    "run.dt": (float, None),
    "run.steps": (int, None),
    "run.order": (int, None),
    "run.e_max": (float, None),
    "mps.convergence_tol": (float, 1e-6),
    "mps.chi_ramp": (str, "16,32,64"),
    "vqe.layers": (int, 2),
    "vqe.initial": (str, None),
    "vqe.budget": (int, 2000),
    "noise.mean": (float, None),
    "noise.std": (float, None),
    "noise.shots": (int, 128000),
    "noise.seed": (int, None),
    "noise.extra": (float, 0.0),
    "dsf.normalization": (str, "max1"),
    "dsf.temperature": (float, 0.0),
    "dsf.mirror": (str, "auto"),
    "dsf.window": (str, "none"),
    "dsf.pad": (int, None),
    "dsf.isotropic": (str, "auto"),
    "scan.kind": (str, "bond"),
    "scan.chis": (str, "16,32,64,128,256"),
    "scan.ns": (str, "6,8,10"),
    "scan.layers": (str, "0,1,2,3,4,5,6"),
    "scan.substeps": (int, 1),
}

CHOICES = {
    "run.engine": ("exact", "mps"),
    "run.prep": ("lanczos", "mps", "vqe"),
    "model.form": ("nn", "nnn"),
    "vqe.initial": ("singlet_product", "neel"),
    "dsf.normalization": ("raw", "max1", "sum_rule"),
    "dsf.mirror": ("auto", "true", "false"),
    "dsf.window": ("none", "hann"),
    "dsf.isotropic": ("auto", "true", "false"),
    "scan.kind": ("bond", "fidelity"),
}


def parse_text(text: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        raw[key.strip()] = value.strip()
    return raw


def _convert(key: str, value):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    typ = SCHEMA[key][0]
    if key in CHOICES and value in CHOICES[key]:
        return value
    if value is None or (isinstance(value, str) and value.lower() in ("", "none")):
        return None
    try:
        out = typ(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {value!r} as {typ.__name__}") from None
    if key in CHOICES and out not in CHOICES[key]:
        raise ConfigError(f"{key} must be one of {CHOICES[key]}, got {out!r}")
    return out


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    @classmethod
    def load(cls, text: str = "", overrides: Iterable[str] = ()) -> "RunConfig":
        raw = parse_text(text)
        for item in overrides:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"override {item!r} is not key=value")
            raw[key.strip()] = value.strip()
        vals = {k: default for k, (_, default) in SCHEMA.items()}
        for k, v in raw.items():
            vals[k] = _convert(k, v)
        cfg = cls(vals)
        cfg._resolve()
        return cfg

    def __getitem__(self, key):
        return self.values[key]

    def _resolve(self) -> None:
        v = self.values
        preset = v["model.preset"]
        if preset is not None and preset != "none":
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
            p = PRESETS[preset]
            for key, val in (("run.dt", p.dt), ("run.steps", p.steps), ("run.order", p.order),
                             ("vqe.initial", p.initial)):
                if v[key] is None:
                    v[key] = val
        else:
            v["model.preset"] = None
            if v["model.form"] is None or v["model.epsilon"] is None:
                raise ConfigError("explicit models need model.form and model.epsilon")
            for key, val in (("run.dt", 0.6), ("run.steps", 20), ("run.order", 2),
                             ("vqe.initial", "singlet_product")):
                if v[key] is None:
                    v[key] = val
        if v["model.n"] < 2:
            raise ConfigError("model.n must be at least 2")
        if v["run.dt"] <= 0 or v["run.steps"] < 0:
            raise ConfigError("run.dt must be positive and run.steps non-negative")
        if v["run.order"] not in (1, 2):
            raise ConfigError("run.order must be 1 or 2")
        if v["noise.seed"] is None:
            v["noise.seed"] = v["run.seed"]
        for ch in self.channels:
            if len(ch) != 2 or any(a not in "XYZ" for a in ch):
                raise ConfigError(f"bad channel {ch!r}; use e.g. ZZ,XX")
        if v["run.e_max"] is not None and math.pi / v["run.dt"] < v["run.e_max"]:
            raise AliasingError(
                f"Nyquist guard: pi/dt = {math.pi / v['run.dt']:.6g} < e_max = {v['run.e_max']:.6g}"
            )

    @property
    def channels(self) -> list[str]:
        return [c.strip().upper() for c in self.values["run.channels"].split(",") if c.strip()]

    def model(self) -> SpinChainModel:
        v = self.values
        if v["model.preset"]:
            return preset_model(v["model.preset"], v["model.n"], v["model.J"])
        if v["model.form"] == "nn":
            return build_nn_xxz(v["model.n"], v["model.J"], v["model.epsilon"])
        return build_nnn_xxz(v["model.n"], v["model.J"], v["model.epsilon"], v["model.jp"], v["model.epsilonp"])

    def noise(self) -> NoiseSpec | None:
        v = self.values
        if v["noise.mean"] is None:
            return None
        return NoiseSpec(v["noise.mean"], v["noise.std"], v["noise.shots"], v["noise.seed"], v["noise.extra"])

    def int_list(self, key: str) -> list[int]:
        try:
            return [int(x) for x in self.values[key].split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"{key} must be a comma-separated list of integers") from None

    def to_text(self) -> str:
        lines = []
        for key in sorted(self.values):
            val = self.values[key]
            if val is None:
                val = "none"
            elif isinstance(val, float):
                val = f"{val:.17g}"
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"
