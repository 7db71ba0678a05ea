"""JSON system descriptions: validation, construction and hashing."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from . import builtins as bi
from .errors import ConfigError
from .systems import GeneralPwlSystem, PlacementRule, SfocfSystem, SlowFastPwlSystem

KINDS = ("general-pwl", "slow-fast-pwl", "sfocf", "piecewise-smooth-builtin")


def load_schema() -> dict:
    text = resources.files("sfpwl").joinpath("schema/system_config.schema.json").read_text()
    return json.loads(text)


def _encode_complex(values):
    out = []
    for z in values:
        z = complex(z)
        out.append(z.real if z.imag == 0 else [z.real, z.imag])
    return out


def _decode_complex(values):
    return np.array([complex(v[0], v[1]) if isinstance(v, list) else complex(v) for v in values])


@dataclass
class SystemConfig:
    kind: str
    system: dict
    parameters: dict = field(default_factory=dict)
    name: str = ""
    notes: str = ""
    region: dict | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        try:
            jsonschema.validate(data, load_schema())
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {path}: {exc.message}") from exc
        cfg = cls(data["kind"], copy.deepcopy(data["system"]), dict(data.get("parameters", {})),
                  data.get("name", ""), data.get("notes", ""), copy.deepcopy(data.get("region")))
        cfg.build()      # dimensional and continuity checks on load
        return cfg

    @classmethod
    def load(cls, path) -> "SystemConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "name": self.name, "notes": self.notes,
               "parameters": dict(self.parameters), "system": copy.deepcopy(self.system)}
        if self.region is not None:
            out["region"] = copy.deepcopy(self.region)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def with_overrides(self, eps=None, mu=None) -> "SystemConfig":
        new = SystemConfig(self.kind, copy.deepcopy(self.system), dict(self.parameters),
                           self.name, self.notes, copy.deepcopy(self.region))
        if eps is not None:
            new.parameters["eps"] = float(eps)
        if mu is not None:
            new.parameters[self.mu_name] = float(mu)
        new.build()
        return new

    @property
    def mu_name(self) -> str:
        """Parameter playing the role of the unfolding parameter for this kind."""
        if self.kind == "piecewise-smooth-builtin":
            return "lambda0"
        return "mu" if self.kind == "sfocf" else "mu_tilde"

    # ------------------------------------------------------------------
    def build(self):
        """The in-memory system described by this config."""
        p, s = self.parameters, self.system
        if self.kind == "general-pwl":
            return GeneralPwlSystem(s["P_L"], s["P_R"], s["c"], p.get("mu_tilde", s.get("mu_tilde", 0.0)))
        if self.kind == "slow-fast-pwl":
            if "eps" not in p:
                raise ConfigError("slow-fast-pwl configs need parameters.eps")
            return SlowFastPwlSystem(s["k"], s["U_L"], s["U_R"], s["V_L"], s["V_R"], s["q"], s["r"],
                                     p["eps"], p.get("mu_tilde", s.get("mu_tilde", 0.0)))
        if self.kind == "sfocf":
            if "eps" not in p:
                raise ConfigError("sfocf configs need parameters.eps")
            eps, mu = float(p["eps"]), float(p.get("mu", 0.0))
            if "placement" in s:
                pl = s["placement"]
                try:
                    rule = PlacementRule(*(_decode_complex(pl[key]) for key in ("fast_L", "slow_L", "fast_R", "slow_R")))
                except ValueError as exc:
                    raise ConfigError(f"invalid placement: {exc}") from exc
                a_L, a_R, b_L, b_R = rule(eps)
                return SfocfSystem(rule.k, a_L, a_R, b_L, b_R, eps, mu, rule=rule)
            return SfocfSystem(s["k"], s["a_L"], s["a_R"], s["b_L"], s["b_R"], eps, mu)
        if self.kind == "piecewise-smooth-builtin":
            return bi.ocean(**{k: v for k, v in p.items() if k in bi.OCEAN_DEFAULTS})
        raise ConfigError(f"unknown kind {self.kind!r}")

    def trapping_region(self):
        if self.region is None:
            return None
        from .experiments import TrappingRegion
        try:
            return TrappingRegion(self.region["shape"], self.region["center"],
                                  self.region.get("extents"), self.region.get("matrix"))
        except ValueError as exc:
            raise ConfigError(f"invalid region: {exc}") from exc


def builtin_config(name: str, seed: int = 0) -> SystemConfig:
    if name == "canard5d":
        sys = {"placement": {"fast_L": _encode_complex(bi.CANARD_FAST_L), "slow_L": _encode_complex(bi.CANARD_SLOW_L),
                             "fast_R": _encode_complex(bi.CANARD_FAST_R), "slow_R": _encode_complex(bi.CANARD_SLOW_R)}}
        return SystemConfig("sfocf", sys, {"eps": 0.05, "mu": 1.0}, "canard5d",
                            "three fast and two slow variables; H(0) unstable for the layer equations")
    if name == "stable3d":
        sys = {"placement": {"fast_L": _encode_complex(bi.STABLE_FAST_L), "slow_L": _encode_complex(bi.STABLE_SLOW_L),
                             "fast_R": _encode_complex(bi.STABLE_FAST_R), "slow_R": _encode_complex(bi.STABLE_SLOW_R)}}
        reg = bi.stable3d_region().to_dict()
        return SystemConfig("sfocf", sys, {"eps": 0.01, "mu": 0.5}, "stable3d",
                            "globally stable critical manifold; ellipsoidal trapping region", reg)
    if name == "ocean":
        return SystemConfig("piecewise-smooth-builtin", {"builtin": "ocean"}, dict(bi.OCEAN_DEFAULTS), "ocean",
                            "thermohaline circulation model, BEB at (1, 1, 1) when lambda0 = 0")
    if name == "random4d":
        g = bi.random4d(seed)
        return SystemConfig("general-pwl", {"P_L": g.P_L.tolist(), "P_R": g.P_R.tolist(), "c": g.c.tolist()},
                            {"mu_tilde": g.mu_tilde, "k": 2, "eps": 0.1}, "random4d",
                            f"random continuous PWL system drawn with seed {seed}")
    raise ConfigError(f"unknown builtin {name!r}; choose from {', '.join(bi.BUILTINS)}")
