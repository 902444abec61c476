"""Run configuration: strict YAML schema with field-level validation.

Unknown keys anywhere in the file are errors, so typos in physics parameters
cannot pass silently.  The `schema` field versions the layout.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import yaml

from .estimators import EstimatorConfig
from .models import HubbardSpec, SpinChainSpec, TrotterPlan
from .statevec import NoiseSpec

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _need(mapping: dict, key: str, path: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: required field is missing")
    return mapping[key]


def _check_keys(mapping: dict, allowed: set[str], path: str) -> None:
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path}: expected a mapping")
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")


def _pos_int(value, path, minimum=1) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"{path}: expected an integer >= {minimum}, got {value!r}")
    return value


def _pos_float(value, path, strict=True) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected a number, got {value!r}") from None
    if strict and not v > 0:
        raise ConfigError(f"{path}: must be positive, got {value!r}")
    if not strict and v < 0:
        raise ConfigError(f"{path}: must be non-negative, got {value!r}")
    return v


_AXES = ("x", "y", "z")


@dataclass
class RunConfig:
    """Validated run description; `raw` round-trips losslessly to YAML."""

    raw: dict

    # -- construction --------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = copy.deepcopy(data)
        _check_keys(data, {"schema", "seed", "outputs", "model", "plan",
                           "estimator", "noise", "observables", "dsf",
                           "variance_study"}, "config")
        if _need(data, "schema", "config") != SCHEMA_VERSION:
            raise ConfigError(
                f"config.schema: unsupported version {data['schema']!r} "
                f"(expected {SCHEMA_VERSION})"
            )
        _pos_int(_need(data, "seed", "config"), "config.seed", minimum=0)
        if not isinstance(_need(data, "outputs", "config"), str) or not data["outputs"]:
            raise ConfigError("config.outputs: expected a non-empty path string")

        model = _need(data, "model", "config")
        kind = _need(model, "kind", "config.model")
        if kind == "heisenberg":
            _check_keys(model, {"kind", "length", "boundary", "coupling"},
                        "config.model")
            _pos_int(_need(model, "length", "config.model"), "config.model.length",
                     minimum=2)
            if model.get("boundary", "periodic") not in ("periodic", "open"):
                raise ConfigError("config.model.boundary: must be periodic or open")
            coupling = model.get("coupling", {})
            _check_keys(coupling, {"x", "y", "z"}, "config.model.coupling")
            for ax, v in coupling.items():
                if not isinstance(v, (int, float)):
                    raise ConfigError(f"config.model.coupling.{ax}: expected a number")
        elif kind == "hubbard":
            _check_keys(model, {"kind", "sites", "boundary", "hopping",
                                "interaction"}, "config.model")
            _pos_int(_need(model, "sites", "config.model"), "config.model.sites",
                     minimum=2)
            if model.get("boundary", "periodic") not in ("periodic", "open"):
                raise ConfigError("config.model.boundary: must be periodic or open")
            _pos_float(model.get("hopping", 1.0), "config.model.hopping")
            _pos_float(model.get("interaction", 0.0), "config.model.interaction",
                       strict=False)
        else:
            raise ConfigError(
                f"config.model.kind: expected heisenberg or hubbard, got {kind!r}"
            )

        plan = _need(data, "plan", "config")
        _check_keys(plan, {"total_time", "steps"}, "config.plan")
        _pos_float(_need(plan, "total_time", "config.plan"), "config.plan.total_time")
        _pos_int(_need(plan, "steps", "config.plan"), "config.plan.steps")

        est = _need(data, "estimator", "config")
        _check_keys(est, {"mode", "epsilon", "total_shots",
                          "shots_per_perturbation", "reindex_time"},
                    "config.estimator")
        mode = _need(est, "mode", "config.estimator")
        if mode not in ("fd", "lcp", "scp"):
            raise ConfigError(
                f"config.estimator.mode: expected fd, lcp or scp, got {mode!r}"
            )
        if mode in ("fd", "scp"):
            _pos_float(est.get("epsilon", 0.1), "config.estimator.epsilon")
        shots = _need(est, "total_shots", "config.estimator")
        _pos_int(shots, "config.estimator.total_shots")
        spp = est.get("shots_per_perturbation", 1)
        _pos_int(spp, "config.estimator.shots_per_perturbation")
        if shots % spp != 0:
            raise ConfigError(
                "config.estimator.total_shots: must be divisible by "
                "shots_per_perturbation"
            )
        if "reindex_time" in est and not isinstance(est["reindex_time"], bool):
            raise ConfigError("config.estimator.reindex_time: expected a boolean")

        if "noise" in data and data["noise"] is not None:
            _check_keys(data["noise"], {"gamma"}, "config.noise")
            gamma = _pos_float(_need(data["noise"], "gamma", "config.noise"),
                               "config.noise.gamma", strict=False)
            if gamma > 1:
                raise ConfigError("config.noise.gamma: must lie in [0, 1]")

        obs = data.get("observables", {})
        if kind == "heisenberg":
            _check_keys(obs, {"kick_site", "kick_axis", "measure_axis",
                              "measure_sites"}, "config.observables")
            L = model["length"]
            ks = obs.get("kick_site", 0)
            _pos_int(ks, "config.observables.kick_site", minimum=0)
            if ks >= L:
                raise ConfigError("config.observables.kick_site: outside the chain")
            for key in ("kick_axis", "measure_axis"):
                if obs.get(key, "x") not in _AXES:
                    raise ConfigError(f"config.observables.{key}: expected x, y or z")
            sites = obs.get("measure_sites", [0])
            if not isinstance(sites, list) or not sites:
                raise ConfigError("config.observables.measure_sites: expected a "
                                  "non-empty list")
            for s in sites:
                if not isinstance(s, int) or not 0 <= s < L:
                    raise ConfigError(
                        f"config.observables.measure_sites: site {s!r} outside chain"
                    )
        else:
            _check_keys(obs, {"site_R", "site_r", "species"}, "config.observables")
            M = model["sites"]
            for key in ("site_R", "site_r"):
                v = obs.get(key, 0)
                _pos_int(v, f"config.observables.{key}", minimum=0)
                if v >= M:
                    raise ConfigError(f"config.observables.{key}: outside lattice")
            if obs.get("species", "up") not in ("up", "down"):
                raise ConfigError("config.observables.species: expected up or down")

        if "dsf" in data and data["dsf"] is not None:
            _check_keys(data["dsf"], {"max_modes", "sigma", "oracle_mode",
                                      "n_omega"}, "config.dsf")
            _pos_int(data["dsf"].get("max_modes", 6), "config.dsf.max_modes")
            _pos_float(data["dsf"].get("sigma", 0.2), "config.dsf.sigma")

        if "variance_study" in data and data["variance_study"] is not None:
            vs = data["variance_study"]
            _check_keys(vs, {"budgets", "trotter_grid", "s_values", "p_samples",
                             "repeats"}, "config.variance_study")
            for key in ("budgets", "trotter_grid", "s_values"):
                if key in vs:
                    if not isinstance(vs[key], list) or not vs[key]:
                        raise ConfigError(
                            f"config.variance_study.{key}: expected a non-empty list"
                        )
                    for v in vs[key]:
                        _pos_int(v, f"config.variance_study.{key}[]")

        return cls(raw=data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file is not valid YAML: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a mapping")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            yaml.safe_dump(self.raw, fh, sort_keys=False)

    # -- typed accessors ------------------------------------------------------

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def outputs(self) -> str:
        return self.raw["outputs"]

    @property
    def model_kind(self) -> str:
        return self.raw["model"]["kind"]

    def spin_spec(self) -> SpinChainSpec:
        m = self.raw["model"]
        c = m.get("coupling", {})
        return SpinChainSpec(
            length=m["length"],
            jx=float(c.get("x", 1.0)),
            jy=float(c.get("y", 1.0)),
            jz=float(c.get("z", 1.0)),
            boundary=m.get("boundary", "periodic"),
        )

    def hubbard_spec(self) -> HubbardSpec:
        m = self.raw["model"]
        return HubbardSpec(
            sites=m["sites"],
            hopping=float(m.get("hopping", 1.0)),
            interaction=float(m.get("interaction", 0.0)),
            boundary=m.get("boundary", "periodic"),
        )

    def plan(self) -> TrotterPlan:
        return TrotterPlan(float(self.raw["plan"]["total_time"]),
                           self.raw["plan"]["steps"])

    def estimator(self) -> EstimatorConfig:
        e = self.raw["estimator"]
        spp = e.get("shots_per_perturbation", 1)
        return EstimatorConfig(
            mode=e["mode"],
            epsilon=float(e.get("epsilon", 0.1)),
            perturbations=e["total_shots"] // spp,
            shots_per_perturbation=spp,
            reindex_time=e.get("reindex_time", True),
        )

    def noise(self) -> Optional[NoiseSpec]:
        n = self.raw.get("noise")
        if n is None:
            return None
        return NoiseSpec(float(n["gamma"]))

    def observables(self) -> dict:
        obs = dict(self.raw.get("observables", {}))
        if self.model_kind == "heisenberg":
            obs.setdefault("kick_site", 0)
            obs.setdefault("kick_axis", "x")
            obs.setdefault("measure_axis", "x")
            obs.setdefault("measure_sites", [0])
        else:
            obs.setdefault("site_R", 0)
            obs.setdefault("site_r", 0)
            obs.setdefault("species", "up")
        return obs

    def dsf_options(self) -> dict:
        d = dict(self.raw.get("dsf") or {})
        d.setdefault("max_modes", 6)
        d.setdefault("sigma", 0.2)
        d.setdefault("oracle_mode", False)
        d.setdefault("n_omega", 400)
        return d

    def variance_options(self) -> dict:
        v = dict(self.raw.get("variance_study") or {})
        v.setdefault("budgets", [2**10, 2**12, 2**14])
        v.setdefault("trotter_grid", [50, 100, 150, 200])
        v.setdefault("s_values", [1, 4, 16, 64])
        v.setdefault("p_samples", 2**12)
        v.setdefault("repeats", 1)
        return v
