"""Experiment configuration: a small YAML file of nested key/value sections.

Every numeric field is coerced to a 64-bit float on parse; the weight's
convexification strength accepts the sentinel "auto", resolved through the
discrete module's doubling ladder at run time.  Parsed configs re-serialize
to a canonical form (sorted keys) that parses back to an equal value.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
import yaml

from .errors import ValidationError
from .symbols import ModelCoefficients


def _need(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ValidationError(f"{where}.{key}: missing required field")
    return mapping[key]


def _as_float(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{where}: expected an integer, got {value!r}")
    return int(value)


def _check_keys(mapping: dict, allowed: set[str], where: str):
    if not isinstance(mapping, dict):
        raise ValidationError(f"{where}: expected a mapping, got {type(mapping).__name__}")
    for key in mapping:
        if key not in allowed:
            raise ValidationError(f"{where}.{key}: unknown field")


@dataclass(frozen=True)
class CoefficientsConfig:
    plus: tuple
    minus: tuple

    @classmethod
    def from_dict(cls, raw: dict) -> "CoefficientsConfig":
        _check_keys(raw, {"plus", "minus"}, "coefficients")

        def side(name):
            value = _need(raw, name, "coefficients")
            arr = np.asarray(value, dtype=float)
            if arr.ndim == 1:
                if arr.size < 2:
                    raise ValidationError(
                        f"coefficients.{name}: need at least 2 diagonal entries")
                return tuple(float(x) for x in arr)
            if arr.ndim != 2:
                raise ValidationError(
                    f"coefficients.{name}: expected a vector or a matrix")
            return tuple(tuple(float(x) for x in row) for row in arr)

        return cls(plus=side("plus"), minus=side("minus"))

    def model(self) -> ModelCoefficients:
        def matrix(entries):
            arr = np.asarray(entries, dtype=float)
            return np.diag(arr) if arr.ndim == 1 else arr
        return ModelCoefficients(matrix(self.plus), matrix(self.minus))


@dataclass(frozen=True)
class WeightConfig:
    alpha_plus: float
    alpha_minus: float
    beta: float | None  # None means "auto"

    @classmethod
    def from_dict(cls, raw: dict) -> "WeightConfig":
        _check_keys(raw, {"alpha_plus", "alpha_minus", "beta"}, "weight")
        ap = _as_float(_need(raw, "alpha_plus", "weight"), "weight.alpha_plus")
        am = _as_float(_need(raw, "alpha_minus", "weight"), "weight.alpha_minus")
        if ap <= 0:
            raise ValidationError(f"weight.alpha_plus: must be positive, got {ap}")
        if am <= 0:
            raise ValidationError(f"weight.alpha_minus: must be positive, got {am}")
        beta_raw = raw.get("beta", "auto")
        if beta_raw == "auto":
            beta = None
        else:
            beta = _as_float(beta_raw, "weight.beta")
            if beta < 0:
                raise ValidationError(f"weight.beta: must be nonnegative, got {beta}")
        return cls(alpha_plus=ap, alpha_minus=am, beta=beta)


@dataclass(frozen=True)
class GridConfig:
    x_min: float = -0.3
    x_max: float = 0.3
    n_points: int = 601

    @classmethod
    def from_dict(cls, raw: dict) -> "GridConfig":
        _check_keys(raw, {"x_min", "x_max", "n_points"}, "grid")
        kwargs = {}
        if "x_min" in raw:
            kwargs["x_min"] = _as_float(raw["x_min"], "grid.x_min")
        if "x_max" in raw:
            kwargs["x_max"] = _as_float(raw["x_max"], "grid.x_max")
        if "n_points" in raw:
            kwargs["n_points"] = _as_int(raw["n_points"], "grid.n_points")
        return cls(**kwargs)


@dataclass(frozen=True)
class SweepConfig:
    tau: tuple

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        _check_keys(raw, {"tau"}, "sweep")
        value = _need(raw, "tau", "sweep")
        if isinstance(value, dict):
            _check_keys(value, {"start", "stop", "count", "spacing"}, "sweep.tau")
            start = _as_float(_need(value, "start", "sweep.tau"), "sweep.tau.start")
            stop = _as_float(_need(value, "stop", "sweep.tau"), "sweep.tau.stop")
            count = _as_int(_need(value, "count", "sweep.tau"), "sweep.tau.count")
            spacing = value.get("spacing", "geometric")
            if spacing not in ("geometric", "linear"):
                raise ValidationError(
                    f"sweep.tau.spacing: expected geometric|linear, got {spacing!r}")
            if count < 2 or start <= 0 or stop <= start:
                raise ValidationError("sweep.tau: need 0 < start < stop and count >= 2")
            if spacing == "geometric":
                taus = np.geomspace(start, stop, count)
            else:
                taus = np.linspace(start, stop, count)
            return cls(tau=tuple(round(float(t), 12) for t in taus))
        taus = [_as_float(t, "sweep.tau[]") for t in value]
        if not taus or any(t <= 0 for t in taus):
            raise ValidationError("sweep.tau: need a nonempty list of positive values")
        return cls(tau=tuple(taus))


@dataclass(frozen=True)
class RayConfig:
    direction: tuple = (1.0,)
    ratio: float = 0.5

    @classmethod
    def from_dict(cls, raw: dict) -> "RayConfig":
        _check_keys(raw, {"direction", "ratio"}, "ray")
        kwargs = {}
        if "direction" in raw:
            d = tuple(_as_float(x, "ray.direction[]") for x in raw["direction"])
            if not d or all(x == 0 for x in d):
                raise ValidationError("ray.direction: must be a nonzero vector")
            kwargs["direction"] = d
        if "ratio" in raw:
            ratio = _as_float(raw["ratio"], "ray.ratio")
            if ratio <= 0:
                raise ValidationError(f"ray.ratio: must be positive, got {ratio}")
            kwargs["ratio"] = ratio
        return cls(**kwargs)


@dataclass(frozen=True)
class QuasimodeConfig:
    gamma: float = 10.0
    cutoff_width: float = 0.05
    xi_nodes: int = 128
    xn_nodes_per_scale: int = 64

    @classmethod
    def from_dict(cls, raw: dict) -> "QuasimodeConfig":
        _check_keys(raw, {"gamma", "cutoff_width", "xi_nodes", "xn_nodes_per_scale"},
                    "quasimode")
        kwargs = {}
        if "gamma" in raw:
            kwargs["gamma"] = _as_float(raw["gamma"], "quasimode.gamma")
            if kwargs["gamma"] < 1:
                raise ValidationError("quasimode.gamma: must be >= 1")
        if "cutoff_width" in raw:
            kwargs["cutoff_width"] = _as_float(raw["cutoff_width"],
                                               "quasimode.cutoff_width")
        if "xi_nodes" in raw:
            kwargs["xi_nodes"] = _as_int(raw["xi_nodes"], "quasimode.xi_nodes")
        if "xn_nodes_per_scale" in raw:
            kwargs["xn_nodes_per_scale"] = _as_int(raw["xn_nodes_per_scale"],
                                                   "quasimode.xn_nodes_per_scale")
        return cls(**kwargs)


@dataclass(frozen=True)
class RegionsConfig:
    tau_min: float = 10.0
    tau_max: float = 100.0
    n_tau: int = 200
    xi_max: float = 100.0
    n_xi: int = 200
    sigma0: float | None = None
    sigma: float | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "RegionsConfig":
        _check_keys(raw, {"tau_min", "tau_max", "n_tau", "xi_max", "n_xi",
                          "sigma0", "sigma"}, "regions")
        kwargs = {}
        for name in ("tau_min", "tau_max", "xi_max", "sigma0", "sigma"):
            if name in raw and raw[name] is not None:
                kwargs[name] = _as_float(raw[name], f"regions.{name}")
        for name in ("n_tau", "n_xi"):
            if name in raw:
                kwargs[name] = _as_int(raw[name], f"regions.{name}")
        return cls(**kwargs)


@dataclass(frozen=True)
class EstimateConfig:
    n_samples: int = 1000
    smoothness: int = 3

    @classmethod
    def from_dict(cls, raw: dict) -> "EstimateConfig":
        _check_keys(raw, {"n_samples", "smoothness"}, "estimate")
        kwargs = {}
        if "n_samples" in raw:
            kwargs["n_samples"] = _as_int(raw["n_samples"], "estimate.n_samples")
        if "smoothness" in raw:
            kwargs["smoothness"] = _as_int(raw["smoothness"], "estimate.smoothness")
        return cls(**kwargs)


@dataclass(frozen=True)
class FactorsConfig:
    lam: float = 3.0
    slope: float = 1.0
    n_omega: int = 20
    n_grid: int = 400
    halvings: int = 3
    t_max: float = 10.0

    @classmethod
    def from_dict(cls, raw: dict) -> "FactorsConfig":
        _check_keys(raw, {"lam", "slope", "n_omega", "n_grid", "halvings", "t_max"},
                    "factors")
        kwargs = {}
        for name in ("lam", "slope", "t_max"):
            if name in raw:
                kwargs[name] = _as_float(raw[name], f"factors.{name}")
        for name in ("n_omega", "n_grid", "halvings"):
            if name in raw:
                kwargs[name] = _as_int(raw[name], f"factors.{name}")
        return cls(**kwargs)


@dataclass(frozen=True)
class SubellipticityConfig:
    n_points: int = 1000
    delta: float = 0.1
    c_prime: float = 0.1

    @classmethod
    def from_dict(cls, raw: dict) -> "SubellipticityConfig":
        _check_keys(raw, {"n_points", "delta", "c_prime"}, "subellipticity")
        kwargs = {}
        if "n_points" in raw:
            kwargs["n_points"] = _as_int(raw["n_points"], "subellipticity.n_points")
        for name in ("delta", "c_prime"):
            if name in raw:
                kwargs[name] = _as_float(raw[name], f"subellipticity.{name}")
        return cls(**kwargs)


@dataclass(frozen=True)
class ExperimentConfig:
    coefficients: CoefficientsConfig
    weight: WeightConfig
    grid: GridConfig = field(default_factory=GridConfig)
    sweep: SweepConfig = field(default_factory=lambda: SweepConfig(
        tau=(50.0, 71.0, 100.0, 141.0, 200.0, 283.0, 400.0)))
    ray: RayConfig = field(default_factory=RayConfig)
    quasimode: QuasimodeConfig = field(default_factory=QuasimodeConfig)
    regions: RegionsConfig = field(default_factory=RegionsConfig)
    estimate: EstimateConfig = field(default_factory=EstimateConfig)
    factors: FactorsConfig = field(default_factory=FactorsConfig)
    subellipticity: SubellipticityConfig = field(default_factory=SubellipticityConfig)
    seed: int = 12345
    output: str = "out"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        _check_keys(raw, {"coefficients", "weight", "grid", "sweep", "ray",
                          "quasimode", "regions", "estimate", "factors",
                          "subellipticity", "seed", "output"}, "config")
        kwargs = {
            "coefficients": CoefficientsConfig.from_dict(
                _need(raw, "coefficients", "config")),
            "weight": WeightConfig.from_dict(_need(raw, "weight", "config")),
        }
        for name, parser in (("grid", GridConfig), ("sweep", SweepConfig),
                             ("ray", RayConfig), ("quasimode", QuasimodeConfig),
                             ("regions", RegionsConfig), ("estimate", EstimateConfig),
                             ("factors", FactorsConfig),
                             ("subellipticity", SubellipticityConfig)):
            if name in raw:
                kwargs[name] = parser.from_dict(raw[name])
        if "seed" in raw:
            kwargs["seed"] = _as_int(raw["seed"], "config.seed")
        if "output" in raw:
            if not isinstance(raw["output"], str):
                raise ValidationError("config.output: expected a path string")
            kwargs["output"] = raw["output"]
        return cls(**kwargs)

    def canonical_dict(self) -> dict:
        raw = asdict(self)
        raw["weight"]["beta"] = "auto" if self.weight.beta is None else self.weight.beta

        def clean(obj):
            if isinstance(obj, dict):
                return {k: clean(v) for k, v in sorted(obj.items())}
            if isinstance(obj, tuple):
                return [clean(v) for v in obj]
            return obj
        return clean(raw)

    def canonical_yaml(self) -> str:
        return yaml.safe_dump(self.canonical_dict(), sort_keys=True)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config: file not found: {path}")
    except yaml.YAMLError as exc:
        raise ValidationError(f"config: invalid YAML in {path}: {exc}")
    if not isinstance(raw, dict):
        raise ValidationError("config: top level must be a mapping")
    return ExperimentConfig.from_dict(raw)


def parse_config(text: str) -> ExperimentConfig:
    raw = yaml.safe_load(text)
    if not isinstance(raw, dict):
        raise ValidationError("config: top level must be a mapping")
    return ExperimentConfig.from_dict(raw)
