"""Experiment configuration: JSON parsing with strict unknown-key rejection."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .qcore import NoiseModel


class ConfigError(ValueError):
    """Raised with the offending key path on schema violations."""


DEFAULT_MITIGATION = ("measurement_averaging", "channel_inversion", "calibration")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    n_clients: int = 5
    samples_per_client: int = 200
    test_samples: int = 600
    skew: float = 0.7
    classes: int = 3
    feature_dim: int = 4
    class_sep: float = 2.0
    rounds: int = 50
    local_epochs: int = 5
    lr: float = 0.1
    strategies: tuple = ("fedavg", "qfl", "nrqfl")
    noise: NoiseModel = field(default_factory=lambda: NoiseModel(p_depol=0.05, gamma=0.03))
    shots: int = 4096
    repeats: int = 3
    mitigation: tuple = DEFAULT_MITIGATION
    n_servers: int = 1
    selection_m: int | None = None
    fixed_weight_bound: float = 4.0
    exact_expectation: bool = False
    record_timing: bool = False
    out_dir: str = "results"

    def __post_init__(self):
        counts = {
            "n_clients": self.n_clients,
            "samples_per_client": self.samples_per_client,
            "test_samples": self.test_samples,
            "classes": self.classes,
            "feature_dim": self.feature_dim,
            "local_epochs": self.local_epochs,
            "shots": self.shots,
            "repeats": self.repeats,
            "n_servers": self.n_servers,
        }
        for name, v in counts.items():
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {v!r}")
        if not isinstance(self.rounds, int) or self.rounds < 0:
            raise ConfigError(f"rounds must be an integer >= 0, got {self.rounds!r}")
        if not 0.0 <= self.skew <= 1.0:
            raise ConfigError(f"skew must be in [0, 1], got {self.skew}")
        if self.lr <= 0 or self.class_sep <= 0 or self.fixed_weight_bound <= 0:
            raise ConfigError("lr, class_sep and fixed_weight_bound must be positive")
        strategies = tuple(self.strategies)
        if not strategies or any(s not in ("fedavg", "qfl", "nrqfl") for s in strategies):
            raise ConfigError(f"strategies must be a non-empty subset of fedavg/qfl/nrqfl, got {strategies}")
        object.__setattr__(self, "strategies", strategies)
        object.__setattr__(self, "mitigation", tuple(self.mitigation))
        if self.selection_m is not None and not 1 <= self.selection_m <= self.n_clients:
            raise ConfigError(f"selection_m must be in 1..n_clients, got {self.selection_m}")

    def replace(self, **kwargs) -> "ExperimentConfig":
        import dataclasses

        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        n = d.pop("noise")
        d["noise"] = {"p_depol": n.p_depol, "p_deph": n.p_deph, "gamma": n.gamma, "readout_flip": n.readout_flip}
        d["strategies"] = list(self.strategies)
        d["mitigation"] = list(self.mitigation)
        return d


_NOISE_KEYS = {"p_depol", "p_deph", "gamma", "readout_flip"}


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a validated config; unknown keys are rejected with their path."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key: {key}")
        if key == "noise":
            if not isinstance(value, dict):
                raise ConfigError("noise must be an object")
            for nk, nv in value.items():
                if nk not in _NOISE_KEYS:
                    raise ConfigError(f"unknown config key: noise.{nk}")
                if not isinstance(nv, (int, float)) or not 0.0 <= nv <= 1.0:
                    raise ConfigError(f"noise.{nk} must be a probability in [0, 1], got {nv!r}")
            kwargs["noise"] = NoiseModel(**value)
        elif key in ("strategies", "mitigation"):
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{key} must be a list")
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    """Load JSON config (or defaults when path is None) and apply CLI overrides."""
    data: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {p}: {exc}") from exc
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(data)
