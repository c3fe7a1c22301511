"""Training configuration and per-dataset hyperparameter presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

from .errors import ConfigError


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 1e-4                 # Adam learning rate
    alpha: float = 1.0               # node feature reconstruction weight
    gamma: float = 1.0               # edge feature reconstruction weight
    beta: float = 1e-4               # KL divergence weight
    pool_sizes: tuple = (20, 5)
    thresholds: tuple = (1.0 / 19.0, 1.0 / 5.0)
    latent_dim: int = 8
    hidden_dim: int = 96
    node_dim: int = 1
    edge_dim: int = 1
    seed: int = 0
    preset: str = ""

    def validate(self):
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        for name in ("alpha", "gamma", "beta"):
            if getattr(self, name) < 0:
                raise ConfigError(f"loss weight {name} must be non-negative")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if len(self.pool_sizes) != len(self.thresholds):
            raise ConfigError("pool_sizes and thresholds must align")
        return self

    def to_dict(self):
        d = asdict(self)
        d["pool_sizes"] = list(self.pool_sizes)
        d["thresholds"] = list(self.thresholds)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["pool_sizes"] = tuple(d.get("pool_sizes", (20, 5)))
        d["thresholds"] = tuple(d.get("thresholds", (1.0 / 19.0, 1.0 / 5.0)))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d).validate()


PRESETS = {
    "watts-strogatz": TrainConfig(
        epochs=5, alpha=0.0, gamma=10.0, beta=1e-5, lr=5e-5, preset="watts-strogatz"
    ),
    "smlm": TrainConfig(
        epochs=25, alpha=2.0, gamma=5.0, beta=1e-7, lr=1e-4, preset="smlm"
    ),
    "vicsek": TrainConfig(
        epochs=20, alpha=1.0, gamma=10.0, beta=1e-3, lr=1e-5, preset="vicsek"
    ),
    "brain": TrainConfig(
        epochs=10, alpha=2.0, gamma=5.0, beta=1e-4, lr=1e-4, preset="brain"
    ),
}


def preset_config(name, **overrides):
    """A copy of the named preset with field overrides applied."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}' (have {sorted(PRESETS)})")
    cfg = replace(PRESETS[name], **overrides)
    return cfg.validate()
