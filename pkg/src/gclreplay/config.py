"""Dataclass configs and the flat key=value config-file format.

File keys mirror the benchmark's conventional symbol names (beta, lambda,
n_add, k_cand, tau, r, buffer_size) so a config file reads like the
hyperparameter table of a paper. Unset values fall back to the Cora-scale
operating point: beta 0.1, lambda 0.5, N 5, K 50, tau 0.8, r 0.3, buffer 100,
learning rate 0.005.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError


@dataclass
class TrainConfig:
    """Per-run training knobs for the classifier and link predictor."""

    hidden_dim: int = 64
    num_layers: int = 2
    heads: int = 1
    epochs_cls: int = 200
    epochs_lp: int = 100
    learning_rate: float = 0.005
    lambda_: float = 0.5
    beta: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.num_layers < 1:
            raise ConfigError("num_layers must be >= 1")
        if self.heads != 1:
            raise ConfigError("only a single attention head is supported")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ConfigError("lambda must lie in [0,1]")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError("beta must lie in [0,1]")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")


METHODS = ("dslr", "cd_only", "mf", "cm", "random", "clustering", "sl_only",
           "homophily_boost")

# attribute name -> (file key, type)
_FIELD_KEYS = {
    "dataset": ("dataset", str),
    "method": ("method", str),
    "buffer_size": ("buffer_size", int),
    "beta": ("beta", float),
    "lambda_": ("lambda", float),
    "n_add": ("n_add", int),
    "k_cand": ("k_cand", int),
    "tau": ("tau", float),
    "r": ("r", float),
    "sl_ratio": ("sl_ratio", float),
    "classes_per_task": ("classes_per_task", int),
    "num_tasks": ("num_tasks", int),
    "hidden_dim": ("hidden_dim", int),
    "num_layers": ("num_layers", int),
    "heads": ("heads", int),
    "epochs_cls": ("epochs_cls", int),
    "epochs_lp": ("epochs_lp", int),
    "learning_rate": ("learning_rate", float),
    "seeds": ("seeds", int),
    "seed_base": ("seed_base", int),
    "output": ("output", str),
}
_KEY_FIELDS = {key: (attr, typ) for attr, (key, typ) in _FIELD_KEYS.items()}


@dataclass
class ExperimentConfig:
    """Everything one benchmark run needs, file- and flag-addressable."""

    dataset: str = ""
    method: str = "dslr"
    buffer_size: int = 100
    beta: float = 0.1
    lambda_: float = 0.5
    n_add: int = 5
    k_cand: int = 50
    tau: float = 0.8
    r: float = 0.3
    sl_ratio: float = 1.0
    classes_per_task: int = 2
    num_tasks: int = 3
    hidden_dim: int = 64
    num_layers: int = 2
    heads: int = 1
    epochs_cls: int = 200
    epochs_lp: int = 100
    learning_rate: float = 0.005
    seeds: int = 10
    seed_base: int = 0
    output: str = "report.json"

    def validate(self) -> "ExperimentConfig":
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r} (choose from {METHODS})")
        if self.buffer_size < 1:
            raise ConfigError("buffer_size must be >= 1")
        for name in ("beta", "lambda_", "tau", "sl_ratio"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name.rstrip('_')} must lie in [0,1], got {v}")
        if self.r <= 0:
            raise ConfigError("r must be positive")
        if self.n_add < 0:
            raise ConfigError("n_add must be >= 0")
        if self.k_cand < 1:
            raise ConfigError("k_cand must be >= 1")
        if self.n_add > self.k_cand:
            raise ConfigError("n_add cannot exceed k_cand")
        if self.classes_per_task < 1 or self.num_tasks < 1:
            raise ConfigError("classes_per_task and num_tasks must be >= 1")
        if self.seeds < 1:
            raise ConfigError("need at least one seed")
        # reuse TrainConfig's checks for the overlapping fields
        self.train_config(self.seed_base)
        return self

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            hidden_dim=self.hidden_dim,
            num_layers=self.num_layers,
            heads=self.heads,
            epochs_cls=self.epochs_cls,
            epochs_lp=self.epochs_lp,
            learning_rate=self.learning_rate,
            lambda_=self.lambda_,
            beta=self.beta,
            seed=seed,
        )

    def seed_list(self) -> list[int]:
        return list(range(self.seed_base, self.seed_base + self.seeds))

    # -- key=value file round trip ---------------------------------------
    def to_text(self) -> str:
        lines = []
        for attr, (key, _) in _FIELD_KEYS.items():
            lines.append(f"{key} = {getattr(self, attr)}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in _KEY_FIELDS:
                raise ConfigError(f"line {lineno}: unknown config key {key!r}")
            attr, typ = _KEY_FIELDS[key]
            try:
                values[attr] = typ(val)
            except ValueError:
                raise ConfigError(
                    f"line {lineno}: cannot parse {val!r} as {typ.__name__} for {key!r}"
                ) from None
        return cls(**values)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        return cls.from_text(p.read_text())

    def override(self, **updates) -> "ExperimentConfig":
        """New config with the given non-None fields replaced."""
        clean = {k: v for k, v in updates.items() if v is not None}
        return dataclasses.replace(self, **clean)

    def as_dict(self) -> dict:
        return {key: getattr(self, attr) for attr, (key, _) in _FIELD_KEYS.items()}
