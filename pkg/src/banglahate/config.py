"""Layered run configuration: built-in defaults <- INI config file <- CLI flags.

The file format is flat typed key=value pairs under sections named after the
modules they configure.  Unknown sections or keys are rejected so typos fail
loudly.  The fully resolved configuration is echoed into every run manifest.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .model import ModelConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


# (section, key) -> (type tag, default). Type tags: int, float, bool, str, ints.
SCHEMA: dict[tuple[str, str], tuple[str, object]] = {
    ("run", "subtask"): ("str", "1A"),
    ("run", "seed"): ("int", 42),
    ("run", "output_dir"): ("str", "runs/latest"),
    ("run", "dev_fraction"): ("float", 0.1),
    ("encoder", "kind"): ("str", "stub"),
    ("encoder", "identifier"): ("str", ""),
    ("encoder", "weights_dir"): ("str", ""),
    ("encoder", "trainable"): ("bool", True),
    ("model", "d_embed"): ("int", 768),
    ("model", "gru_layers"): ("int", 2),
    ("model", "gru_hidden"): ("int", 128),
    ("model", "attn_heads"): ("int", 1),
    ("model", "cnn_kernels"): ("ints", (1, 2, 3)),
    ("model", "cnn_filters"): ("int", 128),
    ("model", "fusion_dim"): ("int", 128),
    ("model", "dropout"): ("float", 0.3),
    ("model", "grad_clip_norm"): ("float", 1.0),
    ("training", "batch_size"): ("int", 16),
    ("training", "learning_rate"): ("float", 1e-5),
    ("training", "max_epochs"): ("int", 10),
    ("training", "patience"): ("int", 3),
    ("training", "use_class_weights"): ("bool", False),
}

_VALID_SUBTASKS = ("1A", "1B")
_VALID_KINDS = ("pretrained", "stub")


def _parse_value(section: str, key: str, raw: str):
    tag, _ = SCHEMA[(section, key)]
    raw = raw.strip()
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "bool":
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if tag == "ints":
            return tuple(int(p) for p in raw.split(",") if p.strip())
        return raw
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {tag}") from None


class RunConfig:
    """Fully resolved configuration, queryable by (section, key)."""

    def __init__(self, values: dict[tuple[str, str], object]):
        self._values = values

    def get(self, section: str, key: str):
        return self._values[(section, key)]

    @property
    def subtask(self) -> str:
        return str(self.get("run", "subtask")).upper()

    @property
    def seed(self) -> int:
        return int(self.get("run", "seed"))

    def as_dict(self) -> dict:
        out: dict[str, dict] = {}
        for (section, key), value in sorted(self._values.items()):
            if isinstance(value, tuple):
                value = list(value)
            out.setdefault(section, {})[key] = value
        return out

    def model_config(self, num_labels: int) -> ModelConfig:
        return ModelConfig(
            d_embed=self.get("model", "d_embed"),
            gru_layers=self.get("model", "gru_layers"),
            gru_hidden=self.get("model", "gru_hidden"),
            attn_heads=self.get("model", "attn_heads"),
            cnn_kernels=self.get("model", "cnn_kernels"),
            cnn_filters=self.get("model", "cnn_filters"),
            fusion_dim=self.get("model", "fusion_dim"),
            dropout=self.get("model", "dropout"),
            num_labels=num_labels,
            grad_clip_norm=self.get("model", "grad_clip_norm"),
            seed=self.seed,
        )

    def train_config(self) -> TrainConfig:
        max_epochs = self.get("training", "max_epochs")
        # patience can never exceed the epoch budget; clamp so that e.g.
        # `--max-epochs 1` works with the default patience untouched
        patience = min(self.get("training", "patience"), max_epochs)
        try:
            return TrainConfig(
                batch_size=self.get("training", "batch_size"),
                learning_rate=self.get("training", "learning_rate"),
                max_epochs=max_epochs,
                patience=patience,
                grad_clip_norm=self.get("model", "grad_clip_norm"),
                use_class_weights=self.get("training", "use_class_weights"),
                seed=self.seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def load_run_config(
    path: str | Path | None = None,
    overrides: dict[tuple[str, str], object] | None = None,
) -> RunConfig:
    """Resolve configuration in order: defaults, then file, then overrides."""
    values: dict[tuple[str, str], object] = {k: v for k, (_, v) in SCHEMA.items()}

    if path is not None:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"config file not found: {p}")
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keys are case-sensitive
        try:
            parser.read_string(p.read_text(encoding="utf-8"), source=str(p))
        except configparser.Error as exc:
            raise ConfigError(f"{p}: {exc}") from None
        for section in parser.sections():
            for key, raw in parser.items(section):
                if (section, key) not in SCHEMA:
                    raise ConfigError(f"{p}: unknown config key [{section}] {key}")
                values[(section, key)] = _parse_value(section, key, raw)

    if overrides:
        for (section, key), value in overrides.items():
            if (section, key) not in SCHEMA:
                raise ConfigError(f"unknown override [{section}] {key}")
            if value is not None:
                values[(section, key)] = value

    subtask = str(values[("run", "subtask")]).upper()
    if subtask not in _VALID_SUBTASKS:
        raise ConfigError(f"[run] subtask must be one of {_VALID_SUBTASKS}, got {subtask!r}")
    values[("run", "subtask")] = subtask
    kind = values[("encoder", "kind")]
    if kind not in _VALID_KINDS:
        raise ConfigError(f"[encoder] kind must be one of {_VALID_KINDS}, got {kind!r}")
    frac = values[("run", "dev_fraction")]
    if not (0.0 < float(frac) < 1.0):
        raise ConfigError(f"[run] dev_fraction must be in (0, 1), got {frac}")
    return RunConfig(values)
