"""Flat key-value run configuration for the CLI.

Config files are plain `key = value` lines with `#` comments; no nesting.
A run config covers the loss, optimizer schedule, model layer sizes, and the
dataset the training command should build or load.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .data import Dataset, SplitSpec, gaussian_blobs, load_idx, split
from .objectives import DEFAULT_TAU, LOSS_NAMES, LossKind
from .trainer import TrainConfig


class ConfigError(ValueError):
    """Raised with the offending key named."""


def parse_kv_file(path) -> dict[str, str]:
    pairs: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            if not eq:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key = key.strip()
            value = value.strip()
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            if key in pairs:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            pairs[key] = value
    return pairs


def _get_int(pairs, key, default=None):
    if key not in pairs:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(pairs[key])
    except ValueError:
        raise ConfigError(f"key {key!r}: expected an integer, got {pairs[key]!r}") from None


def _get_float(pairs, key, default=None):
    if key not in pairs:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(pairs[key])
    except ValueError:
        raise ConfigError(f"key {key!r}: expected a number, got {pairs[key]!r}") from None


def _get_bool(pairs, key, default: bool) -> bool:
    if key not in pairs:
        return default
    value = pairs[key].lower()
    if value in ("true", "1", "yes", "on"):
        return True
    if value in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"key {key!r}: expected true/false, got {pairs[key]!r}")


_KNOWN_KEYS = {
    "loss", "tau", "detach_scale",
    "epochs", "batch_size", "lr", "momentum", "weight_decay", "schedule", "seed",
    "layers",
    "data",
    "blob_classes", "blob_dim", "blob_n_per_class", "blob_radius", "blob_std",
    "idx_images", "idx_labels",
    "train_fraction",
}


@dataclass
class RunConfig:
    train: TrainConfig
    layers: tuple[int, ...]
    data_kind: str
    pairs: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def build_data(self) -> tuple[Dataset, Dataset]:
        """Materialize (train, validation) datasets from the config."""
        pairs = self.pairs
        fraction = _get_float(pairs, "train_fraction", 0.9)
        if self.data_kind == "blobs":
            full = gaussian_blobs(
                c=_get_int(pairs, "blob_classes", 4),
                d=_get_int(pairs, "blob_dim", 2),
                n_per_class=_get_int(pairs, "blob_n_per_class", 500),
                radius=_get_float(pairs, "blob_radius", 4.0),
                std=_get_float(pairs, "blob_std", 0.5),
                seed=self.train.seed,
            )
        elif self.data_kind == "idx":
            if "idx_images" not in pairs or "idx_labels" not in pairs:
                raise ConfigError("data = idx requires keys 'idx_images' and 'idx_labels'")
            full = load_idx(pairs["idx_images"], pairs["idx_labels"])
        else:
            raise ConfigError(f"key 'data': unknown kind {self.data_kind!r} (blobs or idx)")
        return split(full, SplitSpec(train_fraction=fraction, seed=self.train.seed))


def load_run_config(path, seed_override: int | None = None) -> RunConfig:
    pairs = parse_kv_file(path)
    unknown = set(pairs) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")

    loss_name = pairs.get("loss")
    if loss_name is None:
        raise ConfigError("missing required key 'loss'")
    if loss_name not in LOSS_NAMES:
        raise ConfigError(
            f"key 'loss': unknown loss {loss_name!r}; valid losses: "
            + ", ".join(LOSS_NAMES)
        )
    warnings: list[str] = []
    tau = _get_float(pairs, "tau", DEFAULT_TAU)
    if loss_name == "elogitnorm" and "tau" in pairs:
        warnings.append(
            "key 'tau' is ignored: the elogitnorm objective is hyperparameter-free"
        )
        tau = DEFAULT_TAU
    kind = LossKind(name=loss_name, tau=tau)

    seed = _get_int(pairs, "seed", 0)
    if seed_override is not None:
        seed = seed_override
    try:
        train_cfg = TrainConfig(
            loss=kind,
            epochs=_get_int(pairs, "epochs"),
            batch_size=_get_int(pairs, "batch_size", 128),
            lr=_get_float(pairs, "lr", 0.1),
            momentum=_get_float(pairs, "momentum", 0.9),
            weight_decay=_get_float(pairs, "weight_decay", 5e-4),
            schedule=pairs.get("schedule", "cosine"),
            seed=seed,
            detach_scale=_get_bool(pairs, "detach_scale", False),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    layers_text = pairs.get("layers")
    if layers_text is None:
        raise ConfigError("missing required key 'layers'")
    try:
        layers = tuple(int(s) for s in layers_text.replace(" ", "").split(","))
    except ValueError:
        raise ConfigError(f"key 'layers': expected comma-separated integers, got {layers_text!r}") from None
    if len(layers) < 2:
        raise ConfigError("key 'layers': need at least input and class sizes")

    data_kind = pairs.get("data", "blobs")
    return RunConfig(
        train=train_cfg,
        layers=layers,
        data_kind=data_kind,
        pairs=pairs,
        warnings=warnings,
    )
