"""Run configuration loading (JSON or TOML) with strict key checking.

Unknown keys are rejected so ablation experiments cannot silently typo a
toggle.  Every field has a documented default matching the training recipe.
"""

from __future__ import annotations

import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .losses import LossWeights
from .trainer import AugmentConfig, TrainConfig


class ConfigError(ValueError):
    pass


_TOP_KEYS = {
    "epochs", "batch_size", "lr_schedule", "betas", "eps", "seed",
    "augment", "lambda_wb", "use_convwb", "use_convcc", "use_cst",
    "grad_clip",
}
_AUG_KEYS = {"brightness", "contrast"}


def parse_config(doc: dict) -> TrainConfig:
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key in ("epochs", "batch_size", "eps", "seed",
                "use_convwb", "use_convcc", "use_cst", "grad_clip"):
        if key in doc:
            kwargs[key] = doc[key]
    if "lr_schedule" in doc:
        kwargs["lr_schedule"] = tuple((int(e), float(lr))
                                      for e, lr in doc["lr_schedule"])
    if "betas" in doc:
        b = doc["betas"]
        if len(b) != 2:
            raise ConfigError("betas must be a pair")
        kwargs["betas"] = (float(b[0]), float(b[1]))
    if "augment" in doc:
        unknown = set(doc["augment"]) - _AUG_KEYS
        if unknown:
            raise ConfigError(f"unknown augment keys: {sorted(unknown)}")
        kwargs["augment"] = AugmentConfig(**doc["augment"])
    if "lambda_wb" in doc:
        try:
            kwargs["loss_weights"] = LossWeights(float(doc["lambda_wb"]))
        except ValueError as e:
            raise ConfigError(str(e))
    try:
        return TrainConfig(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e))


def load_config(path) -> TrainConfig:
    path = str(path)
    if path.endswith(".toml"):
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    elif path.endswith(".json"):
        with open(path) as f:
            doc = json.load(f)
    else:
        raise ConfigError(f"config must be .json or .toml, got {path!r}")
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a table/object")
    return parse_config(doc)
