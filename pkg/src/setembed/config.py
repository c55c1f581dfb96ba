"""Run configuration: flat `key=value` files with dotted keys and # comments.

The schema below is the single source of truth for keys, defaults, and value
parsing. Unknown keys are rejected by name; the effective configuration
(defaults, then file, then overrides) can be echoed back out in a form that
reparses to the same values.
"""

from __future__ import annotations

import os

from .errors import ConfigError
from .losses import LossWeights
from .model import LrSchedule
from .setparams import SvmConfig, UpdateSchedule
from .trainer import SET_TERMS, TrainConfig

SEED_ENV_VAR = "SETEMBED_SEED"


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int_list(text):
    text = text.strip()
    if not text:
        return ()
    return tuple(int(tok) for tok in text.split(","))


def _parse_str_list(text):
    text = text.strip()
    if not text:
        return ()
    return tuple(tok.strip() for tok in text.split(","))


def _identity(text):
    return text.strip()


# key -> (parser, default)
SCHEMA = {
    "seed": (int, 0),
    "layer_dims": (_parse_int_list, (10, 32, 8)),
    "batch_size": (int, 64),
    "epochs": (int, 30),
    "pretrain_epochs": (int, 15),
    "weight_decay": (float, 0.0005),
    "balanced": (_parse_bool, False),
    "freeze_backbone": (_parse_bool, False),
    "enabled_set_terms": (_parse_str_list, SET_TERMS),
    "lr.base_rate": (float, 0.001),
    "lr.drop_epochs": (_parse_int_list, (15, 25)),
    "lr.drop_factor": (float, 0.1),
    "weights.softmax_weight": (float, 1.0),
    "weights.lambda_M": (float, 0.03),
    "weights.lambda_P": (float, 0.03),
    "weights.lambda_C": (float, 0.0001),
    "update.offline_period_iters": (int, 500),
    "update.online_alpha": (float, 0.01),
    "update.per_class_offline_samples": (int, 50),
    "update.min_pos_online": (int, 2),
    "update.mode": (_identity, "both"),
    "svm.C": (float, 1.0),
    "svm.tol": (float, 1e-4),
    "svm.max_iter": (int, 1000),
    "eval.pair_count": (int, 200),
    "eval.pair_seed": (int, 0),
    "data.train_csv": (_identity, ""),
    "data.eval_csv": (_identity, ""),
    "data.generator": (_identity, "blobs"),
    "data.class_count": (int, 20),
    "data.per_class": (int, 30),
    "data.dim": (int, 10),
    "data.spread": (float, 1.0),
    "data.separation": (float, 6.0),
    "data.seed": (int, 1),
    "data.eval_class_count": (int, 8),
    "data.eval_per_class": (int, 20),
    "data.eval_seed": (int, 1001),
}


def parse_value(key, text):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    parser, _ = SCHEMA[key]
    try:
        return parser(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from None


def load_config_file(path):
    """Parse one file into a {key: value} dict; unknown keys are errors."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_number}: expected key=value")
            key, _, text = line.partition("=")
            key = key.strip()
            values[key] = parse_value(key, text)
    return values


def resolve_config(file_values=None, overrides=None, use_env=True):
    """defaults <- file <- SETEMBED_SEED env var <- command-line overrides."""
    values = {key: default for key, (_, default) in SCHEMA.items()}
    if file_values:
        values.update(file_values)
    if use_env and os.environ.get(SEED_ENV_VAR):
        try:
            values["seed"] = int(os.environ[SEED_ENV_VAR])
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer") from None
    if overrides:
        for key, text in overrides:
            values[key] = parse_value(key, text)
    return values


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(values) -> str:
    """Render values as a config file that reparses to the same settings."""
    lines = [f"{key}={format_value(values[key])}" for key in sorted(values)]
    return "\n".join(lines) + "\n"


def build_train_config(values, class_count) -> TrainConfig:
    epochs = values["epochs"]
    drops = tuple(d for d in values["lr.drop_epochs"] if d <= epochs)
    return TrainConfig(
        layer_dims=values["layer_dims"],
        class_count=class_count,
        batch_size=values["batch_size"],
        epochs=epochs,
        pretrain_epochs=values["pretrain_epochs"],
        lr=LrSchedule(base_rate=values["lr.base_rate"], drop_epochs=drops,
                      drop_factor=values["lr.drop_factor"], final_epoch=epochs),
        weights=LossWeights(
            softmax_weight=values["weights.softmax_weight"],
            lambda_M=values["weights.lambda_M"],
            lambda_P=values["weights.lambda_P"],
            lambda_C=values["weights.lambda_C"],
        ),
        update=UpdateSchedule(
            offline_period_iters=values["update.offline_period_iters"],
            online_alpha=values["update.online_alpha"],
            per_class_offline_samples=values["update.per_class_offline_samples"],
            min_pos_online=values["update.min_pos_online"],
            mode=values["update.mode"],
        ),
        svm=SvmConfig(C=values["svm.C"], tol=values["svm.tol"],
                      max_iter=values["svm.max_iter"]),
        seed=values["seed"],
        enabled_set_terms=values["enabled_set_terms"],
        weight_decay=values["weight_decay"],
        balanced=values["balanced"],
        freeze_backbone=values["freeze_backbone"],
    )
