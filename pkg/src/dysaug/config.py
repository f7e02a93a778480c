"""Pipeline configuration: one YAML file, dotted ``--key=value`` overrides, and a
closed set of fields. Anything not listed in :data:`DEFAULTS` is rejected."""
from __future__ import annotations

import copy
import os
from pathlib import Path

import yaml

from .errors import ConfigError

TAGS = ("T", "S", "TG", "SG", "SBG", "SBG+SG")
LAMBDA_GRID = (0.001, 0.01, 0.1, 0.2, 1.0, 2.0, 5.0)
SEED_ENV = "DYSAUG_SEED"

DEFAULTS = {
    "seed": 0,
    "manifest": None,
    "alignments": None,
    "profiles": None,
    "features": None,
    "output": None,
    "target_speakers": None,
    "mel": {"n_mels": 40, "fft_len": 512, "frame_len": 400, "frame_hop": 160,
            "fmin": 20.0, "fmax": 7600.0, "log_floor": 1e-10},
    "wsola": {"frame_len": 512, "analysis_hop": 128, "delta_max": 126},
    "silence_labels": ["sil", "sp", "spn", "noise"],
    "si_factors": [0.9, 1.0, 1.1],
    "perturb": {"mode": "speed", "factors": "si"},
    "pairing": {"strategy": "rand"},
    "lambda": 0.2,
    "tags": ["S"],
    "schedule": {"base_lr": 2e-4, "halve_every": 2500, "max_iters": 1000, "batch_size": 16,
                 "optimizer": "adam", "beta1": 0.5, "beta2": 0.999, "eps": 1e-8},
    "dcgan": {"window": 96, "loss": "non_saturating", "generator_init": "normal",
              "ema_decay": 0.0, "input": "speed", "checkpoints": None},
    "sbg": {"loss": "literal", "checkpoint": None},
    "sweep": {"grid": list(LAMBDA_GRID)},
}

# fields whose value is a path that must exist when a command reads it
INPUT_PATHS = ("manifest", "alignments", "profiles", "features")

_CHOICES = {
    "perturb.mode": ("speed", "tempo"),
    "perturb.factors": ("si", "sd"),
    "pairing.strategy": ("rand", "avg", "exhaustive", "parallel"),
    "schedule.optimizer": ("adam", "sgd"),
    "dcgan.loss": ("non_saturating", "literal"),
    "dcgan.generator_init": ("normal", "identity"),
    "dcgan.input": ("speed", "tempo"),
    "sbg.loss": ("literal", "non_saturating"),
}


def _merge(base: dict, update: dict, prefix=""):
    for key, value in update.items():
        dotted = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"unknown config field {dotted!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config field {dotted!r} must be a mapping")
            _merge(base[key], value, dotted + ".")
        else:
            base[key] = value


def parse_override(text: str):
    """``--a.b=value`` -> (["a", "b"], parsed value). Values are read as YAML scalars/lists."""
    if not text.startswith("--") or "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form --key=value")
    key, raw = text[2:].split("=", 1)
    key = key.replace("-", "_")
    try:
        value = yaml.safe_load(raw) if raw != "" else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value of {key!r}: {exc}") from exc
    return key.split("."), value


def _nest(keys, value):
    out = value
    for k in reversed(keys):
        out = {k: out}
    return out


def load_config(path=None, overrides=(), environ=None) -> dict:
    """Defaults, then the YAML file, then overrides, then ``DYSAUG_SEED``; validated."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        try:
            doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        _resolve_relative(doc, path.parent)
        _merge(cfg, doc)
    for text in overrides:
        keys, value = parse_override(text)
        _merge(cfg, _nest(keys, value))
    environ = os.environ if environ is None else environ
    if environ.get(SEED_ENV, "") != "":
        try:
            cfg["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {environ[SEED_ENV]!r}") from None
    validate(cfg)
    return cfg


def _resolve_relative(doc, base: Path):
    # paths inside a config file are relative to the file, not the working directory
    for key in INPUT_PATHS + ("output",):
        if isinstance(doc.get(key), str) and not Path(doc[key]).is_absolute():
            doc[key] = str(base / doc[key])
    for section, key in (("dcgan", "checkpoints"), ("sbg", "checkpoint")):
        sub = doc.get(section)
        if isinstance(sub, dict) and isinstance(sub.get(key), str) and not Path(sub[key]).is_absolute():
            sub[key] = str(base / sub[key])


def get(cfg: dict, dotted: str):
    node = cfg
    for k in dotted.split("."):
        node = node[k]
    return node


def validate(cfg: dict):
    for dotted, allowed in _CHOICES.items():
        if get(cfg, dotted) not in allowed:
            raise ConfigError(f"{dotted} must be one of {allowed}, got {get(cfg, dotted)!r}")
    tags = cfg["tags"]
    if isinstance(tags, str):
        tags = [t.strip() for t in tags.split(",") if t.strip()]
        cfg["tags"] = tags
    bad = [t for t in tags if t not in TAGS]
    if bad:
        raise ConfigError(f"unknown augmentation tags {bad}; allowed {list(TAGS)}")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    for name in ("si_factors", "sweep.grid"):
        values = get(cfg, name)
        if not isinstance(values, list) or not all(isinstance(v, (int, float)) for v in values):
            raise ConfigError(f"{name} must be a list of numbers")
    ema = cfg["dcgan"]["ema_decay"]
    if not isinstance(ema, (int, float)) or not 0 <= ema < 1:
        raise ConfigError("dcgan.ema_decay must be a number in [0, 1)")
    if not isinstance(cfg["lambda"], (int, float)) or cfg["lambda"] < 0:
        raise ConfigError("lambda must be a non-negative number")
    spk = cfg["target_speakers"]
    if spk is not None and not (isinstance(spk, list) and all(isinstance(s, str) for s in spk)):
        raise ConfigError("target_speakers must be a list of speaker ids")
    for key, value in cfg["schedule"].items():
        if key != "optimizer" and not isinstance(value, (int, float)):
            raise ConfigError(f"schedule.{key} must be numeric")


def require(cfg: dict, *fields):
    """Check that the named fields are set and, for input paths, exist on disk."""
    for dotted in fields:
        value = get(cfg, dotted)
        if value in (None, ""):
            raise ConfigError(f"{dotted} is required for this command")
        if dotted in INPUT_PATHS and not Path(value).exists():
            raise ConfigError(f"{dotted}: {value} does not exist")
