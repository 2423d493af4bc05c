"""Run configuration files: ``key = value`` lines grouped under ``[section]`` headers.

Unknown sections or keys are errors; every diagnostic names the file line.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from importlib import resources

from .model import VARIANTS
from .selector import SelectorConfig
from .trainer import TrainConfig
from .transformer import TransformerConfig
from .video_io import list_frames


class ConfigError(ValueError):
    def __init__(self, message, source="<config>", line=None, key=None):
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")
        self.line, self.key = line, key


@dataclass
class DataConfig:
    clip: str = ""
    train_range: tuple | None = None
    eval_range: tuple | None = None
    out_dir: str = "run"


@dataclass
class RunConfig:
    model: TransformerConfig
    selector_ndf: int = 16
    selector_filter_size: int = 5
    reduce_blocks: int | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    variant: str = "M2"

    @property
    def use_selector(self):
        return VARIANTS[self.variant][0]

    def selector_config(self):
        if not self.use_selector:
            return None
        return SelectorConfig.for_transformer(self.model, self.selector_ndf,
                                              self.selector_filter_size, self.reduce_blocks)


def _int(v):
    return int(v)


def _float(v):
    return float(v)


def _bool(v):
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _opt_int(v):
    return None if v.lower() in ("auto", "none", "") else int(v)


def _range(v):
    parts = v.replace(",", " ").split()
    if len(parts) != 2:
        raise ValueError(f"expected two indices 'first last', got {v!r}")
    first, last = int(parts[0]), int(parts[1])
    if first < 0 or last < first:
        raise ValueError(f"invalid range {first}..{last}")
    return (first, last)


def _variant(v):
    if v not in VARIANTS:
        raise ValueError(f"variant must be one of {sorted(VARIANTS)}, got {v!r}")
    return v


SCHEMA = {
    "model": {"N": _int, "L": _int, "delta": _int, "channels": _int, "height": _int,
              "width": _int, "filter_size": _int},
    "selector": {"ndf": _int, "filter_size": _int, "reduce_blocks": _opt_int},
    "train": {f.name: {"int": _int, "float": _float, "bool": _bool,
                       "int | None": _opt_int}[f.type] for f in fields(TrainConfig)},
    "data": {"clip": str, "train_range": _range, "eval_range": _range, "out_dir": str},
    "run": {"variant": _variant},
}


def parse_config(text, source="<config>"):
    """Parse config text into ``{section: {key: (value, line)}}``, then build a :class:`RunConfig`."""
    values = {s: {} for s in SCHEMA}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", source, lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", source, lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", source, lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", source, lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", source, lineno, key)
        if key in values[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", source, lineno, key)
        try:
            values[section][key] = (SCHEMA[section][key](value), lineno)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", source, lineno, key) from None
    return _build(values, source)


def _build(values, source):
    def get(section, key, default=None):
        return values[section].get(key, (default, None))[0]

    def fail(section, key, msg):
        raise ConfigError(msg, source, values[section].get(key, (None, None))[1], key)

    for key in ("N", "L", "delta", "height", "width"):
        if key not in values["model"]:
            raise ConfigError(f"missing required key {key!r} in [model]", source)
    model_kw = {k: v for k, (v, _) in values["model"].items()}
    try:
        tcfg = TransformerConfig(**model_kw).validate()
    except ValueError as exc:
        raise ConfigError(f"invalid [model]: {exc}", source) from None
    variant = get("run", "variant", "M2")
    train_kw = {k: v for k, (v, _) in values["train"].items()}
    train_kw.setdefault("mu_motion", VARIANTS[variant][1])
    try:
        tc = TrainConfig(**train_kw).validate()
    except ValueError as exc:
        raise ConfigError(f"invalid [train]: {exc}", source) from None
    if VARIANTS[variant][0] and tcfg.delta < 2:
        fail("model", "delta", "the selector needs delta >= 2")
    data = DataConfig(**{k: v for k, (v, _) in values["data"].items()})
    cfg = RunConfig(model=tcfg, selector_ndf=get("selector", "ndf", 16),
                    selector_filter_size=get("selector", "filter_size", 5),
                    reduce_blocks=get("selector", "reduce_blocks"), train=tc, data=data,
                    variant=variant)
    try:
        cfg.selector_config()
    except ValueError as exc:
        raise ConfigError(f"invalid [selector]: {exc}", source) from None
    return cfg


def load_config(path, check_paths=True):
    """Read and validate a config file. Relative data paths resolve against the file's directory."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    cfg = parse_config(text, str(path))
    base = os.path.dirname(os.path.abspath(path))
    if cfg.data.clip and not os.path.isabs(cfg.data.clip):
        cfg.data = replace(cfg.data, clip=os.path.join(base, cfg.data.clip))
    if cfg.data.out_dir and not os.path.isabs(cfg.data.out_dir):
        cfg.data = replace(cfg.data, out_dir=os.path.join(base, cfg.data.out_dir))
    if check_paths:
        if not cfg.data.clip:
            raise ConfigError("missing required key 'clip' in [data]", str(path))
        try:
            list_frames(cfg.data.clip, cfg.data.train_range)
        except (FileNotFoundError, ValueError) as exc:
            raise ConfigError(f"clip not resolvable: {exc}", str(path), key="clip") from None
    return cfg


PRESETS = ("bird", "garden", "ocean", "juggler", "cat")


def preset_text(name):
    """Text of a shipped example config (hyper-parameters for five reference clips)."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESETS}")
    return resources.files("motionsel").joinpath("presets", f"{name}.cfg").read_text()
