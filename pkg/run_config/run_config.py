import configparser
import copy
import json
import os
from typing import Any, Dict, Iterable, Optional

from pydantic import ValidationError

from Schemas.schemas import RunConfig, RunMode, SamplerMode, TrainerConfig
from src.exceptions import ConfigurationError

ROOT_SECTION = "run"

# Hyperspectral geometry: 1x1 spectral filters over 3x3 pixel neighborhoods.
HSI_PRESET = {
    "bank": {"d": 30, "w": 1, "s": 1},
    "sampler": {"n_groups": 20, "group_size": 25, "patch_size": 3, "channels": 220,
                "slide_radius": 2, "gray_probability": 0.0, "jitter_amplitude": 0.0,
                "mode": SamplerMode.HSI.value},
}

# Named trainer settings selected with trainer.preset; explicit trainer keys win.
TRAINER_PRESETS = {
    "fast": {},
    "classic": TrainerConfig.classic().dict(include={"epochs_e", "epochs_m", "head_optimizer", "bank_optimizer"}),
}

REQUIRED_PATHS = {
    RunMode.UTILITY: ("bank", "heldout_dir"),
    RunMode.TEXTURE: ("bank", "texture_dir"),
    RunMode.HSI: ("cube", "labels"),
    RunMode.EXPORT: ("bank",),
}


def _decode(value: str) -> Any:
    """JSON scalars and lists where they parse, plain strings otherwise."""
    try:
        return json.loads(value)
    except ValueError:
        return value


def _set_path(tree: Dict[str, Any], dotted_key: str, value: Any) -> None:
    parts = [part for part in dotted_key.split(".") if part]
    if not parts:
        raise ConfigurationError(f"empty configuration key in {dotted_key!r}")
    node = tree
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigurationError(f"'{dotted_key}' nests under the scalar key '{part}'")
        node = child
    node[parts[-1]] = value


def deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def read_run_config(filename: str) -> Dict[str, Any]:
    """Read an INI (or JSON) run configuration into a nested dict.
    Section [run] holds top-level keys; dotted section names nest, e.g. [trainer.bank_optimizer].
    """
    if not os.path.isfile(filename):
        raise ConfigurationError(f"config file not found: {filename}")
    if filename.lower().endswith(".json"):
        with open(filename) as handle:
            try:
                tree = json.load(handle)
            except ValueError as e:
                raise ConfigurationError(f"{filename} is not valid JSON: {e}")
        if not isinstance(tree, dict):
            raise ConfigurationError(f"{filename} must hold a JSON object")
        return tree

    parser = configparser.ConfigParser(default_section="__defaults__", interpolation=None)
    parser.optionxform = str
    try:
        parser.read(filename)
    except configparser.Error as e:
        raise ConfigurationError(f"{filename} is not a valid config file: {e}")
    tree: Dict[str, Any] = {}
    for section in parser.sections():
        prefix = "" if section == ROOT_SECTION else section + "."
        for key, value in parser.items(section):
            _set_path(tree, prefix + key, _decode(value))
    return tree


def parse_config(filename: Optional[str] = None, overrides: Iterable[str] = (),
                 mode: Optional[str] = None, seed: Optional[int] = None,
                 out_dir: Optional[str] = None, bank: Optional[str] = None) -> RunConfig:
    """Resolve a RunConfig: defaults < mode preset < file < --set overrides < flags."""
    user = read_run_config(filename) if filename else {}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        _set_path(user, key.strip(), _decode(value.strip()))
    flags: Dict[str, Any] = {}
    if mode is not None:
        flags["mode"] = RunMode(mode).value
    if seed is not None:
        flags["seed"] = seed
    if out_dir is not None:
        flags.setdefault("paths", {})["out_dir"] = out_dir
    if bank is not None:
        flags.setdefault("paths", {})["bank"] = bank
    user = deep_merge(user, flags)

    if isinstance(user.get("trainer"), dict) and "seed" in user["trainer"]:
        raise ConfigurationError("trainer.seed is derived from the run seed; set 'seed' instead")
    sampler = user.get("sampler") if isinstance(user.get("sampler"), dict) else {}
    hsi = user.get("mode") == RunMode.HSI.value or sampler.get("mode") == SamplerMode.HSI.value
    tree = deep_merge(HSI_PRESET if hsi else {}, user)
    if isinstance(tree.get("trainer"), dict) and "preset" in tree["trainer"]:
        preset = tree["trainer"].pop("preset")
        if not isinstance(preset, str) or preset not in TRAINER_PRESETS:
            raise ConfigurationError(f"invalid configuration key 'trainer.preset': unknown preset {preset!r}, "
                                     f"expected one of {sorted(TRAINER_PRESETS)}")
        tree["trainer"] = deep_merge(TRAINER_PRESETS[preset], tree["trainer"])
    if isinstance(tree.get("trainer", {}), dict):
        tree.setdefault("trainer", {})["seed"] = tree.get("seed", 0)

    try:
        return RunConfig.parse_obj(tree)
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(str(part) for part in error["loc"])
        raise ConfigurationError(f"invalid configuration key '{key}': {error['msg']}")


def require_paths(config: RunConfig) -> None:
    """Every path the mode needs must be set."""
    if config.mode == RunMode.TRAIN:
        needed = ("cube",) if config.sampler.mode == SamplerMode.HSI else ("dataset_dir",)
    else:
        needed = REQUIRED_PATHS.get(config.mode, ())
    for name in needed:
        if not getattr(config.paths, name):
            raise ConfigurationError(f"missing required key 'paths.{name}' for {config.mode.value} mode")
