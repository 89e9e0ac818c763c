"""Run configuration schema and validation.

Configs are JSON documents validated before execution; unknown keys are
rejected with the offending dotted path, wrong-typed leaves likewise.
"""

from __future__ import annotations

import copy
import json

from .errors import ConfigError

_NULLABLE_FLOAT = (float, int, type(None))
_FLOAT = (float, int)

# leaf markers: tuple of accepted types; dict -> nested schema;
# ["int"] -> list of ints; "any_dict" -> free-form JSON object
SCHEMA = {
    "seed": (int,),
    "output_dir": (str, type(None)),
    "dataset": (str, type(None)),
    "autoencoder": {
        "d": (int,), "edge_dim": (int,), "c": (int,), "p": (int,), "h": (int,),
        "n_enc": (int,), "heads": (int,), "d_dec": (int,), "n_dec": (int,),
        "dec_heads": (int,), "max_atoms": (int,), "max_len": (int,),
        "latent_reg": _FLOAT,
    },
    "train": {
        "steps": (int,), "batch_size": (int,), "lr": _FLOAT, "lr_end": _FLOAT,
        "weight_decay": _FLOAT,
    },
    "schedule": {"t_max": (int,), "beta_start": _FLOAT, "beta_end": _NULLABLE_FLOAT},
    "dit": {"width": (int,), "layers": (int,), "heads": (int,), "k_rbf": (int,)},
    "predictor": {
        "kind": (str,), "hidden": (int,), "depth": (int,), "head_hidden": (int,),
        "steps": (int,), "batch_size": (int,), "lr": _FLOAT,
    },
    "calibration": {
        "bias": (str,), "n_clusters": (int,), "noise_nm": _FLOAT,
        "affine_scale": _FLOAT, "affine_shift": _FLOAT,
        "steps": (int,), "batch_size": (int,), "lr": _FLOAT,
        "holdout_fraction": _FLOAT, "oracle_seed": (int,),
    },
    "generate": {
        "n": (int,), "beam_size": (int,),
        "prompt": {
            "abs_nm": _NULLABLE_FLOAT, "emi_nm": _NULLABLE_FLOAT,
            "loge": _NULLABLE_FLOAT, "plqy": _NULLABLE_FLOAT,
            "dielectric": _NULLABLE_FLOAT,
        },
    },
    "guidance": {
        "kind": (str,), "params": "any_dict", "s0": _FLOAT, "resamples": (int,),
        "refine_steps": (int,), "refine_step_size": _FLOAT,
        "envelope_on_sum": (bool,), "grad_clip": _FLOAT,
    },
    "optimize": {
        "mode": (str,), "n_steps": (int,), "n_pops": (int,), "n_offs": (int,),
        "t_opt_min": (int,), "t_opt_max": (int,),
        "start_smiles": (str,), "solvent_smiles": (str,),
        "tanimoto_min": _NULLABLE_FLOAT, "sa_max": _NULLABLE_FLOAT,
        "substructure": (str, type(None)),
        "property_floor_multipliers": "any_dict",
        "core_smiles": (str, type(None)), "core_anchors": ["int"],
        "beam_size": (int,),
    },
    "permeate": {"input_dir": (str,), "temperature_k": _FLOAT},
    "checkpoints": {
        "autoencoder": (str, type(None)), "dit": (str, type(None)),
        "predictor": (str, type(None)), "agp": (str, type(None)),
        "lsp": (str, type(None)), "biasnet": (str, type(None)),
    },
}

DEFAULTS = {
    "seed": 0,
    "train": {"steps": 2000, "batch_size": 25, "lr": 2e-3, "lr_end": 2e-4, "weight_decay": 1e-4},
    "schedule": {"t_max": 200, "beta_start": 1e-4, "beta_end": None},
    "generate": {"n": 128, "beam_size": 4, "prompt": {}},
    "guidance": {"kind": "none", "params": {}, "s0": 1.0, "resamples": 4,
                 "refine_steps": 5, "refine_step_size": 0.1,
                 "envelope_on_sum": False, "grad_clip": 1.0},
    "optimize": {"mode": "global", "n_steps": 30, "n_pops": 128, "n_offs": 8,
                 "t_opt_min": 140, "t_opt_max": 160,
                 "start_smiles": "CCc1ccc(Nc2ccc3ccccc3n2)cc1",
                 "solvent_smiles": "CCO", "tanimoto_min": 0.4, "beam_size": 1},
    "permeate": {"temperature_k": 310.0},
}


def _check(node, schema, path: str):
    if schema == "any_dict":
        if not isinstance(node, dict):
            raise ConfigError(f"{path}: expected an object")
        return
    if isinstance(schema, dict):
        if not isinstance(node, dict):
            raise ConfigError(f"{path or '<root>'}: expected an object")
        for key, value in node.items():
            child = f"{path}.{key}" if path else key
            if key not in schema:
                raise ConfigError(f"unknown key '{child}'")
            _check(value, schema[key], child)
        return
    if isinstance(schema, list):
        if not isinstance(node, list) or not all(isinstance(v, int) for v in node):
            raise ConfigError(f"{path}: expected a list of integers")
        return
    if isinstance(node, bool) and bool not in schema:
        raise ConfigError(f"{path}: unexpected boolean")
    if not isinstance(node, schema):
        names = "/".join(t.__name__ for t in schema)
        raise ConfigError(f"{path}: expected {names}, got {type(node).__name__}")


def validate_config(config: dict) -> dict:
    """Validate against the schema and fold in defaults; returns a new dict."""
    if not isinstance(config, dict):
        raise ConfigError("config root must be a JSON object")
    _check(config, SCHEMA, "")
    merged = copy.deepcopy(DEFAULTS)
    _deep_merge(merged, config)
    return merged


def _deep_merge(base: dict, override: dict):
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_merge(base[key], value)
        else:
            base[key] = copy.deepcopy(value)


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return validate_config(raw)
