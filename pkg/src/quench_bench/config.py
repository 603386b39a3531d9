"""Config file handling, defaults and run manifests.

Config files are INI-style key-value text; every value has a typed default
so a missing file or section is fine.  CLI flags override file values, which
override defaults.  A RunManifest (config snapshot, seed, tool version,
input digests, timestamps) accompanies every output artifact; the timestamp
lives only in manifest.json so all other artifacts are byte-reproducible.
"""

from __future__ import annotations

import configparser
import copy
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import InvalidConfig
from .model import (
    DEFAULT_CUTOFF_FACTOR,
    LatticeSpec,
    QuenchParams,
    derive_quench,
    lattice_for_quench,
)
from .units import ghz_um6_to_angular, mhz_to_angular

#: section -> key -> (type, default).  None defaults mean "unset".
SCHEMA: dict = {
    "lattice": {"Lx": (int, 3), "Ly": (int, 3)},
    "physics": {
        "omega_mhz": (float, 2.0),
        "h_x": (float, 2.5),
        "c6_ghz_um6": (float, 138.0),
        "cutoff_factor": (float, DEFAULT_CUTOFF_FACTOR),
    },
    "quench": {"t_pulse_ns": (float, 400.0), "dt_ns": (float, 1.0)},
    "mps": {
        "max_chi": (int, 64),
        "k_max": (int, 50),
        "memory_budget_gb": (float, None),
    },
    "register": {
        "fill_p": (float, 0.5),
        "n_traps": (int, None),
        "p_transf": (float, 0.989),
        "p_pickup": (float, 0.998),
        "p_acci": (float, 0.0009),
        "p_loss": (float, 0.009),
    },
    "budget": {
        "alpha": (float, 0.05),
        "confidence": (float, 0.95),
        "shot_rate_hz": (float, 1.0),
        "qpu_power_kw": (float, 3.2),
    },
    "run": {"seed": (int, 0)},
}


def default_config() -> dict:
    return {
        section: {key: default for key, (_, default) in keys.items()}
        for section, keys in SCHEMA.items()
    }


def load_config(path: str | Path | None) -> dict:
    """Defaults overlaid with the INI file at ``path`` (if given)."""
    config = default_config()
    if path is None:
        return config
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise InvalidConfig(f"config file not found: {path}")
    for section in parser.sections():
        if section not in SCHEMA:
            raise InvalidConfig(f"unknown config section [{section}]")
        # configparser lower-cases keys; match the schema case-insensitively
        cased = {k.lower(): k for k in SCHEMA[section]}
        for key, raw in parser.items(section):
            key = cased.get(key.lower(), key)
            if key not in SCHEMA[section]:
                raise InvalidConfig(f"unknown config key {section}.{key}")
            typ, _ = SCHEMA[section][key]
            try:
                config[section][key] = typ(raw)
            except ValueError as exc:
                raise InvalidConfig(f"bad value for {section}.{key}: {raw!r}") from exc
    return config


def apply_overrides(config: dict, overrides: dict) -> dict:
    """Overlay non-None `{section: {key: value}}` overrides on a config."""
    out = copy.deepcopy(config)
    for section, keys in overrides.items():
        for key, value in keys.items():
            if value is None:
                continue
            if section not in SCHEMA or key not in SCHEMA[section]:
                raise InvalidConfig(f"unknown config key {section}.{key}")
            out[section][key] = SCHEMA[section][key][0](value)
    return out


def lattice_from_config(config: dict) -> LatticeSpec:
    phys = config["physics"]
    return lattice_for_quench(
        config["lattice"]["Lx"],
        config["lattice"]["Ly"],
        mhz_to_angular(phys["omega_mhz"]),
        phys["h_x"],
        ghz_um6_to_angular(phys["c6_ghz_um6"]),
    )


def params_from_config(config: dict, lattice: LatticeSpec) -> QuenchParams:
    phys = config["physics"]
    quench = config["quench"]
    return derive_quench(
        mhz_to_angular(phys["omega_mhz"]),
        phys["h_x"],
        ghz_um6_to_angular(phys["c6_ghz_um6"]),
        lattice,
        t_pulse=quench["t_pulse_ns"] * 1e-9,
        dt=quench["dt_ns"] * 1e-9,
    )


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

def sha256_of_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_manifest(config: dict, seed: int | None, input_paths: list = ()) -> dict:
    """Manifest core (timestamp-free) plus a created_utc stamp."""
    core = {
        "tool": "quench-bench",
        "tool_version": __version__,
        "config": config,
        "seed": seed,
        "inputs": {str(p): sha256_of_file(p) for p in input_paths},
    }
    manifest = dict(core)
    manifest["created_utc"] = datetime.now(timezone.utc).isoformat()
    return manifest


def manifest_core(manifest: dict) -> dict:
    return {k: v for k, v in manifest.items() if k != "created_utc"}


def manifest_digest(manifest: dict) -> str:
    canonical = json.dumps(manifest_core(manifest), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def dump_json(obj: dict, path: str | Path | None = None) -> str:
    """Deterministic JSON text (sorted keys); writes to ``path`` when given."""
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
