"""Flat ``key = value`` configuration for the command line.

Example::

    store = build/store.nt
    policy = policy.txt
    at = 2020-01-01T00:00:00Z

    dataset.states.shp = data/cb_2018_us_state_500k.shp
    dataset.states.dbf = data/cb_2018_us_state_500k.dbf
    dataset.states.base_iri = https://example.org/states/
    dataset.states.id_field = GEOID
    dataset.states.name_field = NAME

Relative paths are resolved against the directory holding the config file.
Datasets are ingested in the order their first key appears.
"""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from .errors import ConfigError
from .shapefile import FieldMapping

ENV_VAR = "GEOPOL_CONFIG"
DEFAULT_NAME = "geopol.cfg"

_DATASET_KEYS = {"shp", "dbf", "base_iri", "id_field", "name_field", "encoding"}
_REQUIRED_DATASET_KEYS = ("shp", "dbf", "base_iri", "id_field", "name_field")
_TOP_KEYS = {"store", "policy", "at"}


@dataclass
class DatasetSpec:
    label: str
    shp: Path
    dbf: Path
    base_iri: str
    mapping: FieldMapping
    encoding: str = "utf-8"


@dataclass
class CliConfig:
    datasets: List[DatasetSpec] = field(default_factory=list)
    store: Optional[Path] = None
    policy: Optional[Path] = None
    at: Optional[str] = None


def parse_config(text, base_dir=Path(".")):
    top = {}
    raw_sets = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError("expected 'key = value'", line=lineno)
        if key in _TOP_KEYS:
            if key in top:
                raise ConfigError("duplicate key %r" % key, line=lineno)
            top[key] = value
            continue
        parts = key.split(".")
        if len(parts) != 3 or parts[0] != "dataset" or parts[2] not in _DATASET_KEYS or not parts[1]:
            raise ConfigError("unknown key %r" % key, line=lineno)
        entry = raw_sets.setdefault(parts[1], {})
        if parts[2] in entry:
            raise ConfigError("duplicate key %r" % key, line=lineno)
        entry[parts[2]] = value

    def path(value):
        p = Path(value)
        return p if p.is_absolute() else Path(base_dir) / p

    datasets = []
    for label, entry in raw_sets.items():
        missing = [k for k in _REQUIRED_DATASET_KEYS if not entry.get(k)]
        if missing:
            raise ConfigError("dataset %r is missing %s" % (label, ", ".join(missing)))
        datasets.append(DatasetSpec(
            label, path(entry["shp"]), path(entry["dbf"]), entry["base_iri"],
            FieldMapping(entry["id_field"], entry["name_field"]),
            entry.get("encoding") or "utf-8"))
    return CliConfig(
        datasets,
        path(top["store"]) if top.get("store") else None,
        path(top["policy"]) if top.get("policy") else None,
        top.get("at") or None,
    )


def resolve_config_path(explicit=None):
    """``--config`` wins, then ``$GEOPOL_CONFIG``, then ./geopol.cfg if present."""
    if explicit:
        return Path(explicit)
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    default = Path(DEFAULT_NAME)
    return default if default.exists() else None


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc.strerror)) from None
    return parse_config(text, path.parent)
