"""Operator configuration: where the ledger lives and which machine id to
report. Precedence: command-line flags, then environment variables, then
the config file, then built-in defaults."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Mapping, Optional

ENV_STORE = "PHITRACK_STORE"
ENV_MACHINE_ID = "PHITRACK_MACHINE_ID"
ENV_CONFIG = "PHITRACK_CONFIG"

DEFAULT_STORE = "~/.local/share/phitrack/ledger.db"
DEFAULT_CONFIG = "~/.config/phitrack/config"

_KNOWN_KEYS = {"store", "machine_id"}


@dataclass(frozen=True)
class Settings:
    store_path: str
    machine_id: Optional[str]  # None means auto-detect


def read_config_file(path: str) -> dict[str, str]:
    """Parse a "key = value" file; blank lines and "#" comments ignored.
    Unknown keys are rejected so typos fail loudly."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _KNOWN_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value.strip()
    return values


def load_settings(
    store: Optional[str] = None,
    machine_id: Optional[str] = None,
    config_path: Optional[str] = None,
    env: Mapping[str, str] = os.environ,
) -> Settings:
    file_path = config_path or env.get(ENV_CONFIG) or os.path.expanduser(DEFAULT_CONFIG)
    file_values: dict[str, str] = {}
    if os.path.isfile(file_path):
        file_values = read_config_file(file_path)
    resolved_store = (
        store
        or env.get(ENV_STORE)
        or file_values.get("store")
        or os.path.expanduser(DEFAULT_STORE)
    )
    resolved_machine = machine_id or env.get(ENV_MACHINE_ID) or file_values.get("machine_id")
    return Settings(
        store_path=os.path.expanduser(resolved_store),
        machine_id=resolved_machine,
    )
