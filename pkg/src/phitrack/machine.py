"""Machine identity. Ledger rows are keyed by a 12-hex-digit MAC address;
detection can be overridden wherever a VM or container lacks a stable one."""

from __future__ import annotations

import uuid

from .ledger import normalize_mac


def detect_mac() -> str:
    """Hardware address of a primary interface as 12 lowercase hex digits.
    Hosts with no discoverable interface get a stable random node id."""
    return "%012x" % uuid.getnode()


def resolve_mac(value: str | None) -> str:
    """Map a CLI/env override to a normalized machine id; None or "auto"
    means detect."""
    if value is None or value == "" or value.lower() == "auto":
        return detect_mac()
    return normalize_mac(value)
