"""JSON-shaped dict views of ledger records; the single encoding used by
the CLI's --json mode and the HTTP API."""

from __future__ import annotations

from typing import Optional

from .ledger import FileRecord, MachineConfig, ReminderRecord, to_timestamp


def machine_dict(config: MachineConfig) -> dict:
    return {
        "username": config.username,
        "mac": config.mac,
        "paths": list(config.paths),
        "formats": sorted(f.value for f in config.formats),
        "scan_frequency": config.scan_frequency,
        "last_scanned": to_timestamp(config.last_scanned) if config.last_scanned else None,
        "stale": config.stale,
    }


def record_dict(record: FileRecord) -> dict:
    return {
        "record_id": record.record_id,
        "mac": record.mac,
        "filepath": record.filepath,
        "format": record.format.value,
        "file_hash": record.file_hash,
        "meta_hash": record.meta_hash,
        "pixel_hash": record.pixel_hash,
        "version": record.version,
        "status": record.status,
        "last_modified": to_timestamp(record.last_modified),
        "last_scanned": to_timestamp(record.last_scanned),
    }


def reminder_dict(reminder: ReminderRecord) -> dict:
    return {
        "id": reminder.id,
        "username": reminder.username,
        "mac": reminder.mac,
        "created_at": to_timestamp(reminder.created_at),
        "note": reminder.note,
        "delivered": reminder.delivered,
    }


def summary_dict(summary: dict) -> dict:
    last = summary.get("last_scan_time")
    return {
        "machines": summary["machines"],
        "stale_machines": summary["stale_machines"],
        "files_latest": summary["files_latest"],
        "files_deleted": summary["files_deleted"],
        "last_scan_time": to_timestamp(last) if last is not None else None,
    }
