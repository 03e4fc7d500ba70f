#!/usr/bin/env python3
"""Record canonical review-API responses into frontend/test/fixtures/.

The dashboard's contract tests render these recorded payloads instead of
hand-written ones, so UI expectations can only drift from the real API by
re-running this script and reviewing the diff.
"""

from __future__ import annotations

import json
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from fastapi.testclient import TestClient

from phitrack.api import create_app
from phitrack.fingerprint import Fingerprint
from phitrack.ledger import SqliteLedger, stage_observation
from phitrack.sniff import FileFormat

MAC_A = "aabbccddeeff"
MAC_B = "112233445566"
T1 = datetime(2026, 4, 1, 8, 0, 0, tzinfo=timezone.utc)
T2 = datetime(2026, 4, 1, 9, 0, 0, tzinfo=timezone.utc)
T3 = datetime(2026, 4, 2, 10, 0, 0, tzinfo=timezone.utc)

FIXTURES = Path(__file__).resolve().parents[1] / "frontend" / "test" / "fixtures"


def fp(tag: str) -> Fingerprint:
    import hashlib

    return Fingerprint(
        hashlib.sha256(tag.encode()).hexdigest(),
        hashlib.sha256(b"meta:" + tag.encode()).hexdigest(),
        hashlib.sha256(b"pixel:" + tag.encode()).hexdigest(),
    )


def commit(store, mac, username, observations, when, fmt=FileFormat.DICOM):
    staging = store.begin_scan(mac, username=username, now=when)
    for path, fingerprint in observations.items():
        stage_observation(staging, path, fmt, fingerprint)
    store.commit_scan(staging, when)


def build_store(db_path: str) -> SqliteLedger:
    """Two machines; alice's ledger holds LATEST, OLD and DELETED rows and
    her machine is stale. Bob scans a day later, so the two machines sit on
    opposite sides of any scan-time bound between T2 and T3."""
    store = SqliteLedger(db_path)
    store.upsert_machine_config("alice", MAC_A, ["/data"], {FileFormat.DICOM}, 3600)
    first = {
        "/data/a.dcm": fp("a-v1"),
        "/data/b.dcm": fp("b"),
        "/data/c.dcm": fp("c"),
    }
    commit(store, MAC_A, "alice", first, T1)
    second = dict(first, **{"/data/a.dcm": fp("a-v2")})
    del second["/data/b.dcm"]
    commit(store, MAC_A, "alice", second, T2)

    store.upsert_machine_config("bob", MAC_B, ["/imaging"], {FileFormat.NIFTI1}, 10**9)
    commit(store, MAC_B, "bob", {"/imaging/d.nii": fp("d")}, T3, fmt=FileFormat.NIFTI1)
    return store


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        store = build_store(f"{tmp}/ledger.db")
        client = TestClient(create_app(store=store))

        recordings = {
            "machines.json": client.get("/api/machines"),
            "machines_stale.json": client.get("/api/machines", params={"stale": "true"}),
            "files.json": client.get("/api/files"),
            "files_deleted.json": client.get("/api/files", params={"status": "DELETED"}),
            "files_empty.json": client.get("/api/files", params={"version": 9}),
            "history.json": client.get(
                "/api/files/history", params={"mac": MAC_A, "path": "/data/a.dcm"}
            ),
            "summary.json": client.get("/api/summary"),
            "error_bad_format.json": client.get("/api/files", params={"format": "BMP"}),
            "reminder.json": client.post(
                "/api/reminders",
                json={"username": "alice", "mac": MAC_A, "note": "please rescan"},
            ),
        }
        headers = {}
        for name, resp in recordings.items():
            (FIXTURES / name).write_text(json.dumps(resp.json(), indent=2) + "\n")
            if "X-Total-Count" in resp.headers:
                headers[name] = {"X-Total-Count": resp.headers["X-Total-Count"]}
            print(f"recorded {name} ({resp.status_code})")
        (FIXTURES / "headers.json").write_text(json.dumps(headers, indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
