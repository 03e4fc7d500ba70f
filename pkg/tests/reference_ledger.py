"""Brute-force reference model of the version ledger plus the randomized
replay harness.

The model keeps plain dicts and recomputes everything by scanning its row
list; it shares no code with the production store, so agreement on random
mutation sequences is evidence the state machine is right, not just
consistent with itself.
"""

from __future__ import annotations

import hashlib
import os
import random
from datetime import datetime, timedelta, timezone

from corpus import MINIMAL_JPEG, make_dicom, pixel_value_span

EMPTY = hashlib.sha256(b"").hexdigest()

T0 = datetime(2026, 2, 1, 8, 0, 0, tzinfo=timezone.utc)


class ReferenceLedger:
    def __init__(self):
        self.rows: list[dict] = []
        self.machines: dict[tuple[str, str], dict] = {}

    def register(self, username, mac, paths, formats, frequency):
        existing = self.machines.get((username, mac))
        self.machines[(username, mac)] = {
            "paths": list(paths),
            "formats": set(formats),
            "frequency": frequency,
            "last_scanned": existing["last_scanned"] if existing else None,
            "stale": existing["stale"] if existing else True,
        }

    def _rows_for(self, mac, path):
        return [r for r in self.rows if r["mac"] == mac and r["filepath"] == path]

    def scan(self, username, mac, observations, scan_time, roots, formats, error_paths=()):
        """observations: {path: (format_name, file_hash, meta_hash, pixel_hash)}"""
        counts = {"new": 0, "modified": 0, "unchanged": 0, "deleted": 0, "resurrected": 0}

        def append(path, fmt, hashes, version, status):
            file_hash, meta_hash, pixel_hash = hashes
            self.rows.append(
                {
                    "mac": mac,
                    "filepath": path,
                    "format": fmt,
                    "file_hash": file_hash,
                    "meta_hash": meta_hash,
                    "pixel_hash": pixel_hash,
                    "version": version,
                    "status": status,
                    "last_modified": scan_time,
                    "last_scanned": scan_time,
                }
            )

        for path in sorted(observations):
            fmt, file_hash, meta_hash, pixel_hash = observations[path]
            history = self._rows_for(mac, path)
            top = max(history, key=lambda r: r["version"]) if history else None
            if top is None:
                counts["new"] += 1
                append(path, fmt, (file_hash, meta_hash, pixel_hash), 1, "LATEST")
            elif top["status"] == "DELETED":
                counts["new"] += 1
                counts["resurrected"] += 1
                top["status"] = "OLD"
                top["last_scanned"] = scan_time
                append(path, fmt, (file_hash, meta_hash, pixel_hash), top["version"] + 1, "LATEST")
            elif top["file_hash"] == file_hash:
                counts["unchanged"] += 1
                top["last_scanned"] = scan_time
            else:
                counts["modified"] += 1
                top["status"] = "OLD"
                top["last_scanned"] = scan_time
                append(path, fmt, (file_hash, meta_hash, pixel_hash), top["version"] + 1, "LATEST")

        latest_paths = sorted(
            {r["filepath"] for r in self.rows if r["mac"] == mac and r["status"] == "LATEST"}
        )
        for path in latest_paths:
            if path in observations:
                continue
            top = max(self._rows_for(mac, path), key=lambda r: r["version"])
            if top["status"] != "LATEST":
                continue
            if not any(
                path == root or path.startswith((root.rstrip("/") or "/") + ("/" if root.rstrip("/") else ""))
                for root in roots
            ):
                continue
            if top["format"] not in formats:
                continue
            if any(
                path == err or path.startswith(err + "!") or path.startswith(err.rstrip("/") + "/")
                for err in error_paths
            ):
                continue
            counts["deleted"] += 1
            top["status"] = "OLD"
            top["last_scanned"] = scan_time
            append(
                path,
                top["format"],
                (top["file_hash"], top["meta_hash"], top["pixel_hash"]),
                top["version"] + 1,
                "DELETED",
            )

        self.machines[(username, mac)]["last_scanned"] = scan_time
        for config in self.machines.values():
            last = config["last_scanned"]
            config["stale"] = True if last is None else (
                (scan_time - last).total_seconds() > config["frequency"]
            )
        return counts

    def snapshot(self, mac):
        return sorted(
            (
                r["filepath"],
                r["version"],
                r["status"],
                r["file_hash"],
                r["meta_hash"],
                r["pixel_hash"],
                r["last_modified"],
                r["last_scanned"],
            )
            for r in self.rows
            if r["mac"] == mac
        )

    def machine_snapshot(self):
        return sorted(
            (username, mac, c["last_scanned"], c["stale"])
            for (username, mac), c in self.machines.items()
        )


# ---------------------------------------------------------------------------
# Content pool: DICOM variants with independently computed split hashes


def _entry(data: bytes, pixel: bytes | None, little=True, explicit=True):
    file_hash = hashlib.sha256(data).hexdigest()
    if pixel is None:
        # metadata-only: the whole file is metadata, pixel region is empty
        return {"bytes": data, "hashes": (file_hash, file_hash, EMPTY)}
    offset, length = pixel_value_span(data, pixel, little=little, explicit=explicit)
    meta = hashlib.sha256(data[:offset] + data[offset + length :]).hexdigest()
    pix = hashlib.sha256(data[offset : offset + length]).hexdigest()
    return {"bytes": data, "hashes": (file_hash, meta, pix)}


def _build_pool():
    pool = []
    for i in range(20):
        pixel = bytes([i, 255 - i]) * 6
        pool.append(_entry(make_dicom(pixel=pixel), pixel))
    for i in range(4):
        pixel = bytes([40 + i]) * 8
        data = make_dicom(preamble=False, explicit=False, pixel=pixel)
        pool.append(_entry(data, pixel, explicit=False))
    meta_only = make_dicom(pixel=None)
    pool.append(
        {"bytes": meta_only, "hashes": (hashlib.sha256(meta_only).hexdigest(),
                                        hashlib.sha256(meta_only).hexdigest(), EMPTY)}
    )
    return pool


CONTENT_POOL = _build_pool()

_NAME_STEMS = ["alpha", "beta", "gamma", "delta", "epsi", "zeta", "eta", "theta", "iota", "kappa"]
_NAME_DIRS = ["", "sub/", "sub/deep/", ".hidden/", "tmp/"]
_NAME_EXTS = [".dcm", ".jpg", "", ".bak"]


def _name_pool(rng: random.Random, max_files: int) -> list[str]:
    names = set()
    while len(names) < max_files:
        names.add(rng.choice(_NAME_DIRS) + rng.choice(_NAME_STEMS) + str(rng.randrange(4)) + rng.choice(_NAME_EXTS))
    return sorted(names)


def replay_sequence(base_dir: str, store, run_scan, seed: int, *, max_files=20, max_scans=10):
    """Drive one randomized mutation sequence through the real scanner and
    the reference model in lockstep; returns the number of scans run.
    Raises AssertionError on any divergence."""
    from phitrack.sniff import FileFormat

    rng = random.Random(seed)
    mac = "aabbccddeeff"
    root = os.path.realpath(base_dir)
    frequency = rng.choice([600, 3600, 86400])
    store.upsert_machine_config("alice", mac, [root], {FileFormat.DICOM}, frequency)
    reference = ReferenceLedger()
    reference.register("alice", mac, [root], {"DICOM"}, frequency)

    names = _name_pool(rng, max_files)
    live: dict[str, int] = {}  # relative name -> CONTENT_POOL index

    def fs_write(rel: str, pool_index: int):
        full = os.path.join(root, rel)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        with open(full, "wb") as fh:
            fh.write(CONTENT_POOL[pool_index]["bytes"])
        live[rel] = pool_index

    def fs_delete(rel: str):
        os.unlink(os.path.join(root, rel))
        del live[rel]

    # a decoy that must never be tracked
    with open(os.path.join(root, "notes.txt"), "wb") as fh:
        fh.write(b"plain text, not imaging\n")
    with open(os.path.join(root, "spoof.dcm"), "wb") as fh:
        fh.write(MINIMAL_JPEG)

    now = T0
    scans = rng.randint(1, max_scans)
    for _ in range(scans):
        for _ in range(rng.randint(0, 6)):
            choices = ["create"] if not live else ["create", "modify", "delete", "move"]
            op = rng.choice(choices)
            if op == "create":
                free = [n for n in names if n not in live]
                if not free:
                    continue
                fs_write(rng.choice(free), rng.randrange(len(CONTENT_POOL)))
            elif op == "modify":
                rel = rng.choice(sorted(live))
                other = rng.randrange(len(CONTENT_POOL) - 1)
                if other >= live[rel]:
                    other += 1  # guarantee a different content
                fs_write(rel, other)
            elif op == "delete":
                fs_delete(rng.choice(sorted(live)))
            else:  # move
                free = [n for n in names if n not in live]
                if not free:
                    continue
                src = rng.choice(sorted(live))
                dst = rng.choice(free)
                index = live[src]
                fs_delete(src)
                fs_write(dst, index)

        now += timedelta(seconds=rng.randint(1, 7200))
        report = run_scan(store, "alice", mac, now=now)
        assert report.committed, f"seed {seed}: scan failed to commit: {report.errors}"
        assert report.errors == (), f"seed {seed}: unexpected errors {report.errors}"

        observations = {
            os.path.join(root, rel): ("DICOM",) + CONTENT_POOL[index]["hashes"]
            for rel, index in live.items()
        }
        expected_counts = reference.scan(
            "alice", mac, observations, now, roots=[root], formats={"DICOM"}
        )
        assert report.counts.as_dict() == expected_counts, f"seed {seed}: counts diverged"

        produced = sorted(
            (
                r.filepath,
                r.version,
                r.status,
                r.file_hash,
                r.meta_hash,
                r.pixel_hash,
                r.last_modified,
                r.last_scanned,
            )
            for r in store.query_files(mac=mac)
        )
        assert produced == reference.snapshot(mac), f"seed {seed}: ledger diverged"
        machines = sorted(
            (m.username, m.mac, m.last_scanned, m.stale) for m in store.list_machines()
        )
        assert machines == reference.machine_snapshot(), f"seed {seed}: machine rows diverged"
        violations = store.audit()
        assert violations == [], f"seed {seed}: audit violations {violations}"
    return scans
