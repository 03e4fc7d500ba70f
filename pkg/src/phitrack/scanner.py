"""One compliance scan: discover candidates under the machine's configured
roots, fingerprint them, and commit the observations to the ledger
atomically. A single timestamp captured at scan start stamps every row
the scan touches, so the scan reads as one logical event."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, Optional

from .discovery import WalkLimits, walk_roots
from .fingerprint import fingerprint_candidate
from .ledger import (
    FileRecord,
    LedgerStore,
    ScanSummary,
    StoreError,
    UnregisteredMachineError,
    normalize_mac,
    path_in_scope,
    path_protected,
    stage_observation,
    to_timestamp,
    utc_now,
)
from .sniff import FileFormat


@dataclass(frozen=True)
class ScanReport:
    mac: str
    username: str
    started_at: datetime
    finished_at: datetime
    counts: ScanSummary
    errors: tuple[tuple[str, str], ...]
    committed: bool

    def as_dict(self) -> dict:
        return {
            "mac": self.mac,
            "username": self.username,
            "started_at": to_timestamp(self.started_at),
            "finished_at": to_timestamp(self.finished_at),
            "counts": self.counts.as_dict(),
            "errors": [{"path": p, "message": m} for p, m in self.errors],
            "committed": self.committed,
        }


@dataclass
class ChangeSet:
    new: list[str] = field(default_factory=list)
    modified: list[str] = field(default_factory=list)
    unchanged: list[str] = field(default_factory=list)
    deleted: list[str] = field(default_factory=list)
    resurrected: list[str] = field(default_factory=list)  # subset of new

    def summary(self) -> ScanSummary:
        return ScanSummary(
            new=len(self.new),
            modified=len(self.modified),
            unchanged=len(self.unchanged),
            deleted=len(self.deleted),
            resurrected=len(self.resurrected),
        )


def diff_observations(
    observed: Mapping[str, str],
    current: Iterable[FileRecord],
    *,
    roots: Optional[Iterable[str]] = None,
    formats: Optional[Iterable[FileFormat]] = None,
    protected: Iterable[str] = (),
) -> ChangeSet:
    """Pure classification of observed (path -> file_hash) against the
    current non-OLD rows. Without scope arguments, every unobserved LATEST
    row counts as deleted; with them, deletion is confined to rows whose
    path and format fall inside the scanned scope and outside the
    protected (errored) set, mirroring commit semantics."""
    change = ChangeSet()
    non_old = {r.filepath: r for r in current if r.status != "OLD"}
    for path in sorted(observed):
        row = non_old.get(path)
        if row is None:
            change.new.append(path)
        elif row.status == "DELETED":
            change.new.append(path)
            change.resurrected.append(path)
        elif row.file_hash == observed[path]:
            change.unchanged.append(path)
        else:
            change.modified.append(path)
    format_values = None if formats is None else {f for f in formats}
    protected = tuple(protected)
    for path in sorted(non_old):
        row = non_old[path]
        if row.status != "LATEST" or path in observed:
            continue
        if roots is not None and not path_in_scope(path, roots):
            continue
        if format_values is not None and row.format not in format_values:
            continue
        if path_protected(path, protected):
            continue
        change.deleted.append(path)
    return change


def run_scan(
    store: LedgerStore,
    username: str,
    mac: str,
    now: Optional[datetime] = None,
    limits: Optional[WalkLimits] = None,
) -> ScanReport:
    """Execute one full scan for (username, mac) and commit it.

    Per-file problems (unreadable files, corrupt archives, split-hash
    mismatches) are carried in the report and never block the commit; an
    errored path is also shielded from deletion inference, so a transient
    read failure cannot fabricate a compliance event. A store failure at
    commit yields committed=False with the would-be counts; the ledger is
    left untouched.
    """
    mac = normalize_mac(mac)
    config = store.get_machine(username, mac)
    if config is None:
        raise UnregisteredMachineError(f"user {username!r} on machine {mac} is not registered")
    scan_time = now if now is not None else utc_now()

    staging = store.begin_scan(mac, username=username, now=scan_time)
    try:
        candidates = walk_roots(config.paths, set(config.formats), limits, staging.errors)
        for candidate in candidates:
            try:
                fingerprint, problem = fingerprint_candidate(candidate)
            except OSError as exc:
                staging.errors.append((candidate.rendered_path, f"read failed: {exc}"))
                continue
            if problem is not None:
                staging.errors.append((candidate.rendered_path, problem))
            stage_observation(staging, candidate.rendered_path, candidate.sniff.format, fingerprint)

        try:
            summary = store.commit_scan(staging, scan_time)
            committed = True
        except StoreError as exc:
            staging.errors.append(("", f"commit failed: {exc}"))
            current = [r for r in store.query_files(mac=mac) if r.status != "OLD"]
            observed_hashes = {p: fp.file_hash for p, (_, fp) in staging.observations.items()}
            summary = diff_observations(
                observed_hashes,
                current,
                roots=staging.roots,
                formats=staging.formats,
                protected=[p for p, _ in staging.errors if p],
            ).summary()
            committed = False
    finally:
        store.abort_scan(staging)  # releases the lock; no-op after a commit

    return ScanReport(
        mac=mac,
        username=username,
        started_at=scan_time,
        finished_at=utc_now(),
        counts=summary,
        errors=tuple(staging.errors),
        committed=committed,
    )
