"""Persistent scan ledger: machine configs, per-file version history,
reminders, and atomic scan commits.

Two core tables: mac_log holds one row per (username, mac) with that
user's scan scope and staleness; file_log holds one row per
(mac, filepath, version) with status LATEST, OLD or DELETED. For every
tracked path exactly one row is non-OLD and it carries the highest
version. Deletion is recorded as a tombstone row (version+1, DELETED) so
the time of disappearance is auditable. A scan stages observations in
memory and applies them in one all-or-nothing transaction.

SQLite is the reference backend (rollback-journal mode, so an aborted
commit restores the database file byte for byte); LedgerStore is the
interface alternate backends implement.
"""

from __future__ import annotations

import abc
import json
import os
import re
import sqlite3
import uuid
from contextlib import closing
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Callable, Iterable, Optional, Union

from .discovery import LogicalPath
from .fingerprint import EMPTY_SHA256, Fingerprint
from .sniff import FileFormat

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"

# A crashed scan's lock may be stolen after this many seconds.
LOCK_STEAL_AFTER = 86400


class ValidationError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class UnregisteredMachineError(LookupError):
    pass


class ScanInProgressError(RuntimeError):
    pass


class DuplicateObservationError(ValueError):
    pass


class StoreError(RuntimeError):
    """A commit failed and was rolled back; staging remains retryable."""


def to_timestamp(dt: datetime) -> str:
    """UTC, seconds precision, ISO-8601 with Z suffix."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0).strftime(TIMESTAMP_FORMAT)


def from_timestamp(text: str) -> datetime:
    return datetime.strptime(text, TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)


def utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def parse_time_bound(field: str, text: str) -> datetime:
    """Accept a full UTC timestamp or a bare date (taken as midnight UTC)."""
    try:
        return from_timestamp(text)
    except ValueError:
        pass
    try:
        return datetime.strptime(text, "%Y-%m-%d").replace(tzinfo=timezone.utc)
    except ValueError:
        raise ValidationError(field, f"{text!r} is not YYYY-MM-DDThh:mm:ssZ or YYYY-MM-DD") from None


def is_stale(now: datetime, last_scanned: Optional[datetime], scan_frequency: int) -> bool:
    """Strictly more than scan_frequency seconds since last_scanned; a
    machine that never scanned is always stale."""
    if last_scanned is None:
        return True
    return (now - last_scanned).total_seconds() > scan_frequency


MAC_PATTERN = re.compile(r"^[0-9a-f]{12}$")


def normalize_mac(text: str) -> str:
    mac = re.sub(r"[:\-\.\s]", "", text.strip().lower())
    if not MAC_PATTERN.match(mac):
        raise ValidationError("mac", f"{text!r} is not a 12-hex-digit machine id")
    return mac


@dataclass(frozen=True)
class MachineConfig:
    username: str
    mac: str
    paths: tuple[str, ...]
    formats: frozenset[FileFormat]
    scan_frequency: int
    last_scanned: Optional[datetime] = None
    stale: bool = True


@dataclass(frozen=True)
class FileRecord:
    record_id: str
    mac: str
    filepath: str
    format: FileFormat
    file_hash: str
    meta_hash: str
    pixel_hash: str
    version: int
    status: str  # LATEST | OLD | DELETED
    last_modified: datetime
    last_scanned: datetime


@dataclass(frozen=True)
class ReminderRecord:
    id: str
    username: str
    mac: str
    created_at: datetime
    note: str
    delivered: bool = False


@dataclass(frozen=True)
class ScanSummary:
    new: int = 0
    modified: int = 0
    unchanged: int = 0
    deleted: int = 0
    resurrected: int = 0  # subset of new: tombstoned paths that reappeared

    def as_dict(self) -> dict:
        return {
            "new": self.new,
            "modified": self.modified,
            "unchanged": self.unchanged,
            "deleted": self.deleted,
            "resurrected": self.resurrected,
        }


@dataclass
class ScanStaging:
    """In-memory accumulation for one in-flight scan; nothing touches
    file_log until commit."""

    mac: str
    username: str
    started_at: datetime
    roots: tuple[str, ...]
    formats: frozenset[FileFormat]
    token: str
    observations: dict[str, tuple[FileFormat, Fingerprint]] = field(default_factory=dict)
    errors: list[tuple[str, str]] = field(default_factory=list)
    alive: bool = True


PathLike = Union[str, LogicalPath]


def _render(path: PathLike) -> str:
    return path.render() if isinstance(path, LogicalPath) else path


def stage_observation(
    staging: ScanStaging, path: PathLike, fmt: FileFormat, fingerprint: Fingerprint
) -> None:
    """Record one observed file. The walk is deterministic, so a repeated
    path within one scan signals a bug upstream and is rejected."""
    if not staging.alive:
        raise StoreError("staging is no longer active")
    rendered = _render(path)
    if rendered in staging.observations:
        raise DuplicateObservationError(rendered)
    staging.observations[rendered] = (fmt, fingerprint)


def path_in_scope(filepath: str, roots: Iterable[str]) -> bool:
    """True when the rendered path lies under one of the roots."""
    for root in roots:
        base = root.rstrip("/") or "/"
        if filepath == base or filepath.startswith(base + "/" if base != "/" else "/"):
            return True
    return False


def path_protected(filepath: str, error_paths: Iterable[str]) -> bool:
    """A path that errored (or lives under an errored file/dir/archive)
    was unobservable this scan and must not be inferred deleted."""
    for errored in error_paths:
        if filepath == errored or filepath.startswith(errored + "!") or filepath.startswith(
            errored.rstrip("/") + "/"
        ):
            return True
    return False


_SCHEMA = """
CREATE TABLE IF NOT EXISTS mac_log (
    username TEXT NOT NULL,
    mac TEXT NOT NULL,
    paths TEXT NOT NULL,
    formats TEXT NOT NULL,
    scan_frequency INTEGER NOT NULL CHECK (scan_frequency > 0),
    last_scanned TEXT,
    stale INTEGER NOT NULL DEFAULT 1,
    PRIMARY KEY (username, mac)
);
CREATE TABLE IF NOT EXISTS file_log (
    record_id TEXT PRIMARY KEY,
    mac TEXT NOT NULL,
    filepath TEXT NOT NULL,
    format TEXT NOT NULL,
    file_hash TEXT NOT NULL,
    meta_hash TEXT NOT NULL,
    pixel_hash TEXT NOT NULL,
    version INTEGER NOT NULL CHECK (version >= 1),
    status TEXT NOT NULL CHECK (status IN ('LATEST', 'OLD', 'DELETED')),
    last_modified TEXT NOT NULL,
    last_scanned TEXT NOT NULL,
    UNIQUE (mac, filepath, version)
);
CREATE INDEX IF NOT EXISTS file_log_by_path ON file_log (mac, filepath);
CREATE TABLE IF NOT EXISTS reminders (
    id TEXT PRIMARY KEY,
    username TEXT NOT NULL,
    mac TEXT NOT NULL,
    created_at TEXT NOT NULL,
    note TEXT NOT NULL,
    delivered INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS scan_lock (
    mac TEXT PRIMARY KEY,
    token TEXT NOT NULL,
    started_at TEXT NOT NULL
);
"""


class LedgerStore(abc.ABC):
    """Backend contract; SqliteLedger is the reference implementation."""

    @abc.abstractmethod
    def upsert_machine_config(self, username, mac, paths, formats, scan_frequency) -> MachineConfig: ...

    @abc.abstractmethod
    def get_machine(self, username: str, mac: str) -> Optional[MachineConfig]: ...

    @abc.abstractmethod
    def list_machines(self, now: Optional[datetime] = None, stale: Optional[bool] = None) -> list[MachineConfig]: ...

    @abc.abstractmethod
    def begin_scan(self, mac, username=None, roots=None, formats=None, now=None) -> ScanStaging: ...

    @abc.abstractmethod
    def abort_scan(self, staging: ScanStaging) -> None: ...

    @abc.abstractmethod
    def commit_scan(self, staging: ScanStaging, scan_time: datetime) -> ScanSummary: ...

    @abc.abstractmethod
    def recompute_staleness(self, now: datetime) -> int: ...

    @abc.abstractmethod
    def query_files(self, mac=None, format=None, status=None, scanned_after=None,
                    scanned_before=None, version=None, limit=None, offset=0) -> list[FileRecord]: ...

    @abc.abstractmethod
    def count_files(self, mac=None, format=None, status=None, scanned_after=None,
                    scanned_before=None, version=None) -> int: ...

    @abc.abstractmethod
    def file_history(self, mac: str, filepath: str) -> list[FileRecord]: ...

    @abc.abstractmethod
    def add_reminder(self, username: str, mac: str, note: str, now: datetime) -> ReminderRecord: ...

    @abc.abstractmethod
    def list_reminders(self) -> list[ReminderRecord]: ...

    @abc.abstractmethod
    def summary(self, now: datetime) -> dict: ...

    @abc.abstractmethod
    def audit(self) -> list[str]: ...


class SqliteLedger(LedgerStore):
    """Single-file store. Each operation opens its own connection, so
    concurrent readers never observe a mid-commit state (rollback-journal
    isolation). ``fault_hook``, when set, is invoked with a label before
    every write statement inside commit_scan and before the final COMMIT;
    tests use it to prove all-or-nothing behaviour."""

    def __init__(self, path: str, synchronous: str = "FULL"):
        if synchronous not in ("FULL", "NORMAL", "OFF"):
            raise ValidationError("synchronous", synchronous)
        self.path = path
        self.synchronous = synchronous
        self.fault_hook: Optional[Callable[[str], None]] = None
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        with closing(self._connect()) as conn:
            conn.executescript(_SCHEMA)

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.path, timeout=10, isolation_level=None)
        conn.row_factory = sqlite3.Row
        conn.execute("PRAGMA journal_mode=DELETE")
        conn.execute(f"PRAGMA synchronous={self.synchronous}")
        return conn

    def _fault(self, label: str) -> None:
        if self.fault_hook is not None:
            self.fault_hook(label)

    # -- machine configs ----------------------------------------------------

    def upsert_machine_config(self, username, mac, paths, formats, scan_frequency) -> MachineConfig:
        if not username or not str(username).strip():
            raise ValidationError("username", "must be non-empty")
        mac = normalize_mac(mac)
        paths = tuple(str(p) for p in paths)
        if not paths:
            raise ValidationError("paths", "must list at least one root")
        for p in paths:
            if not os.path.isabs(p):
                raise ValidationError("paths", f"{p!r} is not absolute")
        formats = frozenset(
            f if isinstance(f, FileFormat) else FileFormat.from_name(f) for f in formats
        )
        if not formats:
            raise ValidationError("formats", "must list at least one format")
        if not isinstance(scan_frequency, int) or scan_frequency <= 0:
            raise ValidationError("scan_frequency", "must be a positive number of seconds")
        with closing(self._connect()) as conn:
            row = conn.execute(
                "SELECT last_scanned FROM mac_log WHERE username=? AND mac=?", (username, mac)
            ).fetchone()
            last_scanned = row["last_scanned"] if row else None
            stale = is_stale(
                utc_now(), from_timestamp(last_scanned) if last_scanned else None, scan_frequency
            )
            conn.execute(
                "INSERT INTO mac_log (username, mac, paths, formats, scan_frequency, last_scanned, stale)"
                " VALUES (?, ?, ?, ?, ?, ?, ?)"
                " ON CONFLICT (username, mac) DO UPDATE SET"
                " paths=excluded.paths, formats=excluded.formats,"
                " scan_frequency=excluded.scan_frequency, stale=excluded.stale",
                (
                    username,
                    mac,
                    json.dumps(list(paths)),
                    json.dumps(sorted(f.value for f in formats)),
                    scan_frequency,
                    last_scanned,
                    int(stale),
                ),
            )
        config = self.get_machine(username, mac)
        assert config is not None
        return config

    @staticmethod
    def _machine_from_row(row: sqlite3.Row) -> MachineConfig:
        return MachineConfig(
            username=row["username"],
            mac=row["mac"],
            paths=tuple(json.loads(row["paths"])),
            formats=frozenset(FileFormat(f) for f in json.loads(row["formats"])),
            scan_frequency=row["scan_frequency"],
            last_scanned=from_timestamp(row["last_scanned"]) if row["last_scanned"] else None,
            stale=bool(row["stale"]),
        )

    def get_machine(self, username: str, mac: str) -> Optional[MachineConfig]:
        with closing(self._connect()) as conn:
            row = conn.execute(
                "SELECT * FROM mac_log WHERE username=? AND mac=?", (username, mac)
            ).fetchone()
        return self._machine_from_row(row) if row else None

    def list_machines(self, now: Optional[datetime] = None, stale: Optional[bool] = None) -> list[MachineConfig]:
        """With ``now``, staleness is evaluated against it in the returned
        objects without writing anything (read paths stay pure)."""
        with closing(self._connect()) as conn:
            rows = conn.execute("SELECT * FROM mac_log ORDER BY username, mac").fetchall()
        machines = [self._machine_from_row(r) for r in rows]
        if now is not None:
            machines = [
                replace(m, stale=is_stale(now, m.last_scanned, m.scan_frequency)) for m in machines
            ]
        if stale is not None:
            machines = [m for m in machines if m.stale is stale]
        return machines

    def machines_for_mac(self, mac: str) -> list[MachineConfig]:
        with closing(self._connect()) as conn:
            rows = conn.execute(
                "SELECT * FROM mac_log WHERE mac=? ORDER BY username", (mac,)
            ).fetchall()
        return [self._machine_from_row(r) for r in rows]

    # -- scan lifecycle ------------------------------------------------------

    def begin_scan(self, mac, username=None, roots=None, formats=None, now=None) -> ScanStaging:
        mac = normalize_mac(mac)
        now = now or utc_now()
        configs = self.machines_for_mac(mac)
        if not configs:
            raise UnregisteredMachineError(f"machine {mac} has no registered configuration")
        if username is None:
            if len(configs) > 1:
                raise ValidationError(
                    "username", f"machine {mac} has {len(configs)} configs; specify the user"
                )
            config = configs[0]
        else:
            matches = [c for c in configs if c.username == username]
            if not matches:
                raise UnregisteredMachineError(f"user {username!r} is not registered on {mac}")
            config = matches[0]
        token = str(uuid.uuid4())
        with closing(self._connect()) as conn:
            conn.execute("BEGIN IMMEDIATE")
            try:
                lock = conn.execute("SELECT * FROM scan_lock WHERE mac=?", (mac,)).fetchone()
                if lock is not None:
                    held_since = from_timestamp(lock["started_at"])
                    if (now - held_since).total_seconds() <= LOCK_STEAL_AFTER:
                        raise ScanInProgressError(
                            f"a scan of {mac} has been running since {lock['started_at']}"
                        )
                    conn.execute("DELETE FROM scan_lock WHERE mac=?", (mac,))
                conn.execute(
                    "INSERT INTO scan_lock (mac, token, started_at) VALUES (?, ?, ?)",
                    (mac, token, to_timestamp(now)),
                )
                conn.execute("COMMIT")
            except BaseException:
                conn.execute("ROLLBACK")
                raise
        return ScanStaging(
            mac=mac,
            username=config.username,
            started_at=now,
            roots=tuple(roots) if roots is not None else config.paths,
            formats=frozenset(formats) if formats is not None else config.formats,
            token=token,
        )

    def abort_scan(self, staging: ScanStaging) -> None:
        if not staging.alive:
            return
        staging.alive = False
        with closing(self._connect()) as conn:
            conn.execute(
                "DELETE FROM scan_lock WHERE mac=? AND token=?", (staging.mac, staging.token)
            )

    def commit_scan(self, staging: ScanStaging, scan_time: datetime) -> ScanSummary:
        if not staging.alive:
            raise StoreError("staging is no longer active")
        if scan_time < staging.started_at:
            raise ValidationError("scan_time", "precedes the scan's start time")
        ts = to_timestamp(scan_time)
        counts = {"new": 0, "modified": 0, "unchanged": 0, "deleted": 0, "resurrected": 0}
        error_paths = [path for path, _ in staging.errors]

        conn = self._connect()
        try:
            conn.execute("BEGIN IMMEDIATE")
            lock = conn.execute(
                "SELECT token FROM scan_lock WHERE mac=?", (staging.mac,)
            ).fetchone()
            if lock is None or lock["token"] != staging.token:
                raise StoreError("scan lock lost; another scan intervened")

            current = {
                row["filepath"]: row
                for row in conn.execute(
                    "SELECT * FROM file_log WHERE mac=? AND status != 'OLD'", (staging.mac,)
                )
            }

            def insert_row(filepath, fmt, fingerprint, version, status):
                self._fault(f"insert:{status}:{filepath}")
                conn.execute(
                    "INSERT INTO file_log (record_id, mac, filepath, format, file_hash,"
                    " meta_hash, pixel_hash, version, status, last_modified, last_scanned)"
                    " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                    (
                        str(uuid.uuid4()),
                        staging.mac,
                        filepath,
                        fmt.value,
                        fingerprint.file_hash,
                        fingerprint.meta_hash or EMPTY_SHA256,
                        fingerprint.pixel_hash or EMPTY_SHA256,
                        version,
                        status,
                        ts,
                        ts,
                    ),
                )

            def demote(record_id, filepath):
                self._fault(f"demote:{filepath}")
                conn.execute(
                    "UPDATE file_log SET status='OLD', last_scanned=? WHERE record_id=?",
                    (ts, record_id),
                )

            for filepath in sorted(staging.observations):
                fmt, fingerprint = staging.observations[filepath]
                row = current.get(filepath)
                if row is None:
                    counts["new"] += 1
                    insert_row(filepath, fmt, fingerprint, 1, "LATEST")
                elif row["status"] == "DELETED":
                    counts["new"] += 1
                    counts["resurrected"] += 1
                    demote(row["record_id"], filepath)
                    insert_row(filepath, fmt, fingerprint, row["version"] + 1, "LATEST")
                elif row["file_hash"] == fingerprint.file_hash:
                    counts["unchanged"] += 1
                    self._fault(f"unchanged:{filepath}")
                    conn.execute(
                        "UPDATE file_log SET last_scanned=? WHERE record_id=?",
                        (ts, row["record_id"]),
                    )
                else:
                    counts["modified"] += 1
                    demote(row["record_id"], filepath)
                    insert_row(filepath, fmt, fingerprint, row["version"] + 1, "LATEST")

            scanned_formats = {f.value for f in staging.formats}
            for filepath in sorted(current):
                row = current[filepath]
                if (
                    row["status"] != "LATEST"
                    or filepath in staging.observations
                    or row["format"] not in scanned_formats
                    or not path_in_scope(filepath, staging.roots)
                    or path_protected(filepath, error_paths)
                ):
                    continue
                counts["deleted"] += 1
                demote(row["record_id"], filepath)
                tombstone = Fingerprint(row["file_hash"], row["meta_hash"], row["pixel_hash"])
                insert_row(filepath, FileFormat(row["format"]), tombstone, row["version"] + 1, "DELETED")

            self._fault("mac-last-scanned")
            conn.execute(
                "UPDATE mac_log SET last_scanned=? WHERE username=? AND mac=?",
                (ts, staging.username, staging.mac),
            )
            for row in conn.execute(
                "SELECT username, mac, last_scanned, scan_frequency FROM mac_log"
                " ORDER BY username, mac"
            ).fetchall():
                stale = is_stale(
                    scan_time,
                    from_timestamp(row["last_scanned"]) if row["last_scanned"] else None,
                    row["scan_frequency"],
                )
                self._fault(f"stale:{row['username']}:{row['mac']}")
                conn.execute(
                    "UPDATE mac_log SET stale=? WHERE username=? AND mac=?",
                    (int(stale), row["username"], row["mac"]),
                )
            self._fault("release-lock")
            conn.execute(
                "DELETE FROM scan_lock WHERE mac=? AND token=?", (staging.mac, staging.token)
            )
            self._fault("commit")
            conn.execute("COMMIT")
        except BaseException as exc:
            conn.execute("ROLLBACK")
            conn.close()
            if isinstance(exc, (StoreError, ValidationError)):
                raise
            raise StoreError(f"commit failed and was rolled back: {exc}") from exc
        conn.close()
        staging.alive = False
        return ScanSummary(**counts)

    # -- staleness ------------------------------------------------------------

    def recompute_staleness(self, now: datetime) -> int:
        stale_count = 0
        with closing(self._connect()) as conn:
            conn.execute("BEGIN IMMEDIATE")
            try:
                for row in conn.execute(
                    "SELECT username, mac, last_scanned, scan_frequency FROM mac_log"
                ).fetchall():
                    stale = is_stale(
                        now,
                        from_timestamp(row["last_scanned"]) if row["last_scanned"] else None,
                        row["scan_frequency"],
                    )
                    stale_count += int(stale)
                    conn.execute(
                        "UPDATE mac_log SET stale=? WHERE username=? AND mac=?",
                        (int(stale), row["username"], row["mac"]),
                    )
                conn.execute("COMMIT")
            except BaseException:
                conn.execute("ROLLBACK")
                raise
        return stale_count

    # -- queries ----------------------------------------------------------------

    _FILE_FIELDS = (
        "record_id, mac, filepath, format, file_hash, meta_hash, pixel_hash,"
        " version, status, last_modified, last_scanned"
    )

    @staticmethod
    def _record_from_row(row: sqlite3.Row) -> FileRecord:
        return FileRecord(
            record_id=row["record_id"],
            mac=row["mac"],
            filepath=row["filepath"],
            format=FileFormat(row["format"]),
            file_hash=row["file_hash"],
            meta_hash=row["meta_hash"],
            pixel_hash=row["pixel_hash"],
            version=row["version"],
            status=row["status"],
            last_modified=from_timestamp(row["last_modified"]),
            last_scanned=from_timestamp(row["last_scanned"]),
        )

    @staticmethod
    def _file_filters(mac, format, status, scanned_after, scanned_before, version):
        clauses, params = [], []
        if mac is not None:
            clauses.append("mac=?")
            params.append(normalize_mac(mac))
        if format is not None:
            if not isinstance(format, FileFormat):
                try:
                    format = FileFormat.from_name(format)
                except ValueError as exc:
                    raise ValidationError("format", str(exc)) from None
            clauses.append("format=?")
            params.append(format.value)
        if status is not None:
            status = str(status).upper()
            if status not in ("LATEST", "OLD", "DELETED"):
                raise ValidationError("status", f"{status!r} is not LATEST, OLD or DELETED")
            clauses.append("status=?")
            params.append(status)
        if scanned_after is not None:
            clauses.append("last_scanned > ?")
            params.append(to_timestamp(scanned_after))
        if scanned_before is not None:
            clauses.append("last_scanned < ?")
            params.append(to_timestamp(scanned_before))
        if version is not None:
            if not isinstance(version, int) or version < 1:
                raise ValidationError("version", "must be a positive integer")
            clauses.append("version=?")
            params.append(version)
        where = (" WHERE " + " AND ".join(clauses)) if clauses else ""
        return where, params

    def query_files(self, mac=None, format=None, status=None, scanned_after=None,
                    scanned_before=None, version=None, limit=None, offset=0) -> list[FileRecord]:
        where, params = self._file_filters(mac, format, status, scanned_after, scanned_before, version)
        sql = f"SELECT {self._FILE_FIELDS} FROM file_log{where} ORDER BY mac, filepath, version"
        if limit is not None:
            sql += " LIMIT ? OFFSET ?"
            params = params + [limit, offset]
        with closing(self._connect()) as conn:
            rows = conn.execute(sql, params).fetchall()
        return [self._record_from_row(r) for r in rows]

    def count_files(self, mac=None, format=None, status=None, scanned_after=None,
                    scanned_before=None, version=None) -> int:
        where, params = self._file_filters(mac, format, status, scanned_after, scanned_before, version)
        with closing(self._connect()) as conn:
            (n,) = conn.execute(f"SELECT COUNT(*) FROM file_log{where}", params).fetchone()
        return n

    def file_history(self, mac: str, filepath: str) -> list[FileRecord]:
        with closing(self._connect()) as conn:
            rows = conn.execute(
                f"SELECT {self._FILE_FIELDS} FROM file_log WHERE mac=? AND filepath=?"
                " ORDER BY version",
                (normalize_mac(mac), filepath),
            ).fetchall()
        return [self._record_from_row(r) for r in rows]

    # -- reminders ------------------------------------------------------------

    def add_reminder(self, username: str, mac: str, note: str, now: datetime) -> ReminderRecord:
        mac = normalize_mac(mac)
        if self.get_machine(username, mac) is None:
            raise UnregisteredMachineError(f"{username!r} on {mac} is not registered")
        record = ReminderRecord(
            id=str(uuid.uuid4()),
            username=username,
            mac=mac,
            created_at=scan_time_floor(now),
            note=note,
            delivered=False,
        )
        with closing(self._connect()) as conn:
            conn.execute(
                "INSERT INTO reminders (id, username, mac, created_at, note, delivered)"
                " VALUES (?, ?, ?, ?, ?, 0)",
                (record.id, record.username, record.mac, to_timestamp(record.created_at), record.note),
            )
        return record

    def list_reminders(self) -> list[ReminderRecord]:
        with closing(self._connect()) as conn:
            rows = conn.execute("SELECT * FROM reminders ORDER BY created_at, id").fetchall()
        return [
            ReminderRecord(
                id=r["id"],
                username=r["username"],
                mac=r["mac"],
                created_at=from_timestamp(r["created_at"]),
                note=r["note"],
                delivered=bool(r["delivered"]),
            )
            for r in rows
        ]

    # -- aggregates and audit ----------------------------------------------------

    def summary(self, now: datetime) -> dict:
        machines = self.list_machines(now=now)
        with closing(self._connect()) as conn:
            (latest,) = conn.execute(
                "SELECT COUNT(*) FROM file_log WHERE status='LATEST'"
            ).fetchone()
            (deleted,) = conn.execute(
                "SELECT COUNT(*) FROM file_log WHERE status='DELETED'"
            ).fetchone()
        last_times = [m.last_scanned for m in machines if m.last_scanned is not None]
        return {
            "machines": len(machines),
            "stale_machines": sum(1 for m in machines if m.stale),
            "files_latest": latest,
            "files_deleted": deleted,
            "last_scan_time": max(last_times) if last_times else None,
        }

    def audit(self) -> list[str]:
        """Structural invariant check over the whole file_log."""
        violations: list[str] = []
        with closing(self._connect()) as conn:
            rows = conn.execute(
                "SELECT mac, filepath, version, status FROM file_log ORDER BY mac, filepath, version"
            ).fetchall()
        groups: dict[tuple[str, str], list[sqlite3.Row]] = {}
        for row in rows:
            groups.setdefault((row["mac"], row["filepath"]), []).append(row)
        for (mac, filepath), versions in groups.items():
            where = f"{mac}:{filepath}"
            numbers = [r["version"] for r in versions]
            if numbers != list(range(1, len(numbers) + 1)):
                violations.append(f"{where}: versions not contiguous from 1: {numbers}")
            non_old = [r for r in versions if r["status"] != "OLD"]
            if len(non_old) != 1:
                violations.append(f"{where}: {len(non_old)} non-OLD rows, expected exactly 1")
            elif non_old[0]["version"] != max(numbers):
                violations.append(
                    f"{where}: non-OLD row has version {non_old[0]['version']}, max is {max(numbers)}"
                )
        return violations


def scan_time_floor(now: datetime) -> datetime:
    """Seconds precision, UTC; the granularity every stored timestamp uses."""
    if now.tzinfo is None:
        now = now.replace(tzinfo=timezone.utc)
    return now.astimezone(timezone.utc).replace(microsecond=0)
