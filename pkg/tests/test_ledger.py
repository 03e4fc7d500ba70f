"""Ledger semantics: config upserts, the version/status state machine,
staleness, filtering, locking, and the structural audit."""

from __future__ import annotations

import re
import sqlite3
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phitrack.fingerprint import EMPTY_SHA256, Fingerprint
from phitrack.ledger import (
    DuplicateObservationError,
    ScanInProgressError,
    SqliteLedger,
    StoreError,
    UnregisteredMachineError,
    ValidationError,
    from_timestamp,
    is_stale,
    normalize_mac,
    stage_observation,
    to_timestamp,
)
from phitrack.sniff import FileFormat

MAC = "aabbccddeeff"
T0 = datetime(2026, 1, 5, 12, 0, 0, tzinfo=timezone.utc)


def ts(hours: float) -> datetime:
    return T0 + timedelta(hours=hours)


def fp(seed: str) -> Fingerprint:
    digest = (seed * 64)[:64]
    return Fingerprint(digest, digest, EMPTY_SHA256)


@pytest.fixture
def store(tmp_path) -> SqliteLedger:
    return SqliteLedger(str(tmp_path / "ledger.db"))


@pytest.fixture
def registered(store) -> SqliteLedger:
    store.upsert_machine_config("alice", MAC, ["/data"], {FileFormat.DICOM}, 86400)
    return store


def scan(store, observations: dict[str, Fingerprint], when: datetime, *, username="alice",
         roots=None, formats=None, errors=()):
    staging = store.begin_scan(MAC, username=username, roots=roots, formats=formats, now=when)
    for path, fingerprint in observations.items():
        stage_observation(staging, path, FileFormat.DICOM, fingerprint)
    staging.errors.extend(errors)
    return store.commit_scan(staging, when)


def dump_file_log(store):
    with sqlite3.connect(store.path) as conn:
        return conn.execute(
            "SELECT mac, filepath, version, status, file_hash FROM file_log"
            " ORDER BY mac, filepath, version"
        ).fetchall()


# ---------------------------------------------------------------------------
# Machine config


def test_new_config_starts_stale(store):
    config = store.upsert_machine_config("alice", "AA:BB:CC:DD:EE:FF", ["/data"], {FileFormat.DICOM}, 86400)
    assert config.mac == MAC  # separators stripped, lowercased
    assert config.stale is True
    assert config.last_scanned is None


def test_upsert_replaces_scan_scope(registered):
    config = registered.upsert_machine_config(
        "alice", MAC, ["/data", "/scratch"], {FileFormat.DICOM, FileFormat.NIFTI1}, 3600
    )
    assert config.paths == ("/data", "/scratch")
    assert config.formats == frozenset({FileFormat.DICOM, FileFormat.NIFTI1})
    assert config.scan_frequency == 3600


def test_config_validation_rejections(store):
    with pytest.raises(ValidationError) as err:
        store.upsert_machine_config("alice", MAC, ["/data"], {FileFormat.DICOM}, 0)
    assert err.value.field == "scan_frequency"
    with pytest.raises(ValidationError) as err:
        store.upsert_machine_config("alice", "nothex", ["/data"], {FileFormat.DICOM}, 60)
    assert err.value.field == "mac"
    with pytest.raises(ValidationError) as err:
        store.upsert_machine_config("alice", MAC, [], {FileFormat.DICOM}, 60)
    assert err.value.field == "paths"
    with pytest.raises(ValidationError) as err:
        store.upsert_machine_config("alice", MAC, ["relative/path"], {FileFormat.DICOM}, 60)
    assert err.value.field == "paths"
    with pytest.raises(ValidationError) as err:
        store.upsert_machine_config("alice", MAC, ["/data"], set(), 60)
    assert err.value.field == "formats"
    with pytest.raises(ValidationError) as err:
        store.upsert_machine_config("", MAC, ["/data"], {FileFormat.DICOM}, 60)
    assert err.value.field == "username"


def test_normalize_mac_forms():
    assert normalize_mac("AA-BB-CC-DD-EE-FF") == MAC
    assert normalize_mac("aabb.ccdd.eeff") == MAC
    with pytest.raises(ValidationError):
        normalize_mac("aabbccddeef")  # 11 digits
    with pytest.raises(ValidationError):
        normalize_mac("aabbccddeefg")


# ---------------------------------------------------------------------------
# Scan lifecycle: begin / stage / abort


def test_begin_requires_registration(store):
    with pytest.raises(UnregisteredMachineError):
        store.begin_scan(MAC)


def test_begin_unknown_user_on_known_mac(registered):
    with pytest.raises(UnregisteredMachineError):
        registered.begin_scan(MAC, username="mallory")


def test_abort_leaves_file_log_untouched(registered):
    scan(registered, {"/data/a.dcm": fp("a")}, ts(0))
    before = dump_file_log(registered)
    staging = registered.begin_scan(MAC, now=ts(1))
    for i in range(100):
        stage_observation(staging, f"/data/f{i}.dcm", FileFormat.DICOM, fp(str(i % 10)))
    registered.abort_scan(staging)
    assert dump_file_log(registered) == before
    with pytest.raises(StoreError):
        registered.commit_scan(staging, ts(1))  # staging is dead after abort


def test_duplicate_observation_rejected(registered):
    staging = registered.begin_scan(MAC, now=ts(0))
    stage_observation(staging, "/data/a.dcm", FileFormat.DICOM, fp("a"))
    with pytest.raises(DuplicateObservationError):
        stage_observation(staging, "/data/a.dcm", FileFormat.DICOM, fp("b"))
    registered.abort_scan(staging)


def test_concurrent_scan_locked_out(registered):
    first = registered.begin_scan(MAC, now=ts(0))
    with pytest.raises(ScanInProgressError):
        registered.begin_scan(MAC, now=ts(1))
    registered.abort_scan(first)
    second = registered.begin_scan(MAC, now=ts(1))  # released
    registered.abort_scan(second)


def test_stuck_lock_stolen_after_a_day(registered):
    registered.begin_scan(MAC, now=ts(0))  # never finished
    with pytest.raises(ScanInProgressError):
        registered.begin_scan(MAC, now=ts(24))  # exactly 86400s: not yet stealable
    staging = registered.begin_scan(MAC, now=ts(24) + timedelta(seconds=1))
    registered.abort_scan(staging)


# ---------------------------------------------------------------------------
# Commit: the version/status state machine


def test_first_scan_three_new(registered):
    summary = scan(registered, {f"/data/{n}.dcm": fp(n) for n in "abc"}, ts(0))
    assert summary.as_dict() == {"new": 3, "modified": 0, "unchanged": 0, "deleted": 0, "resurrected": 0}
    rows = registered.query_files()
    assert [(r.filepath, r.version, r.status) for r in rows] == [
        ("/data/a.dcm", 1, "LATEST"),
        ("/data/b.dcm", 1, "LATEST"),
        ("/data/c.dcm", 1, "LATEST"),
    ]


def test_second_scan_one_modified(registered):
    files = {f"/data/{n}.dcm": fp(n) for n in "abc"}
    scan(registered, files, ts(0))
    files["/data/b.dcm"] = fp("B")
    summary = scan(registered, files, ts(1))
    assert summary.modified == 1 and summary.unchanged == 2 and summary.new == 0
    history = registered.file_history(MAC, "/data/b.dcm")
    assert [(r.version, r.status) for r in history] == [(1, "OLD"), (2, "LATEST")]
    assert history[1].file_hash == fp("B").file_hash


def test_move_is_delete_plus_create(registered):
    scan(registered, {"/data/a.dcm": fp("a")}, ts(0))
    summary = scan(registered, {"/data/b.dcm": fp("a")}, ts(1))
    assert summary.new == 1 and summary.deleted == 1
    tombstones = registered.query_files(status="DELETED")
    assert [(r.filepath, r.version) for r in tombstones] == [("/data/a.dcm", 2)]
    # the tombstone preserves the last-seen content hashes
    assert tombstones[0].file_hash == fp("a").file_hash
    assert registered.query_files(status="LATEST")[0].filepath == "/data/b.dcm"


def test_unchanged_updates_last_scanned_only(registered):
    scan(registered, {"/data/a.dcm": fp("a")}, ts(0))
    before = registered.query_files()[0]
    summary = scan(registered, {"/data/a.dcm": fp("a")}, ts(2))
    assert summary.unchanged == 1
    after = registered.query_files()[0]
    assert after.record_id == before.record_id
    assert after.version == 1 and after.status == "LATEST"
    assert after.last_modified == before.last_modified == ts(0)
    assert after.last_scanned == ts(2)


def test_resurrection_extends_version_chain(registered):
    scan(registered, {"/data/a.dcm": fp("a")}, ts(0))
    scan(registered, {}, ts(1))  # deleted -> v2 tombstone
    summary = scan(registered, {"/data/a.dcm": fp("a2")}, ts(2))
    assert summary.new == 1 and summary.resurrected == 1
    history = registered.file_history(MAC, "/data/a.dcm")
    assert [(r.version, r.status) for r in history] == [(1, "OLD"), (2, "OLD"), (3, "LATEST")]
    assert registered.audit() == []


def test_deletion_scoped_to_scanned_formats(registered):
    registered.upsert_machine_config(
        "alice", MAC, ["/data"], {FileFormat.DICOM, FileFormat.NIFTI1}, 86400
    )
    staging = registered.begin_scan(MAC, now=ts(0))
    stage_observation(staging, "/data/a.dcm", FileFormat.DICOM, fp("a"))
    stage_observation(staging, "/data/b.nii", FileFormat.NIFTI1, fp("b"))
    registered.commit_scan(staging, ts(0))
    # a NIfTI-only scan must not tombstone the unobserved DICOM row
    summary = scan(registered, {}, ts(1), formats={FileFormat.NIFTI1})
    assert summary.deleted == 1
    assert [r.filepath for r in registered.query_files(status="DELETED")] == ["/data/b.nii"]
    assert registered.query_files(mac=MAC, status="LATEST")[0].filepath == "/data/a.dcm"


def test_deletion_scoped_to_scanned_roots(registered):
    registered.upsert_machine_config("alice", MAC, ["/data", "/other"], {FileFormat.DICOM}, 86400)
    scan(registered, {"/data/a.dcm": fp("a"), "/other/b.dcm": fp("b")}, ts(0))
    summary = scan(registered, {}, ts(1), roots=["/data"])
    assert summary.deleted == 1
    assert [r.filepath for r in registered.query_files(status="DELETED")] == ["/data/a.dcm"]


def test_errored_paths_protected_from_deletion(registered):
    scan(registered, {"/data/a.dcm": fp("a"), "/data/sub/b.dcm": fp("b"), "/data/x.zip!m.dcm": fp("m")}, ts(0))
    summary = scan(
        registered,
        {},
        ts(1),
        errors=[("/data/a.dcm", "read failed"), ("/data/sub", "walk error"), ("/data/x.zip", "corrupt")],
    )
    # every unobserved path is excused by an error entry: file, dir prefix, archive prefix
    assert summary.deleted == 0
    assert registered.query_files(status="DELETED") == []


def test_commit_requires_live_lock(registered):
    staging = registered.begin_scan(MAC, now=ts(0))
    stage_observation(staging, "/data/a.dcm", FileFormat.DICOM, fp("a"))
    with sqlite3.connect(registered.path) as conn:
        conn.execute("DELETE FROM scan_lock")
    with pytest.raises(StoreError):
        registered.commit_scan(staging, ts(0))
    assert staging.alive  # retryable
    assert dump_file_log(registered) == []


def test_scan_time_must_not_precede_start(registered):
    staging = registered.begin_scan(MAC, now=ts(1))
    with pytest.raises(ValidationError):
        registered.commit_scan(staging, ts(0))
    registered.abort_scan(staging)


# ---------------------------------------------------------------------------
# Staleness


def test_stale_rule_boundary_cases():
    last = ts(0)
    assert is_stale(last + timedelta(seconds=3601), last, 3600) is True
    assert is_stale(last + timedelta(seconds=3600), last, 3600) is False
    assert is_stale(last, None, 3600) is True


@settings(max_examples=300, deadline=None)
@given(
    elapsed=st.integers(min_value=0, max_value=10_000_000),
    frequency=st.integers(min_value=1, max_value=10_000_000),
    never_scanned=st.booleans(),
)
def test_stale_rule_property(elapsed, frequency, never_scanned):
    now = T0 + timedelta(seconds=elapsed)
    last = None if never_scanned else T0
    assert is_stale(now, last, frequency) is (True if never_scanned else elapsed > frequency)


def test_commit_updates_invoking_user_and_recomputes_all(store):
    store.upsert_machine_config("alice", MAC, ["/data"], {FileFormat.DICOM}, 3600)
    store.upsert_machine_config("bob", "001122334455", ["/data"], {FileFormat.DICOM}, 3600)
    store.upsert_machine_config("bob", MAC, ["/data"], {FileFormat.DICOM}, 999_999_999)
    scan(store, {"/data/a.dcm": fp("a")}, ts(0), username="alice")
    machines = {(m.username, m.mac): m for m in store.list_machines()}
    assert machines[("alice", MAC)].last_scanned == ts(0)
    assert machines[("alice", MAC)].stale is False
    # shared-folder rule: only the invoking user's row gets last_scanned
    assert machines[("bob", MAC)].last_scanned is None
    assert machines[("bob", MAC)].stale is True  # recomputed: never scanned
    assert machines[("bob", "001122334455")].last_scanned is None


def test_recompute_staleness_counts_and_is_idempotent(store):
    store.upsert_machine_config("alice", MAC, ["/data"], {FileFormat.DICOM}, 3600)
    store.upsert_machine_config("bob", "001122334455", ["/data"], {FileFormat.DICOM}, 3600)
    scan(store, {}, ts(0), username="alice")
    late = ts(0) + timedelta(seconds=3601)
    assert store.recompute_staleness(ts(0)) == 1  # bob never scanned
    assert store.recompute_staleness(late) == 2
    assert store.recompute_staleness(late) == 2
    assert [m.stale for m in store.list_machines()] == [True, True]
    assert store.recompute_staleness(ts(0) + timedelta(seconds=3600)) == 1  # boundary: not stale


def test_list_machines_pure_staleness_view(store):
    store.upsert_machine_config("alice", MAC, ["/data"], {FileFormat.DICOM}, 3600)
    scan(store, {}, ts(0), username="alice")
    raw_before = dump_mac_log(store)
    viewed = store.list_machines(now=ts(0) + timedelta(seconds=4000))
    assert viewed[0].stale is True
    assert dump_mac_log(store) == raw_before  # the view wrote nothing
    assert store.list_machines(now=ts(0) + timedelta(seconds=4000), stale=False) == []


def dump_mac_log(store):
    with sqlite3.connect(store.path) as conn:
        return conn.execute("SELECT * FROM mac_log ORDER BY username, mac").fetchall()


# ---------------------------------------------------------------------------
# Queries


def test_query_empty_store(store):
    assert store.query_files() == []


def test_query_filters_conjunctive(registered):
    scan(registered, {"/data/a.dcm": fp("a"), "/data/b.dcm": fp("b")}, ts(0))
    scan(registered, {"/data/a.dcm": fp("A"), "/data/b.dcm": fp("b")}, ts(1))
    assert len(registered.query_files()) == 3
    assert [r.filepath for r in registered.query_files(status="LATEST")] == ["/data/a.dcm", "/data/b.dcm"]
    assert [r.version for r in registered.query_files(version=2)] == [2]
    # scanned_after/scanned_before are strict
    assert len(registered.query_files(scanned_after=ts(0))) == 3  # all touched at ts(1)
    assert registered.query_files(scanned_after=ts(1)) == []
    assert registered.query_files(scanned_before=ts(0)) == []
    assert len(registered.query_files(scanned_before=ts(1))) == 0  # v1 OLD was re-stamped at ts(1)
    assert len(registered.query_files(mac=MAC, format=FileFormat.DICOM, status="OLD")) == 1


def test_query_rejects_bad_values(registered):
    with pytest.raises(ValidationError) as err:
        registered.query_files(status="MISSING")
    assert err.value.field == "status"
    with pytest.raises(ValidationError):
        registered.query_files(version=0)
    with pytest.raises(ValueError):
        registered.query_files(format="EXE")


def test_query_pagination(registered):
    scan(registered, {f"/data/{i:02}.dcm": fp(str(i % 10)) for i in range(5)}, ts(0))
    page = registered.query_files(limit=2, offset=2)
    assert [r.filepath for r in page] == ["/data/02.dcm", "/data/03.dcm"]
    assert registered.count_files() == 5


def test_file_history_shapes(registered):
    files = {"/data/a.dcm": fp("a")}
    scan(registered, files, ts(0))
    scan(registered, {"/data/a.dcm": fp("b")}, ts(1))
    scan(registered, {"/data/a.dcm": fp("c")}, ts(2))
    history = registered.file_history(MAC, "/data/a.dcm")
    assert [(r.version, r.status) for r in history] == [(1, "OLD"), (2, "OLD"), (3, "LATEST")]
    assert registered.file_history(MAC, "/data/unknown.dcm") == []


# ---------------------------------------------------------------------------
# Reminders


def test_reminders_require_registration_and_allow_duplicates(registered):
    with pytest.raises(UnregisteredMachineError):
        registered.add_reminder("mallory", MAC, "please scan", ts(0))
    first = registered.add_reminder("alice", MAC, "please scan", ts(0))
    second = registered.add_reminder("alice", MAC, "please scan", ts(0))
    assert first.id != second.id
    assert first.delivered is False
    listed = registered.list_reminders()
    assert {r.id for r in listed} == {first.id, second.id}


# ---------------------------------------------------------------------------
# Storage details


def test_timestamps_stored_as_utc_seconds_iso(registered):
    scan(registered, {"/data/a.dcm": fp("a")}, ts(0))
    with sqlite3.connect(registered.path) as conn:
        (lm, ls) = conn.execute("SELECT last_modified, last_scanned FROM file_log").fetchone()
        (mac_ls,) = conn.execute("SELECT last_scanned FROM mac_log").fetchone()
    pattern = r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$"
    for value in (lm, ls, mac_ls):
        assert re.match(pattern, value)
    assert from_timestamp(lm) == ts(0)
    assert to_timestamp(ts(0)) == "2026-01-05T12:00:00Z"


def test_record_ids_are_canonical_uuids(registered):
    scan(registered, {"/data/a.dcm": fp("a"), "/data/b.dcm": fp("b")}, ts(0))
    ids = [r.record_id for r in registered.query_files()]
    assert len(set(ids)) == 2
    for record_id in ids:
        assert re.match(r"^[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$", record_id)


def test_audit_clean_then_detects_planted_corruption(registered):
    scan(registered, {"/data/a.dcm": fp("a")}, ts(0))
    scan(registered, {"/data/a.dcm": fp("b")}, ts(1))
    assert registered.audit() == []
    with sqlite3.connect(registered.path) as conn:
        conn.execute("UPDATE file_log SET status='LATEST' WHERE version=1")
        conn.commit()
    violations = registered.audit()
    assert any("non-OLD" in v for v in violations)
    with sqlite3.connect(registered.path) as conn:
        conn.execute("UPDATE file_log SET status='OLD'")
        conn.commit()
    violations = registered.audit()
    assert any("non-OLD" in v for v in violations)


def test_audit_detects_version_gap(registered):
    scan(registered, {"/data/a.dcm": fp("a")}, ts(0))
    with sqlite3.connect(registered.path) as conn:
        conn.execute("UPDATE file_log SET version=3")
        conn.commit()
    assert any("contiguous" in v for v in registered.audit())


def test_fault_injection_smoke_rolls_back(registered):
    scan(registered, {"/data/a.dcm": fp("a")}, ts(0))
    staging = registered.begin_scan(MAC, now=ts(1))
    stage_observation(staging, "/data/b.dcm", FileFormat.DICOM, fp("b"))
    with open(registered.path, "rb") as fh:
        before = fh.read()

    def boom(label):
        raise RuntimeError(f"injected at {label}")

    registered.fault_hook = boom
    with pytest.raises(StoreError):
        registered.commit_scan(staging, ts(1))
    registered.fault_hook = None
    with open(registered.path, "rb") as fh:
        assert fh.read() == before
    # staging retryable after the failure
    summary = registered.commit_scan(staging, ts(1))
    assert summary.new == 1
