"""Operator command line: registration, scan runs, ledger reports,
staleness checks, the invariant audit, and serving the review API.

Exit codes: 0 success, 1 validation/usage problem, 2 store or I/O failure.
"""

from __future__ import annotations

import json as jsonlib
import sqlite3
import sys
from typing import Optional

import click

from .config import load_settings
from .ledger import (
    ScanInProgressError,
    SqliteLedger,
    StoreError,
    UnregisteredMachineError,
    ValidationError,
    parse_time_bound,
    utc_now,
)
from .machine import resolve_mac
from .scanner import run_scan
from .serialize import machine_dict, record_dict
from .sniff import FileFormat


@click.group()
@click.option("--store", default=None, metavar="PATH", help="Ledger database file.")
@click.option("--config", "config_path", default=None, metavar="PATH", help="Config file location.")
@click.pass_context
def cli(ctx, store, config_path):
    """Track sensitive imaging files across storage roots."""
    ctx.obj = load_settings(store=store, config_path=config_path)


def _open_store(ctx) -> SqliteLedger:
    return SqliteLedger(ctx.obj.store_path)


def _mac(ctx, flag_value: Optional[str]) -> str:
    return resolve_mac(flag_value or ctx.obj.machine_id)


def _formats(names) -> set[FileFormat]:
    try:
        return {FileFormat.from_name(n) for n in names}
    except ValueError as exc:
        raise ValidationError("format", str(exc)) from exc


def _echo_json(payload) -> None:
    click.echo(jsonlib.dumps(payload, indent=2))


@cli.command()
@click.option("--user", "username", required=True)
@click.option("--mac", default=None, metavar="MAC", help="12 hex digits, or 'auto' to detect.")
@click.option("--path", "paths", multiple=True, required=True, metavar="DIR")
@click.option("--format", "formats", multiple=True, required=True, metavar="NAME")
@click.option("--frequency", required=True, type=int, help="Scan frequency in seconds.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def register(ctx, username, mac, paths, formats, frequency, as_json):
    """Create (or replace) the scan configuration for a user on this machine."""
    store = _open_store(ctx)
    config = store.upsert_machine_config(
        username, _mac(ctx, mac), list(paths), _formats(formats), frequency
    )
    if as_json:
        _echo_json(machine_dict(config))
    else:
        click.echo(f"registered {config.username} on {config.mac}")
        click.echo(f"paths: {', '.join(config.paths)}")
        click.echo(f"formats: {', '.join(sorted(f.value for f in config.formats))}")
        click.echo(f"frequency: {config.scan_frequency}s")


@cli.group("config")
def config_group():
    """Inspect or modify existing scan configurations."""


@config_group.command("set")
@click.option("--user", "username", required=True)
@click.option("--mac", default=None)
@click.option("--path", "paths", multiple=True)
@click.option("--format", "formats", multiple=True)
@click.option("--frequency", type=int, default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def config_set(ctx, username, mac, paths, formats, frequency, as_json):
    """Update paths, formats or frequency of a pre-existing entry."""
    store = _open_store(ctx)
    mac = _mac(ctx, mac)
    existing = store.get_machine(username, mac)
    if existing is None:
        raise UnregisteredMachineError(f"user {username!r} on machine {mac} is not registered")
    config = store.upsert_machine_config(
        username,
        mac,
        list(paths) if paths else existing.paths,
        _formats(formats) if formats else existing.formats,
        frequency if frequency is not None else existing.scan_frequency,
    )
    if as_json:
        _echo_json(machine_dict(config))
    else:
        click.echo(f"updated {config.username} on {config.mac}")


@cli.command()
@click.option("--user", "username", required=True)
@click.option("--mac", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def run(ctx, username, mac, as_json):
    """Run one compliance scan (discovery then versioning) and commit it."""
    store = _open_store(ctx)
    report = run_scan(store, username, _mac(ctx, mac))
    if as_json:
        _echo_json(report.as_dict())
    else:
        outcome = "committed" if report.committed else "NOT committed (store failure)"
        click.echo(f"scan of {report.mac} by {report.username}: {outcome}")
        counts = report.counts
        click.echo(
            f"new {counts.new}  modified {counts.modified}  unchanged {counts.unchanged}"
            f"  deleted {counts.deleted}  resurrected {counts.resurrected}"
        )
        for path, message in report.errors:
            click.echo(f"error: {path}: {message}" if path else f"error: {message}")
    return 0 if report.committed else 2


@cli.command()
@click.option("--mac", default=None)
@click.option("--path", default=None, help="Show the full version history of one logical path.")
@click.option("--format", "fmt", default=None)
@click.option("--status", default=None)
@click.option("--scanned-after", default=None)
@click.option("--scanned-before", default=None)
@click.option("--version", type=int, default=None)
@click.option("--limit", type=int, default=None)
@click.option("--offset", type=int, default=0)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def report(ctx, mac, path, fmt, status, scanned_after, scanned_before, version, limit, offset, as_json):
    """Query the file ledger (or one file's history with --path)."""
    store = _open_store(ctx)
    if path is not None:
        records = store.file_history(_mac(ctx, mac), path)
    else:
        records = store.query_files(
            mac=mac,
            format=fmt,
            status=status,
            scanned_after=parse_time_bound("scanned_after", scanned_after) if scanned_after else None,
            scanned_before=parse_time_bound("scanned_before", scanned_before) if scanned_before else None,
            version=version,
            limit=limit,
            offset=offset,
        )
    if as_json:
        _echo_json([record_dict(r) for r in records])
    else:
        for r in records:
            click.echo(
                f"{r.status:<8} v{r.version:<3} {r.format.value:<7} {r.last_scanned:%Y-%m-%dT%H:%M:%SZ} {r.filepath}"
            )
        click.echo(f"{len(records)} record(s)")


@cli.command()
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def stale(ctx, as_json):
    """Recompute staleness for every machine and list the stale ones."""
    store = _open_store(ctx)
    now = utc_now()
    count = store.recompute_staleness(now)
    stale_machines = store.list_machines(stale=True)
    if as_json:
        _echo_json({"stale_count": count, "machines": [machine_dict(m) for m in stale_machines]})
    else:
        for m in stale_machines:
            last = f"{m.last_scanned:%Y-%m-%dT%H:%M:%SZ}" if m.last_scanned else "never"
            click.echo(f"STALE {m.username} on {m.mac} (last scanned: {last})")
        click.echo(f"{count} stale machine(s)")


@cli.command()
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def audit(ctx, as_json):
    """Check the store-wide version/status invariants."""
    store = _open_store(ctx)
    violations = store.audit()
    if as_json:
        _echo_json({"violations": violations})
    else:
        for violation in violations:
            click.echo(violation)
        click.echo(f"{len(violations)} violation(s)")
    return 1 if violations else 0


@cli.command()
@click.option("--addr", default="127.0.0.1:8000", show_default=True, help="Bind address.")
@click.option("--frontend-dir", default=None, help="Directory of built dashboard assets.")
@click.pass_context
def serve(ctx, addr, frontend_dir):
    """Serve the review API (and dashboard, when built) over HTTP."""
    import uvicorn

    from .api import create_app

    host, _, port = addr.rpartition(":")
    app = create_app(store_path=ctx.obj.store_path, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))


def main(argv=None) -> int:
    try:
        result = cli.main(args=argv, standalone_mode=False)
        return result if isinstance(result, int) else 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except (ValidationError, UnregisteredMachineError, ScanInProgressError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (StoreError, sqlite3.Error, OSError) as exc:
        click.echo(f"store error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
