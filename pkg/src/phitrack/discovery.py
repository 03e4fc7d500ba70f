"""Candidate enumeration across storage roots, descending into archives.

Every regular file beneath every root is sniffed by content; archive
files (zip, gzip, tar) are expanded recursively up to a depth limit, so
sensitive files hidden inside nested archives still surface. Archive
members get flat logical paths: outer path plus "!"-joined member
segments, with "%" and "!" percent-escaped inside segments so the
rendering stays injective.
"""

from __future__ import annotations

import gzip
import io
import os
import tarfile
import zipfile
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable

from .sniff import ARCHIVE_FORMATS, FileFormat, SniffResult, sniff_format

_READ_CHUNK = 1 << 16

# Exceptions treated as per-file problems: recorded, never walk-fatal.
_CANDIDATE_ERRORS = (OSError, EOFError, zipfile.BadZipFile, tarfile.TarError, gzip.BadGzipFile)


@dataclass(frozen=True)
class LogicalPath:
    """Identity of a file occurrence: a real path plus the chain of archive
    member names opened to reach it."""

    outer_path: str
    archive_segments: tuple[str, ...] = ()

    def render(self) -> str:
        parts = [self.outer_path]
        for segment in self.archive_segments:
            parts.append("!" + _escape_segment(segment))
        return "".join(parts)

    def child(self, segment: str) -> "LogicalPath":
        return LogicalPath(self.outer_path, self.archive_segments + (segment,))


def _escape_segment(segment: str) -> str:
    # "%" first so escaped "!" bytes cannot collide with literal "%21"
    return segment.replace("%", "%25").replace("!", "%21")


@dataclass
class WalkLimits:
    max_archive_depth: int = 3
    max_file_bytes: int | None = None
    follow_symlinks: bool = False  # fixed: symlinks are never followed

    def __post_init__(self):
        if self.max_archive_depth < 0:
            raise ValueError("max_archive_depth must be >= 0")
        if self.follow_symlinks:
            raise ValueError("follow_symlinks is fixed false")


class ByteSource:
    """Re-readable byte accessor; open() returns a fresh seekable stream."""

    def open(self) -> BinaryIO:
        raise NotImplementedError


class _ChainedStream(io.RawIOBase):
    """Stream over the innermost member of an open archive chain; closing it
    closes every layer that was opened to reach the member."""

    def __init__(self, leaf: BinaryIO, opened: list):
        super().__init__()
        self._leaf = leaf
        self._opened = opened

    def readable(self):
        return True

    def seekable(self):
        return True

    def read(self, n=-1):
        return self._leaf.read(n)

    def readinto(self, b):
        data = self._leaf.read(len(b))
        b[: len(data)] = data
        return len(data)

    def seek(self, offset, whence=0):
        return self._leaf.seek(offset, whence)

    def tell(self):
        return self._leaf.tell()

    def close(self):
        if not self.closed:
            for layer in reversed(self._opened):
                try:
                    layer.close()
                except Exception:
                    pass
        super().close()


@dataclass(frozen=True)
class FileByteSource(ByteSource):
    path: str

    def open(self) -> BinaryIO:
        return open(self.path, "rb")


@dataclass(frozen=True)
class ZipMemberSource(ByteSource):
    parent: ByteSource
    member: str

    def open(self) -> BinaryIO:
        outer = self.parent.open()
        try:
            archive = zipfile.ZipFile(outer)
            stream = archive.open(self.member)
        except Exception:
            outer.close()
            raise
        return _ChainedStream(stream, [outer, archive, stream])


@dataclass(frozen=True)
class TarMemberSource(ByteSource):
    parent: ByteSource
    member: str

    def open(self) -> BinaryIO:
        outer = self.parent.open()
        try:
            archive = tarfile.open(fileobj=outer, mode="r:")
            stream = archive.extractfile(self.member)
            if stream is None:
                raise tarfile.TarError(f"member {self.member!r} is not a regular file")
        except Exception:
            outer.close()
            raise
        return _ChainedStream(stream, [outer, archive, stream])


@dataclass(frozen=True)
class GzipSource(ByteSource):
    parent: ByteSource

    def open(self) -> BinaryIO:
        outer = self.parent.open()
        stream = gzip.GzipFile(fileobj=outer)
        return _ChainedStream(stream, [outer, stream])


@dataclass(frozen=True)
class CandidateFile:
    path: LogicalPath
    size: int
    sniff: SniffResult
    source: ByteSource

    @property
    def rendered_path(self) -> str:
        return self.path.render()

    def open(self) -> BinaryIO:
        return self.source.open()


def walk_roots(
    roots: Iterable[str],
    formats: set[FileFormat],
    limits: WalkLimits | None = None,
    errors: list[tuple[str, str]] | None = None,
) -> list[CandidateFile]:
    """Enumerate candidates under ``roots`` whose sniffed format is in
    ``formats``, in lexicographic rendered-path order.

    Archives are expanded even when their own format is untracked. Hidden
    and temporary directories are traversed; symlinks never are. Per-file
    problems append (path, message) to ``errors`` and the walk continues.
    """
    limits = limits or WalkLimits()
    if errors is None:
        errors = []
    collected: list[CandidateFile] = []
    seen_paths: set[str] = set()

    for root in roots:
        real_root = os.path.realpath(root)
        if not os.path.isdir(real_root):
            errors.append((root, "root missing or not a directory"))
            continue
        for dirpath, dirnames, filenames in os.walk(real_root, followlinks=False):
            dirnames.sort()
            for name in sorted(filenames):
                full = os.path.join(dirpath, name)
                try:
                    if os.path.islink(full) or not os.path.isfile(full):
                        continue
                    size = os.path.getsize(full)
                except OSError as exc:
                    errors.append((full, f"stat failed: {exc}"))
                    continue
                logical = LogicalPath(full)
                source = FileByteSource(full)
                if limits.max_file_bytes is not None and size > limits.max_file_bytes:
                    errors.append(
                        (logical.render(), f"skipped: size {size} exceeds max_file_bytes {limits.max_file_bytes}")
                    )
                    continue
                try:
                    with source.open() as stream:
                        verdict = sniff_format(stream, size=size, claimed_name=logical.render())
                except _CANDIDATE_ERRORS as exc:
                    errors.append((logical.render(), f"read failed: {exc}"))
                    continue
                candidate = CandidateFile(path=logical, size=size, sniff=verdict, source=source)
                _absorb(candidate, formats, limits, errors, collected, seen_paths)

    collected.sort(key=lambda c: c.rendered_path)
    return collected


def _absorb(
    candidate: CandidateFile,
    formats: set[FileFormat],
    limits: WalkLimits,
    errors: list[tuple[str, str]],
    collected: list[CandidateFile],
    seen_paths: set[str],
) -> None:
    """Route one sniffed candidate: dedupe, expand archives, apply the
    tracked-format filter."""
    rendered = candidate.rendered_path
    if rendered in seen_paths:
        return  # overlapping roots must not duplicate candidates
    seen_paths.add(rendered)
    if candidate.sniff.format in ARCHIVE_FORMATS:
        depth = len(candidate.path.archive_segments)
        if depth < limits.max_archive_depth:
            for member in expand_archive(candidate, depth, limits, errors):
                _absorb(member, formats, limits, errors, collected, seen_paths)
        else:
            errors.append((rendered, "depth-limit: nested archive not expanded"))
    if candidate.sniff.format in formats:
        collected.append(candidate)


def expand_archive(
    candidate: CandidateFile,
    depth: int | None = None,
    limits: WalkLimits | None = None,
    errors: list[tuple[str, str]] | None = None,
) -> list[CandidateFile]:
    """List the direct members of one archive candidate, sniffed by content.

    Members are returned unfiltered (the caller applies the tracked-format
    filter and the recursion policy). A corrupt archive records one error
    naming the archive; members listed before the failure stand.
    """
    del depth  # direct members only; the walk handles nesting depth
    limits = limits or WalkLimits()
    if errors is None:
        errors = []
    fmt = candidate.sniff.format
    rendered = candidate.rendered_path
    members: list[tuple[str, int, ByteSource]] = []
    try:
        if fmt is FileFormat.ZIP:
            with candidate.open() as stream:
                with zipfile.ZipFile(stream) as archive:
                    for info in archive.infolist():
                        if info.is_dir():
                            continue
                        members.append(
                            (info.filename, info.file_size, ZipMemberSource(candidate.source, info.filename))
                        )
        elif fmt is FileFormat.TAR:
            with candidate.open() as stream:
                with tarfile.open(fileobj=stream, mode="r:") as archive:
                    for info in archive.getmembers():
                        if not info.isfile():
                            continue
                        members.append((info.name, info.size, TarMemberSource(candidate.source, info.name)))
        elif fmt is FileFormat.GZIP:
            source = GzipSource(candidate.source)
            members.append((_gzip_member_name(rendered), _stream_length(source), source))
        else:
            raise ValueError(f"not an archive format: {fmt}")
    except _CANDIDATE_ERRORS as exc:
        errors.append((rendered, f"archive expansion failed: {exc}"))

    out = []
    for name, size, source in members:
        logical = candidate.path.child(name)
        if limits.max_file_bytes is not None and size > limits.max_file_bytes:
            errors.append(
                (logical.render(), f"skipped: size {size} exceeds max_file_bytes {limits.max_file_bytes}")
            )
            continue
        try:
            with source.open() as stream:
                verdict = sniff_format(stream, size=size, claimed_name=logical.render())
        except _CANDIDATE_ERRORS as exc:
            errors.append((logical.render(), f"read failed: {exc}"))
            continue
        out.append(CandidateFile(path=logical, size=size, sniff=verdict, source=source))
    return out


def _gzip_member_name(rendered_path: str) -> str:
    """gzip has no trustworthy member name; derive one from the wrapper."""
    base = rendered_path.rsplit("/", 1)[-1].rsplit("!", 1)[-1]
    if base.lower().endswith(".gz"):
        return base[: -len(".gz")]
    return "(gunzipped)"


def _stream_length(source: ByteSource) -> int:
    total = 0
    with source.open() as stream:
        while True:
            chunk = stream.read(_READ_CHUNK)
            if not chunk:
                break
            total += len(chunk)
    return total
