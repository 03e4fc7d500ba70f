"""SHA-256 fingerprints: whole file, plus independent metadata and pixel
digests for DICOM and NIfTI-1.

The pixel digest covers the raw value bytes of the pixel region only; the
metadata digest covers every other byte of the file, in order, including
the pixel element's own tag/VR/length header (a length change is a
structural change). Empty regions digest to the SHA-256 of the empty
message so stored hash columns are always populated and comparable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import BinaryIO

from .discovery import CandidateFile
from .sniff import DicomEnvelope, FileFormat, NiftiEnvelope

_CHUNK = 1 << 16

EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


class FingerprintError(Exception):
    """Envelope and bytes disagree (region out of bounds, short read)."""


@dataclass(frozen=True)
class Fingerprint:
    file_hash: str
    meta_hash: str | None = None
    pixel_hash: str | None = None


def hash_whole(stream: BinaryIO) -> str:
    """SHA-256 hex digest of the stream from its current position."""
    digest = hashlib.sha256()
    while True:
        chunk = stream.read(_CHUNK)
        if not chunk:
            break
        digest.update(chunk)
    return digest.hexdigest()


def _region_digests(stream: BinaryIO, size: int, pixel_region: tuple[int, int]) -> tuple[str, str, str]:
    """One sequential pass computing (whole, meta, pixel) digests, where
    ``pixel_region`` is a half-open byte interval and meta is its complement."""
    pstart, pend = pixel_region
    whole = hashlib.sha256()
    meta = hashlib.sha256()
    pixel = hashlib.sha256()
    pos = 0
    stream.seek(0)
    while True:
        chunk = stream.read(_CHUNK)
        if not chunk:
            break
        cstart, cend = pos, pos + len(chunk)
        whole.update(chunk)
        if cstart < pstart:
            meta.update(chunk[: min(cend, pstart) - cstart])
        overlap_start, overlap_end = max(cstart, pstart), min(cend, pend)
        if overlap_start < overlap_end:
            pixel.update(chunk[overlap_start - cstart : overlap_end - cstart])
        if cend > pend:
            meta.update(chunk[max(pend, cstart) - cstart :])
        pos = cend
    if pos != size:
        raise FingerprintError(f"stream yielded {pos} bytes, expected {size}")
    return whole.hexdigest(), meta.hexdigest(), pixel.hexdigest()


def _stream_size(stream: BinaryIO, size: int | None) -> int:
    if size is not None:
        return size
    stream.seek(0, 2)
    return stream.tell()


def split_hashes_dicom(stream: BinaryIO, envelope: DicomEnvelope, size: int | None = None) -> tuple[str, str]:
    """(meta_digest, pixel_digest) for a DICOM stream."""
    size = _stream_size(stream, size)
    span = envelope.pixel_data_span
    if span is None:
        region = (size, size)
    else:
        offset, length = span
        if offset < 0 or length < 0 or offset + length > size:
            raise FingerprintError(f"pixel span {span} outside file of {size} bytes")
        region = (offset, offset + length)
    _, meta, pixel = _region_digests(stream, size, region)
    return meta, pixel


def split_hashes_nifti(stream: BinaryIO, envelope: NiftiEnvelope, size: int | None = None) -> tuple[str, str]:
    """(meta_digest, pixel_digest) for a NIfTI-1 stream. Header files of
    an img/hdr pair ("ni1") hold no voxels: the whole file is metadata."""
    size = _stream_size(stream, size)
    if envelope.magic == "ni1":
        region = (size, size)
    else:
        if envelope.vox_offset > size:
            raise FingerprintError(f"vox_offset {envelope.vox_offset} beyond file end {size}")
        region = (envelope.vox_offset, size)
    _, meta, pixel = _region_digests(stream, size, region)
    return meta, pixel


def fingerprint_candidate(candidate: CandidateFile) -> tuple[Fingerprint, str | None]:
    """Full fingerprint for one discovered candidate.

    Split digests are computed only for DICOM and NIfTI-1. When the split
    fails (envelope/bytes mismatch) the whole-file hash is still produced
    and the failure is returned as a message instead of raising.
    """
    fmt = candidate.sniff.format
    envelope = candidate.sniff.envelope
    try:
        with candidate.open() as stream:
            if fmt is FileFormat.DICOM and isinstance(envelope, DicomEnvelope):
                size = _stream_size(stream, candidate.size)
                span = envelope.pixel_data_span
                region = (size, size) if span is None else (span[0], span[0] + span[1])
                if region[1] > size or region[0] > size:
                    raise FingerprintError(f"pixel span {span} outside file of {size} bytes")
                whole, meta, pixel = _region_digests(stream, size, region)
                return Fingerprint(whole, meta, pixel), None
            if fmt is FileFormat.NIFTI1 and isinstance(envelope, NiftiEnvelope):
                size = _stream_size(stream, candidate.size)
                if envelope.magic == "ni1":
                    region = (size, size)
                elif envelope.vox_offset > size:
                    raise FingerprintError(f"vox_offset {envelope.vox_offset} beyond file end {size}")
                else:
                    region = (envelope.vox_offset, size)
                whole, meta, pixel = _region_digests(stream, size, region)
                return Fingerprint(whole, meta, pixel), None
            return Fingerprint(hash_whole(stream)), None
    except FingerprintError as exc:
        with candidate.open() as stream:
            return Fingerprint(hash_whole(stream)), str(exc)
