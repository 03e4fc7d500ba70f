"""Content-based file format identification.

Classifies a byte stream as DICOM, NIfTI-1, an archive (zip/gzip/tar), a
plain image (jpeg/png), or UNKNOWN by inspecting signatures rather than
file names. DICOM is recognised both by the "DICM" magic after the
128-byte preamble and, for preamble-less files, by a plausibility walk
over the leading data elements in all four encoding conventions
(little/big endian x explicit/implicit VR).

The detection tables below are data-driven; adding a format means adding
an enum member, a signature row and (optionally) an extension mapping.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import BinaryIO


class FileFormat(Enum):
    DICOM = "DICOM"
    NIFTI1 = "NIFTI1"
    JPEG = "JPEG"
    PNG = "PNG"
    ZIP = "ZIP"
    GZIP = "GZIP"
    TAR = "TAR"
    UNKNOWN = "UNKNOWN"

    @classmethod
    def from_name(cls, name: str) -> "FileFormat":
        key = name.strip().upper()
        aliases = {"NIFTI": "NIFTI1", "NII": "NIFTI1", "DCM": "DICOM", "JPG": "JPEG", "GZ": "GZIP"}
        key = aliases.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown file format {name!r}") from None


class ByteOrder(Enum):
    LITTLE = "LITTLE"
    BIG = "BIG"


ARCHIVE_FORMATS = frozenset({FileFormat.ZIP, FileFormat.GZIP, FileFormat.TAR})

# Claimed-extension -> format table used only for the extension_mismatch flag.
EXTENSION_FORMATS: dict[str, FileFormat] = {
    "dcm": FileFormat.DICOM,
    "dicom": FileFormat.DICOM,
    "nii": FileFormat.NIFTI1,
    "jpg": FileFormat.JPEG,
    "jpeg": FileFormat.JPEG,
    "png": FileFormat.PNG,
    "zip": FileFormat.ZIP,
    "gz": FileFormat.GZIP,
    "gzip": FileFormat.GZIP,
    "tgz": FileFormat.GZIP,
    "tar": FileFormat.TAR,
}

# Bytes read from the head of the stream for signature checks; the DICOM
# envelope walk afterwards seeks past element values instead of reading them.
SNIFF_READ_LIMIT = 64 * 1024

# Preamble-less DICOM heuristic: minimum plausible elements from the known
# group set before the stream is accepted as DICOM.
DICOM_HEURISTIC_MIN_ELEMENTS = 3
DICOM_KNOWN_GROUPS = frozenset({0x0002, 0x0008, 0x0010, 0x0018, 0x0020, 0x0028, 0x7FE0})
_HEURISTIC_MAX_ELEMENTS = 8

UNDEFINED_LENGTH = 0xFFFFFFFF
_PIXEL_DATA_TAG = (0x7FE0, 0x0010)
_ITEM_TAG = (0xFFFE, 0xE000)
_ITEM_DELIMITER_TAG = (0xFFFE, 0xE00D)
_SEQ_DELIMITER_TAG = (0xFFFE, 0xE0DD)

# VRs whose explicit encoding carries a 2-byte reserved field plus a 4-byte
# length instead of the common 2-byte length (PS3.5 7.1.2).
_LONG_LENGTH_VRS = frozenset(
    {b"OB", b"OD", b"OF", b"OL", b"OV", b"OW", b"SQ", b"SV", b"UC", b"UN", b"UR", b"UT", b"UV"}
)

_NIFTI_MAGICS = {b"n+1\x00": "n+1", b"ni1\x00": "ni1"}
_NIFTI_HEADER_SIZE = 348
_NIFTI_SINGLE_MIN_VOX_OFFSET = 352


@dataclass(frozen=True)
class DicomEnvelope:
    """Structural facts about a DICOM stream: encoding convention and the
    byte span of the (7FE0,0010) pixel-data value, if any."""

    has_preamble: bool
    byte_order: ByteOrder
    explicit_vr: bool
    pixel_data_span: tuple[int, int] | None
    meta_element_count: int  # top-level elements walked, pixel data excluded


@dataclass(frozen=True)
class NiftiEnvelope:
    byte_order: ByteOrder
    header_length: int
    magic: str  # "n+1" (single file) or "ni1" (header of a pair)
    vox_offset: int


@dataclass(frozen=True)
class SniffResult:
    format: FileFormat
    extension_claimed: str
    extension_mismatch: bool
    evidence: tuple[str, ...]
    envelope: DicomEnvelope | NiftiEnvelope | None = None


def claimed_extension(name: str) -> str:
    """Lowercased final extension of a (possibly logical) path, no dot."""
    base = name.rsplit("/", 1)[-1].rsplit("!", 1)[-1].rsplit("\\", 1)[-1]
    _, dot, ext = base.rpartition(".")
    return ext.lower() if dot else ""


def _mismatch(ext: str, detected: FileFormat) -> bool:
    mapped = EXTENSION_FORMATS.get(ext)
    return mapped is not None and mapped is not detected


def sniff_format(
    stream: BinaryIO,
    size: int | None = None,
    claimed_name: str = "",
    *,
    min_heuristic_elements: int = DICOM_HEURISTIC_MIN_ELEMENTS,
) -> SniffResult:
    """Classify ``stream`` by content signature.

    ``stream`` must be seekable and readable from offset 0; ``size`` is the
    total stream length (derived by seeking when omitted). ``claimed_name``
    influences only the ``extension_mismatch`` flag. Truncated input never
    raises; it degrades to UNKNOWN or a best-effort envelope.
    """
    if size is None:
        stream.seek(0, 2)
        size = stream.tell()
    stream.seek(0)
    head = stream.read(min(size, SNIFF_READ_LIMIT))
    ext = claimed_extension(claimed_name)

    def result(fmt: FileFormat, evidence: list[str], envelope=None) -> SniffResult:
        return SniffResult(
            format=fmt,
            extension_claimed=ext,
            extension_mismatch=_mismatch(ext, fmt),
            evidence=tuple(evidence),
            envelope=envelope,
        )

    if not head:
        return result(FileFormat.UNKNOWN, ["empty file"])

    if len(head) >= 132 and head[128:132] == b"DICM":
        envelope = parse_dicom_envelope(stream, size, has_preamble=True)
        evidence = ["DICM magic at offset 128"]
        evidence.extend(envelope_notes(envelope))
        return result(FileFormat.DICOM, evidence, envelope)

    nifti = parse_nifti_header(head)
    if nifti is not None:
        order = "little" if nifti.byte_order is ByteOrder.LITTLE else "big"
        return result(
            FileFormat.NIFTI1,
            [f"NIfTI-1 header: sizeof_hdr=348 ({order}-endian), magic {nifti.magic!r}"],
            nifti,
        )

    if head.startswith(b"PK\x03\x04"):
        return result(FileFormat.ZIP, ["ZIP local file header magic"])
    if head.startswith(b"PK\x05\x06"):
        return result(FileFormat.ZIP, ["ZIP end-of-central-directory magic (empty archive)"])
    if head.startswith(b"\x1f\x8b"):
        return result(FileFormat.GZIP, ["gzip magic 1f 8b"])
    if len(head) >= 262 and head[257:262] == b"ustar":
        return result(FileFormat.TAR, ["ustar magic at offset 257"])
    if head.startswith(b"\xff\xd8\xff"):
        return result(FileFormat.JPEG, ["JPEG SOI marker ff d8 ff"])
    if head.startswith(b"\x89PNG"):
        return result(FileFormat.PNG, ["PNG signature 89 50 4e 47"])

    accepted = _heuristic_dicom(head, size, min_heuristic_elements)
    if accepted is not None:
        order, explicit, count = accepted
        envelope = parse_dicom_envelope(stream, size, has_preamble=False)
        vr_mode = "explicit" if explicit else "implicit"
        endian = "little" if order is ByteOrder.LITTLE else "big"
        evidence = [f"preamble-less DICOM: {count} plausible elements ({endian}-endian, {vr_mode} VR)"]
        evidence.extend(envelope_notes(envelope))
        return result(FileFormat.DICOM, evidence, envelope)

    return result(FileFormat.UNKNOWN, ["no known signature"])


def envelope_notes(envelope: DicomEnvelope) -> list[str]:
    notes = []
    if envelope_truncated(envelope):
        notes.append("truncated-walk: element structure ran past end of data")
    if envelope.pixel_data_span is None:
        notes.append("no pixel-data element")
    return notes


def sniff_path(path: str, *, claimed_name: str | None = None) -> SniffResult:
    """Convenience wrapper: sniff a file on disk."""
    with open(path, "rb") as stream:
        return sniff_format(stream, claimed_name=claimed_name if claimed_name is not None else path)


# ---------------------------------------------------------------------------
# DICOM element walking


class _TruncatedWalk(Exception):
    """Element structure runs past the end of the stream or is malformed."""


def _unpack_tag(buf: bytes, order: ByteOrder) -> tuple[int, int]:
    fmt = "<HH" if order is ByteOrder.LITTLE else ">HH"
    return struct.unpack(fmt, buf)


@dataclass
class _Element:
    group: int
    elem: int
    vr: bytes | None
    length: int  # may be UNDEFINED_LENGTH
    value_offset: int


def _read_element_header(
    read_at, pos: int, size: int, order: ByteOrder, explicit: bool
) -> _Element:
    """Decode one element header at ``pos``; raises _TruncatedWalk on any
    structural problem. ``read_at(pos, n)`` returns up to n bytes."""
    fixed = read_at(pos, 8)
    if len(fixed) < 8:
        raise _TruncatedWalk("element header extends past end of data")
    group, elem = _unpack_tag(fixed[:4], order)
    endian = "<" if order is ByteOrder.LITTLE else ">"

    if (group, elem) in (_ITEM_TAG, _ITEM_DELIMITER_TAG, _SEQ_DELIMITER_TAG):
        (length,) = struct.unpack(endian + "I", fixed[4:8])
        return _Element(group, elem, None, length, pos + 8)

    if not explicit:
        (length,) = struct.unpack(endian + "I", fixed[4:8])
        return _Element(group, elem, None, length, pos + 8)

    vr = fixed[4:6]
    if not (0x40 < vr[0] < 0x5B and 0x40 < vr[1] < 0x5B):
        raise _TruncatedWalk(f"invalid VR bytes {vr!r}")
    if vr in _LONG_LENGTH_VRS:
        extra = read_at(pos + 8, 4)
        if len(extra) < 4:
            raise _TruncatedWalk("long-form length field extends past end of data")
        (length,) = struct.unpack(endian + "I", extra)
        return _Element(group, elem, vr, length, pos + 12)
    (length,) = struct.unpack(endian + "H", fixed[6:8])
    return _Element(group, elem, vr, length, pos + 8)


def _skip_undefined_sequence(read_at, pos: int, size: int, order: ByteOrder, explicit: bool) -> int:
    """Return the offset just past the sequence delimiter of an
    undefined-length sequence whose first item starts at ``pos``."""
    while True:
        if pos + 8 > size:
            raise _TruncatedWalk("undefined-length sequence has no delimiter")
        header = _read_element_header(read_at, pos, size, order, explicit)
        tag = (header.group, header.elem)
        if tag == _SEQ_DELIMITER_TAG:
            return header.value_offset
        if tag != _ITEM_TAG:
            raise _TruncatedWalk("unexpected tag inside sequence")
        if header.length == UNDEFINED_LENGTH:
            pos = _skip_undefined_item(read_at, header.value_offset, size, order, explicit)
        else:
            pos = header.value_offset + header.length
            if pos > size:
                raise _TruncatedWalk("sequence item extends past end of data")


def _skip_undefined_item(read_at, pos: int, size: int, order: ByteOrder, explicit: bool) -> int:
    """Skip the data elements of an undefined-length item; returns the offset
    just past the item delimiter."""
    while True:
        element = _read_element_header(read_at, pos, size, order, explicit)
        tag = (element.group, element.elem)
        if tag == _ITEM_DELIMITER_TAG:
            return element.value_offset
        pos = _element_end(read_at, element, size, order, explicit)


def _element_end(read_at, element: _Element, size: int, order: ByteOrder, explicit: bool) -> int:
    """Offset just past ``element``, descending into undefined-length values."""
    if element.length != UNDEFINED_LENGTH:
        end = element.value_offset + element.length
        if end > size:
            raise _TruncatedWalk("element value extends past end of data")
        return end
    if (element.group, element.elem) == _PIXEL_DATA_TAG:
        # Encapsulated pixel data: fragments are items, ended by a sequence
        # delimiter; handled by the caller so it can record the span.
        return _skip_undefined_sequence(read_at, element.value_offset, size, order, explicit)
    return _skip_undefined_sequence(read_at, element.value_offset, size, order, explicit)


def _score_convention(read_at, start: int, size: int, order: ByteOrder, explicit: bool):
    """Walk up to _HEURISTIC_MAX_ELEMENTS elements; returns (count, groups)
    for as far as the walk stayed structurally sound."""
    groups: list[int] = []
    pos = start
    while len(groups) < _HEURISTIC_MAX_ELEMENTS and pos < size:
        try:
            element = _read_element_header(read_at, pos, size, order, explicit)
        except _TruncatedWalk:
            break
        if (element.group, element.elem) in (_ITEM_TAG, _ITEM_DELIMITER_TAG, _SEQ_DELIMITER_TAG):
            break
        groups.append(element.group)
        if element.length == UNDEFINED_LENGTH:
            break  # plausible only for sequences/pixel data; stop counting here
        pos = element.value_offset + element.length
        if pos > size:
            groups.pop()
            break
    return groups


_CONVENTIONS = (
    (ByteOrder.LITTLE, True),
    (ByteOrder.LITTLE, False),
    (ByteOrder.BIG, True),
    (ByteOrder.BIG, False),
)


def _detect_convention(read_at, start: int, size: int) -> tuple[ByteOrder, bool, list[int]]:
    """Pick the (byte order, explicit VR) pair whose trial walk parses the
    most elements; ties resolve in _CONVENTIONS order."""
    best = (ByteOrder.LITTLE, True, [])
    best_count = -1
    for order, explicit in _CONVENTIONS:
        groups = _score_convention(read_at, start, size, order, explicit)
        if len(groups) > best_count:
            best = (order, explicit, groups)
            best_count = len(groups)
    return best


def _heuristic_dicom(head: bytes, size: int, min_elements: int):
    """Preamble-less DICOM acceptance: some convention must walk >= 3
    elements with nondecreasing groups drawn from the known group set."""
    read_at = _buffer_reader(head)
    for order, explicit in _CONVENTIONS:
        groups = _score_convention(read_at, 0, size, order, explicit)
        if len(groups) < min_elements:
            continue
        if any(g not in DICOM_KNOWN_GROUPS for g in groups):
            continue
        if any(b < a for a, b in zip(groups, groups[1:])):
            continue
        return order, explicit, len(groups)
    return None


def _buffer_reader(buf: bytes):
    def read_at(pos: int, n: int) -> bytes:
        return buf[pos : pos + n]

    return read_at


def _stream_reader(stream: BinaryIO):
    def read_at(pos: int, n: int) -> bytes:
        stream.seek(pos)
        return stream.read(n)

    return read_at


def parse_dicom_envelope(stream: BinaryIO, size: int | None = None, *, has_preamble: bool | None = None) -> DicomEnvelope:
    """Walk the top-level data elements of a DICOM stream.

    Records the value span of (7FE0,0010) as ``pixel_data_span``;
    undefined-length pixel data spans the fragments up to and including the
    sequence delimiter, or the file end when the delimiter is missing.
    Malformed element lengths end the walk with "truncated-walk" evidence
    rather than raising. The encoding convention is re-detected when the
    file-meta group (0002) ends, since the main dataset may switch; the
    envelope reports the main dataset's convention.
    """
    if size is None:
        stream.seek(0, 2)
        size = stream.tell()
    read_at = _stream_reader(stream)
    if has_preamble is None:
        has_preamble = size >= 132 and read_at(128, 4) == b"DICM"
    pos = 132 if has_preamble else 0

    order, explicit, groups = _detect_convention(read_at, pos, size)
    in_meta = bool(groups) and groups[0] == 0x0002

    span: tuple[int, int] | None = None
    count = 0
    truncated = False
    while pos < size:
        if in_meta:
            tag_bytes = read_at(pos, 4)
            if len(tag_bytes) < 4:
                truncated = True
                break
            group, _ = _unpack_tag(tag_bytes, order)
            if group != 0x0002:
                # File-meta group ended; the dataset may switch convention.
                in_meta = False
                order, explicit, _ = _detect_convention(read_at, pos, size)
        try:
            element = _read_element_header(read_at, pos, size, order, explicit)
        except _TruncatedWalk:
            truncated = True
            break
        tag = (element.group, element.elem)
        if tag == _PIXEL_DATA_TAG:
            if element.length == UNDEFINED_LENGTH:
                try:
                    end = _skip_undefined_sequence(read_at, element.value_offset, size, order, explicit)
                except _TruncatedWalk:
                    end = size
                span = (element.value_offset, end - element.value_offset)
                pos = end
            else:
                end = element.value_offset + element.length
                if end > size:
                    truncated = True
                    break
                span = (element.value_offset, element.length)
                pos = end
            continue
        try:
            pos = _element_end(read_at, element, size, order, explicit)
        except _TruncatedWalk:
            truncated = True
            break
        count += 1

    envelope = DicomEnvelope(
        has_preamble=has_preamble,
        byte_order=order,
        explicit_vr=explicit,
        pixel_data_span=span,
        meta_element_count=count,
    )
    if truncated:
        object.__setattr__(envelope, "_truncated", True)
    return envelope


def envelope_truncated(envelope: DicomEnvelope) -> bool:
    return getattr(envelope, "_truncated", False)


def parse_nifti_header(head: bytes) -> NiftiEnvelope | None:
    """Parse the 348-byte NIfTI-1 header from the leading bytes of a stream.

    Returns None (not-NIfTI) unless sizeof_hdr decodes to 348 in some byte
    order and offset 344 carries a NIfTI magic. vox_offset is the float
    field at offset 108 truncated to an integer byte count; single-file
    ("n+1") images are clamped to the 352-byte minimum.
    """
    if len(head) < _NIFTI_HEADER_SIZE:
        return None
    magic = _NIFTI_MAGICS.get(head[344:348])
    if magic is None:
        return None
    (le_size,) = struct.unpack("<i", head[0:4])
    (be_size,) = struct.unpack(">i", head[0:4])
    if le_size == _NIFTI_HEADER_SIZE:
        order = ByteOrder.LITTLE
    elif be_size == _NIFTI_HEADER_SIZE:
        order = ByteOrder.BIG
    else:
        return None
    endian = "<" if order is ByteOrder.LITTLE else ">"
    (vox_offset_f,) = struct.unpack(endian + "f", head[108:112])
    vox_offset = int(vox_offset_f)
    if magic == "n+1":
        vox_offset = max(vox_offset, _NIFTI_SINGLE_MIN_VOX_OFFSET)
    return NiftiEnvelope(
        byte_order=order,
        header_length=_NIFTI_HEADER_SIZE,
        magic=magic,
        vox_offset=vox_offset,
    )
