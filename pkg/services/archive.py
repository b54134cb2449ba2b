#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Self-describing binary container shared by trajectory records and checkpoints.

Layout:
    8 bytes   magic (carries the container version)
    4 bytes   header length, uint32 little-endian
    N bytes   header, canonical JSON (sorted keys, no whitespace)
    payload   concatenated little-endian arrays, optionally zlib-compressed

The header lists every field (name, dtype, shape, offset, nbytes, codec), the
record kind, free-form metadata and a SHA-256 digest over the header (without
the digest itself) followed by the payload.
"""

import json
import logging
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

import numpy as np

from config import FORMAT_VERSION
from exceptions import (
    ChecksumError,
    FormatVersionError,
    RecordFormatError,
    TruncatedRecordError,
)
from utils import PathLike, atomic_write_bytes, sha256_hex

logger = logging.getLogger(__name__)

MAGIC = b"SALREC01"
_LENGTH = struct.Struct("<I")
_PREFIX_SIZE = len(MAGIC) + _LENGTH.size

CODECS = ("raw", "zlib")


@dataclass
class ArchiveContents:
    """Decoded record: arrays by name plus header metadata."""

    kind: str
    arrays: Dict[str, np.ndarray]
    meta: Dict[str, Any] = field(default_factory=dict)


def _canonical(header: Dict[str, Any]) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _little_endian(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    if array.dtype.byteorder == ">":
        array = array.astype(array.dtype.newbyteorder("<"))
    return array


def encode_archive(
    kind: str,
    arrays: Dict[str, np.ndarray],
    meta: Optional[Dict[str, Any]] = None,
    compress: Iterable[str] = (),
) -> bytes:
    """
    Serialize named arrays into a record.

    Args:
        kind: record kind tag checked on read ("trajectory", "checkpoint")
        arrays: field name -> array; field order is preserved
        meta: JSON-serializable metadata stored in the header
        compress: field names stored zlib-compressed

    Returns:
        Record bytes
    """
    compress = set(compress)
    fields = []
    chunks = []
    offset = 0
    for name, array in arrays.items():
        array = _little_endian(np.asarray(array))
        raw = array.tobytes()
        codec = "zlib" if name in compress else "raw"
        data = zlib.compress(raw, 6) if codec == "zlib" else raw
        fields.append(
            {
                "name": name,
                "dtype": array.dtype.str,
                "shape": list(array.shape),
                "offset": offset,
                "nbytes": len(data),
                "codec": codec,
            }
        )
        chunks.append(data)
        offset += len(data)

    payload = b"".join(chunks)
    header = {"format": FORMAT_VERSION, "kind": kind, "fields": fields, "meta": meta or {}}
    header["sha256"] = sha256_hex([_canonical(header), payload])
    header_bytes = _canonical(header)
    return MAGIC + _LENGTH.pack(len(header_bytes)) + header_bytes + payload


def decode_archive(data: bytes, source: str = "<memory>", kind: Optional[str] = None) -> ArchiveContents:
    """
    Parse and verify a record.

    Raises:
        FormatVersionError: unknown magic, format version or kind
        TruncatedRecordError: data ends before the declared header or payload
        ChecksumError: digest mismatch or undecodable compressed field
        RecordFormatError: structurally invalid header
    """
    if len(data) < _PREFIX_SIZE:
        raise TruncatedRecordError(source, f"{len(data)} bytes is shorter than the record prefix")
    if data[: len(MAGIC)] != MAGIC:
        raise FormatVersionError(source, f"bad magic {data[:len(MAGIC)]!r}")

    (header_len,) = _LENGTH.unpack_from(data, len(MAGIC))
    header_end = _PREFIX_SIZE + header_len
    if len(data) < header_end:
        raise TruncatedRecordError(source, "header extends past end of data")
    header_bytes = data[_PREFIX_SIZE:header_end]

    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise RecordFormatError(source, f"unreadable header: {e}")
    if not isinstance(header, dict) or _canonical(header) != header_bytes:
        raise RecordFormatError(source, "header is not canonical JSON")

    if header.get("format") != FORMAT_VERSION:
        raise FormatVersionError(source, f"format {header.get('format')!r}, expected {FORMAT_VERSION!r}")
    if kind is not None and header.get("kind") != kind:
        raise FormatVersionError(source, f"record kind {header.get('kind')!r}, expected {kind!r}")

    try:
        fields = header["fields"]
        expected = header.pop("sha256")
        payload_len = sum(int(f["nbytes"]) for f in fields)
    except (KeyError, TypeError, ValueError) as e:
        raise RecordFormatError(source, f"incomplete header: {e}")

    payload = data[header_end:]
    if len(payload) < payload_len:
        raise TruncatedRecordError(source, f"payload has {len(payload)} of {payload_len} bytes")
    if len(payload) > payload_len:
        raise RecordFormatError(source, f"{len(payload) - payload_len} trailing bytes after payload")
    if sha256_hex([_canonical(header), payload]) != expected:
        raise ChecksumError(source, "sha256 mismatch")

    arrays = {}
    for spec in fields:
        start = int(spec["offset"])
        chunk = payload[start : start + int(spec["nbytes"])]
        if spec["codec"] == "zlib":
            try:
                chunk = zlib.decompress(chunk)
            except zlib.error as e:
                raise ChecksumError(source, f"field {spec['name']}: {e}")
        elif spec["codec"] != "raw":
            raise RecordFormatError(source, f"unknown codec {spec['codec']!r}")
        dtype = np.dtype(spec["dtype"])
        shape = tuple(spec["shape"])
        if len(chunk) != dtype.itemsize * int(np.prod(shape, dtype=np.int64)):
            raise RecordFormatError(source, f"field {spec['name']} size does not match its shape")
        arrays[spec["name"]] = np.frombuffer(chunk, dtype=dtype).reshape(shape).copy()

    return ArchiveContents(kind=header["kind"], arrays=arrays, meta=header.get("meta", {}))


def write_archive(
    path: PathLike,
    kind: str,
    arrays: Dict[str, np.ndarray],
    meta: Optional[Dict[str, Any]] = None,
    compress: Iterable[str] = (),
) -> Path:
    """Encode and write atomically (temp file + rename)."""
    path = atomic_write_bytes(path, encode_archive(kind, arrays, meta, compress))
    logger.debug(f"Wrote {kind} record {path}")
    return path


def read_archive(path: PathLike, kind: Optional[str] = None) -> ArchiveContents:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise RecordFormatError(str(path), "file not found")
    return decode_archive(data, source=str(path), kind=kind)
