"""Reader for the DPDS/DPIX labeled-field dataset format.

This is an independent consumer of the published file format: a data
file starts with magic "DPDS" and a version byte, followed by records;
each record is a 40-byte little-endian header and a row-major LSB-first
bit-packed payload (optionally DEFLATE-compressed, header flag bit 0).
The sidecar index ("DPIX" + version byte) lists (offset, length) pairs
as unsigned 64-bit little-endian integers; offsets are relative to the
end of the data file's 5-byte preamble.
"""

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DATA_MAGIC = b"DPDS"
INDEX_MAGIC = b"DPIX"
VERSION = 1

_HEADER = struct.Struct("<IIddQBBHI")  # 40 bytes
_ENTRY = struct.Struct("<QQ")
_PREAMBLE = len(DATA_MAGIC) + 1
_FLAG_DEFLATE = 0x01

#: Canonical target order shared with the dataset producer.
CANONICAL_NAMES = ("A", "PL", "Qplus", "Dplus", "Q", "D")


class FormatError(ValueError):
    """Raised when a data or index file violates the format contract."""


@dataclass(frozen=True)
class Record:
    """One labeled realization: the Boolean field plus its metadata."""

    field: np.ndarray  # (n_rows, n_sites) bool
    p: float
    q: float
    seed: int
    target: tuple[bool, ...]  # six bits in canonical order

    @property
    def n_rows(self) -> int:
        return self.field.shape[0]

    @property
    def n_sites(self) -> int:
        return self.field.shape[1]


def _check_preamble(fh, path, magic) -> None:
    head = fh.read(len(magic) + 1)
    if len(head) != len(magic) + 1 or head[: len(magic)] != magic:
        raise FormatError(f"{path}: bad magic bytes")
    if head[len(magic)] != VERSION:
        raise FormatError(f"{path}: unsupported version {head[len(magic)]}")


def load_index(path) -> list[tuple[int, int]]:
    """(offset, length) pairs from a DPIX sidecar file."""
    path = Path(path)
    with open(path, "rb") as fh:
        _check_preamble(fh, path, INDEX_MAGIC)
        blob = fh.read()
    if len(blob) % _ENTRY.size:
        raise FormatError(f"{path}: truncated index entry")
    return [_ENTRY.unpack_from(blob, k) for k in range(0, len(blob), _ENTRY.size)]


def _decode(header: bytes, payload: bytes, path) -> Record:
    n_sites, n_rows, p, q, seed, target, flags, reserved, payload_len = \
        _HEADER.unpack(header)
    if reserved != 0:
        raise FormatError(f"{path}: nonzero reserved header field")
    if target & 0xC0:
        raise FormatError(f"{path}: target mask bits 6-7 set")
    if len(payload) != payload_len:
        raise FormatError(f"{path}: payload length mismatch")
    if flags & _FLAG_DEFLATE:
        payload = zlib.decompress(payload)
    row_bytes = (n_sites + 7) // 8
    if len(payload) != n_rows * row_bytes:
        raise FormatError(f"{path}: payload does not match field dimensions")
    packed = np.frombuffer(payload, dtype=np.uint8).reshape(n_rows, row_bytes)
    bits = np.unpackbits(packed, axis=1, bitorder="little")[:, :n_sites]
    return Record(
        field=bits.astype(bool),
        p=p,
        q=q,
        seed=seed,
        target=tuple(bool(target >> k & 1) for k in range(6)),
    )


def read_record_at(fh, offset: int, length: int, path) -> Record:
    fh.seek(_PREAMBLE + offset)
    blob = fh.read(length)
    if len(blob) != length or length < _HEADER.size:
        raise FormatError(f"{path}: record truncated")
    return _decode(blob[: _HEADER.size], blob[_HEADER.size:], path)


def read_records(data_path, index_path=None, indices=None):
    """Yield Records, streaming from disk one record at a time.

    indices: optional iterable of record positions (enables shuffled
    epochs without materializing the dataset).
    """
    data_path = Path(data_path)
    if index_path is None:
        index_path = data_path.with_suffix(data_path.suffix + ".idx")
    entries = load_index(index_path)
    order = range(len(entries)) if indices is None else indices
    with open(data_path, "rb") as fh:
        _check_preamble(fh, data_path, DATA_MAGIC)
        for k in order:
            offset, length = entries[k]
            yield read_record_at(fh, offset, length, data_path)


def count_records(data_path, index_path=None) -> int:
    data_path = Path(data_path)
    if index_path is None:
        index_path = data_path.with_suffix(data_path.suffix + ".idx")
    return len(load_index(index_path))
