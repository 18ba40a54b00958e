"""Indexed compressed bitstream storage for labeled configurations.

Data file:  magic "DPDS" + version byte 1, then back-to-back records.
Index file: magic "DPIX" + version byte 1, then 16-byte little-endian
(offset, length) pairs.  Offsets are relative to the start of the record
region (right after the 5-byte preamble), so the first record sits at
offset 0 and the index can be rebuilt by a linear header scan.

Record = 40-byte header + payload (bit-packed rows, LSB-first, rows
padded to byte boundaries; optionally DEFLATE-compressed).
"""

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .patterns import CANONICAL_ORDER, MultiHotTarget, label_field
from .sim import SimParams, SpaceTimeField, simulate_batch

DATA_MAGIC = b"DPDS"
INDEX_MAGIC = b"DPIX"
VERSION = 1

_HEADER = struct.Struct("<IIddQBBHI")  # 40 bytes
HEADER_SIZE = _HEADER.size
FLAG_DEFLATE = 0x01
_ENTRY = struct.Struct("<QQ")


class CorruptRecordError(Exception):
    """Raised when a record or index fails validation."""


@dataclass(frozen=True)
class IndexEntry:
    offset: int
    length: int


def _pack_header(params: SimParams, n_rows: int, target: MultiHotTarget,
                 flags: int, payload_len: int) -> bytes:
    return _HEADER.pack(
        params.n_sites, n_rows, params.p, params.q, params.seed,
        target.to_mask(), flags, 0, payload_len,
    )


class DatasetWriter:
    """Single appending writer for a data file + sidecar index."""

    def __init__(self, data_path, index_path=None, compress: bool = True):
        self.data_path = Path(data_path)
        self.index_path = Path(index_path) if index_path else default_index_path(data_path)
        self.compress = compress
        fresh = not self.data_path.exists() or self.data_path.stat().st_size == 0
        self._data = open(self.data_path, "ab")
        self._index = open(self.index_path, "ab")
        if fresh:
            self._data.write(DATA_MAGIC + bytes([VERSION]))
            self._index.write(INDEX_MAGIC + bytes([VERSION]))
        self._offset = self._data.tell() - len(DATA_MAGIC) - 1
        if self._offset < 0:
            raise CorruptRecordError(f"{self.data_path}: truncated preamble")

    def append_record(self, field: SpaceTimeField, params: SimParams,
                      target: MultiHotTarget) -> IndexEntry:
        if field.n_sites != params.n_sites:
            raise ValueError("field and params disagree on n_sites")
        payload = field.packed.tobytes()
        flags = 0
        if self.compress:
            squeezed = zlib.compress(payload, 6)
            if len(squeezed) < len(payload):
                payload, flags = squeezed, FLAG_DEFLATE
        if len(payload) > 0xFFFFFFFF:
            raise ValueError("payload exceeds the 32-bit length limit")
        header = _pack_header(params, field.n_rows, target, flags, len(payload))
        self._data.write(header)
        self._data.write(payload)
        entry = IndexEntry(self._offset, HEADER_SIZE + len(payload))
        self._index.write(_ENTRY.pack(entry.offset, entry.length))
        self._offset += entry.length
        return entry

    def close(self):
        self._data.close()
        self._index.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def default_index_path(data_path) -> Path:
    return Path(data_path).with_suffix(Path(data_path).suffix + ".idx")


def _check_preamble(fh, magic, what):
    head = fh.read(5)
    if len(head) != 5 or head[:4] != magic:
        raise CorruptRecordError(f"{what}: bad magic bytes")
    if head[4] != VERSION:
        raise CorruptRecordError(f"{what}: unsupported version {head[4]}")


def load_index(index_path) -> list[IndexEntry]:
    entries = []
    with open(index_path, "rb") as fh:
        _check_preamble(fh, INDEX_MAGIC, str(index_path))
        data = fh.read()
    if len(data) % _ENTRY.size:
        raise CorruptRecordError(f"{index_path}: truncated index entry")
    prev_end = 0
    for offset, length in _ENTRY.iter_unpack(data):
        if offset < prev_end:
            raise CorruptRecordError(f"{index_path}: offsets not increasing")
        entries.append(IndexEntry(offset, length))
        prev_end = offset + length
    return entries


def read_record(data_file, entry: IndexEntry):
    """Random-access read; exact inverse of append_record.

    data_file may be a path or an open binary file positioned anywhere.
    Returns (SpaceTimeField, SimParams, MultiHotTarget).
    """
    if hasattr(data_file, "seek"):
        return _read_at(data_file, entry)
    with open(data_file, "rb") as fh:
        _check_preamble(fh, DATA_MAGIC, str(data_file))
        return _read_at(fh, entry)


def _read_at(fh, entry: IndexEntry):
    fh.seek(5 + entry.offset)
    blob = fh.read(entry.length)
    if len(blob) != entry.length or entry.length < HEADER_SIZE:
        raise CorruptRecordError("record truncated")
    (n_sites, n_rows, p, q, seed, target_mask, flags,
     reserved, payload_len) = _HEADER.unpack_from(blob)
    if reserved != 0:
        raise CorruptRecordError("nonzero reserved header bytes")
    if entry.length != HEADER_SIZE + payload_len:
        raise CorruptRecordError("index length disagrees with payload_len")
    payload = blob[HEADER_SIZE:]
    if flags & FLAG_DEFLATE:
        try:
            payload = zlib.decompress(payload)
        except zlib.error as exc:
            raise CorruptRecordError(f"payload decompression failed: {exc}") from exc
    row_bytes = (n_sites + 7) // 8
    if len(payload) != n_rows * row_bytes:
        raise CorruptRecordError("payload size disagrees with header dimensions")
    packed = np.frombuffer(payload, dtype=np.uint8).reshape(n_rows, row_bytes)
    field = SpaceTimeField(n_sites, packed)
    if not field.pad_bits_clear():
        raise CorruptRecordError("nonzero row padding bits")
    params = SimParams(n_sites, n_rows - 1, p, q, seed)
    return field, params, MultiHotTarget.from_mask(target_mask)


def iter_records(data_path):
    """Sequential scan of every record, yielding (entry, field, params, target)."""
    with open(data_path, "rb") as fh:
        _check_preamble(fh, DATA_MAGIC, str(data_path))
        offset = 0
        while True:
            header = fh.read(HEADER_SIZE)
            if not header:
                return
            if len(header) < HEADER_SIZE:
                raise CorruptRecordError(f"{data_path}: truncated header")
            payload_len = _HEADER.unpack(header)[-1]
            entry = IndexEntry(offset, HEADER_SIZE + payload_len)
            yield (entry, *_read_at(fh, entry))
            offset += entry.length
            fh.seek(5 + offset)


def rebuild_index(data_path, index_path=None) -> list[IndexEntry]:
    """Regenerate the sidecar index by scanning record headers."""
    index_path = Path(index_path) if index_path else default_index_path(data_path)
    entries = []
    size = Path(data_path).stat().st_size
    with open(data_path, "rb") as fh:
        _check_preamble(fh, DATA_MAGIC, str(data_path))
        offset = 0
        while 5 + offset < size:
            fh.seek(5 + offset)
            header = fh.read(HEADER_SIZE)
            if len(header) < HEADER_SIZE:
                raise CorruptRecordError(f"{data_path}: truncated header")
            payload_len = _HEADER.unpack(header)[-1]
            if 5 + offset + HEADER_SIZE + payload_len > size:
                raise CorruptRecordError(f"{data_path}: truncated payload")
            entries.append(IndexEntry(offset, HEADER_SIZE + payload_len))
            offset += HEADER_SIZE + payload_len
    with open(index_path, "wb") as fh:
        fh.write(INDEX_MAGIC + bytes([VERSION]))
        for e in entries:
            fh.write(_ENTRY.pack(e.offset, e.length))
    return entries


@dataclass(frozen=True)
class GenerationSpec:
    """One dataset-generation run.

    mode "special-points" samples an explicit (p, q) list; "random-points"
    and "test-set" draw n_points uniformly from the unit square (test-set
    is just a larger independent draw, kept as its own mode for bookkeeping).
    """

    mode: str  # special-points | random-points | test-set
    systems_per_point: int
    n_sites: int
    n_steps: int
    master_seed: int
    points: tuple[tuple[float, float], ...] = ()
    n_points: int = 0
    init_density: float = 0.5

    def __post_init__(self):
        if self.mode not in ("special-points", "random-points", "test-set"):
            raise ValueError(f"unknown generation mode {self.mode!r}")
        if self.mode == "special-points" and not self.points:
            raise ValueError("special-points mode requires an explicit (p, q) list")
        if self.mode != "special-points" and self.n_points < 1:
            raise ValueError("random modes require n_points >= 1")
        if self.systems_per_point < 1:
            raise ValueError("systems_per_point must be >= 1")

    def resolve_points(self) -> list[tuple[float, float]]:
        if self.mode == "special-points":
            return list(self.points)
        gen = rng.stream(rng.derive_seed(self.master_seed, 0xBEEF))
        return [tuple(gen.random(2)) for _ in range(self.n_points)]


def generate(spec: GenerationSpec, out_path, labeler=label_field,
             schemes=None, batch: int = 64) -> Path:
    """Simulate, label and store every realization of a generation spec.

    Realization seeds derive from (master seed, point index, realization
    index) and are recorded in each header, so any record can be
    re-simulated exactly.  Writes <out>.manifest.txt alongside the data
    and index files; partial output is marked incomplete there.
    """
    out_path = Path(out_path)
    manifest_path = out_path.with_suffix(out_path.suffix + ".manifest.txt")
    points = spec.resolve_points()
    lines = [
        f"dataset: {out_path.name}",
        f"mode: {spec.mode}",
        f"n_sites: {spec.n_sites}  n_steps: {spec.n_steps}  "
        f"(N:T ratio 1:{spec.n_steps / spec.n_sites:.1f})",
        f"systems_per_point: {spec.systems_per_point}",
        f"init_density: {spec.init_density}",
        f"master_seed: {spec.master_seed}",
        "seed_derivation: blake2b(master_seed, point_index, realization_index)",
        f"points: {len(points)}",
        "",
        "point  p        q        count  " + "  ".join(k.value for k in CANONICAL_ORDER),
    ]
    names = [k.value for k in CANONICAL_ORDER]
    try:
        with DatasetWriter(out_path) as writer:
            for pt, (p, q) in enumerate(points):
                counts = np.zeros(6, dtype=np.int64)
                for start in range(0, spec.systems_per_point, batch):
                    n_batch = min(batch, spec.systems_per_point - start)
                    seeds = np.array(
                        [rng.derive_seed(spec.master_seed, pt, start + r)
                         for r in range(n_batch)], dtype=np.uint64)
                    fields = simulate_batch(spec.n_sites, spec.n_steps, p, q,
                                            seeds, spec.init_density)
                    for r in range(n_batch):
                        kwargs = {"schemes": schemes} if schemes is not None else {}
                        target = labeler(fields[r], **kwargs)
                        counts += np.array(target.as_tuple(), dtype=np.int64)
                        params = SimParams(spec.n_sites, spec.n_steps, p, q,
                                           int(seeds[r]), spec.init_density)
                        writer.append_record(SpaceTimeField.from_bool(fields[r]),
                                             params, target)
                prev = counts / spec.systems_per_point
                lines.append(
                    f"{pt:<6d} {p:<8.5f} {q:<8.5f} {spec.systems_per_point:<6d} "
                    + "  ".join(f"{names[k]}={prev[k]:.4f}" for k in range(6))
                )
        lines.append("")
        lines.append(f"status: complete ({len(points) * spec.systems_per_point} records)")
    except BaseException:
        lines.append("")
        lines.append("status: INCOMPLETE (generation aborted)")
        manifest_path.write_text("\n".join(lines) + "\n")
        raise
    manifest_path.write_text("\n".join(lines) + "\n")
    return out_path
