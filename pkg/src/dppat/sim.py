"""Replication automaton on a (1+1)-dimensional periodic lattice.

The update rule is local: a site survives with probability p if it was
occupied, and an empty site is activated by k occupied neighbors (left
and right, periodic in space) with probability 1 - (1-q)^k, i.e. 0, q,
or q(2-q).  All randomness comes from per-realization Philox streams,
one uniform draw per site per row, so outputs are bit-identical across
platforms and batch layouts.
"""

from dataclasses import dataclass

import numpy as np

from . import rng


@dataclass(frozen=True)
class SimParams:
    n_sites: int
    n_steps: int
    p: float
    q: float
    seed: int
    init_density: float = 0.5

    def __post_init__(self):
        if self.n_sites < 3:
            raise ValueError("n_sites must be >= 3 (three distinct neighborhood sites)")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        for name in ("p", "q", "init_density"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


class SpaceTimeField:
    """Bit-packed Boolean lattice: n_rows time rows of n_sites each.

    Packing is LSB-first: site i of a row lives at byte i//8, bit i%8.
    Rows are padded to byte boundaries with zero bits.
    """

    def __init__(self, n_sites: int, packed: np.ndarray):
        row_bytes = (n_sites + 7) // 8
        packed = np.ascontiguousarray(packed, dtype=np.uint8)
        if packed.ndim != 2 or packed.shape[1] != row_bytes:
            raise ValueError("packed array shape does not match n_sites")
        self.n_sites = n_sites
        self.n_rows = packed.shape[0]
        self.packed = packed

    @classmethod
    def from_bool(cls, arr: np.ndarray) -> "SpaceTimeField":
        arr = np.asarray(arr, dtype=bool)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D (rows, sites) Boolean array")
        packed = np.packbits(arr, axis=1, bitorder="little")
        return cls(arr.shape[1], packed)

    def to_bool(self) -> np.ndarray:
        bits = np.unpackbits(self.packed, axis=1, bitorder="little")
        return bits[:, : self.n_sites].astype(bool)

    def row(self, t: int) -> np.ndarray:
        bits = np.unpackbits(self.packed[t], bitorder="little")
        return bits[: self.n_sites].astype(bool)

    def pad_bits_clear(self) -> bool:
        tail = self.n_sites % 8
        if tail == 0:
            return True
        mask = np.uint8((0xFF << tail) & 0xFF)
        return not np.any(self.packed[:, -1] & mask)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SpaceTimeField)
            and self.n_sites == other.n_sites
            and self.n_rows == other.n_rows
            and np.array_equal(self.packed, other.packed)
        )


def rule_prob(center: int, left: int, right: int, p: float, q: float) -> float:
    """Probability that the next-step site is occupied.

    Occupied center: survives with probability p regardless of neighbors.
    Empty center with k occupied neighbors: 1-(1-q)^k, i.e. 0, q, q(2-q).
    """
    if center:
        return p
    k = int(bool(left)) + int(bool(right))
    return 1.0 - (1.0 - q) ** k


def _next_prob(rows: np.ndarray, p: float, q: float) -> np.ndarray:
    # rows: (..., N) boolean, periodic in the last axis
    left = np.roll(rows, 1, axis=-1)
    right = np.roll(rows, -1, axis=-1)
    k = left.astype(np.int8) + right.astype(np.int8)
    qk = np.array([0.0, q, q * (2.0 - q)])
    return np.where(rows, p, qk[k])


def step(row: np.ndarray, params: SimParams, gen: np.random.Generator) -> np.ndarray:
    """One parallel update; consumes exactly n_sites uniforms from gen."""
    row = np.asarray(row, dtype=bool)
    if row.shape != (params.n_sites,):
        raise ValueError("row length does not match n_sites")
    u = gen.random(params.n_sites)
    return u < _next_prob(row, params.p, params.q)


def simulate(params: SimParams) -> SpaceTimeField:
    """Full space-time realization, rows t = 0..n_steps."""
    return SpaceTimeField.from_bool(simulate_bool(params))


def simulate_bool(params: SimParams) -> np.ndarray:
    """Like simulate but returns the unpacked (n_steps+1, n_sites) array."""
    gen = rng.stream(params.seed)
    out = np.empty((params.n_steps + 1, params.n_sites), dtype=bool)
    out[0] = gen.random(params.n_sites) < params.init_density
    for t in range(params.n_steps):
        out[t + 1] = step(out[t], params, gen)
    return out


def simulate_batch(
    n_sites: int,
    n_steps: int,
    p: float,
    q: float,
    seeds: np.ndarray,
    init_density: float = 0.5,
) -> np.ndarray:
    """Simulate many realizations at once; returns (R, n_steps+1, n_sites).

    Bit-identical to calling simulate() per seed: each realization's
    uniforms come from its own stream, the batch only vectorizes the
    arithmetic.
    """
    SimParams(n_sites, n_steps, p, q, 0, init_density)  # validate once
    seeds = np.asarray(seeds, dtype=np.uint64)
    n_real = len(seeds)
    u = np.empty((n_real, n_steps + 1, n_sites))
    for r, s in enumerate(seeds):
        u[r] = rng.stream(int(s)).random((n_steps + 1, n_sites))
    out = np.empty((n_real, n_steps + 1, n_sites), dtype=bool)
    out[:, 0] = u[:, 0] < init_density
    for t in range(n_steps):
        out[:, t + 1] = u[:, t + 1] < _next_prob(out[:, t], p, q)
    return out


def extinction_time(field: SpaceTimeField) -> int | None:
    """First row index whose row is all-zero, or None if activity survives."""
    occupied = field.to_bool().any(axis=1)
    empty = np.flatnonzero(~occupied)
    return int(empty[0]) if empty.size else None


def bernoulli_field(n_sites: int, n_rows: int, p_b: float, seed: int) -> SpaceTimeField:
    """Isotropic i.i.d. control field: no dynamics, no directionality."""
    return SpaceTimeField.from_bool(bernoulli_bool(n_sites, n_rows, p_b, seed))


def bernoulli_bool(n_sites: int, n_rows: int, p_b: float, seed: int) -> np.ndarray:
    if not 0.0 <= p_b <= 1.0:
        raise ValueError("p_b must be in [0, 1]")
    gen = rng.stream(seed)
    return gen.random((n_rows, n_sites)) < p_b
