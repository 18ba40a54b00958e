"""Hidden percolation pattern detection via block renormalization.

A pattern is declared present when the renormalized sites derived from
local blocks of the field form a cluster connecting the first and last
time rows.  Block geometry, activity predicate and adjacency are data
(RenormScheme), so conventions can be overridden from a text file
without touching code.
"""

import configparser
from dataclasses import dataclass, field as dc_field
from enum import Enum

import numpy as np
from numba import njit

from .sim import SpaceTimeField


class PatternKind(Enum):
    A = "A"
    PL = "PL"
    Qplus = "Qplus"
    Dplus = "Dplus"
    Q = "Q"
    D = "D"


#: Canonical ordering used in every target vector, file and report.
CANONICAL_ORDER = (
    PatternKind.A,
    PatternKind.PL,
    PatternKind.Qplus,
    PatternKind.Dplus,
    PatternKind.Q,
    PatternKind.D,
)

#: The five renormalization-based patterns, in canonical order.
RENORM_KINDS = CANONICAL_ORDER[1:]

NEAREST = frozenset({(1, 0), (-1, 0), (0, 1), (0, -1)})
DIAGONAL = frozenset({(1, 1), (1, -1), (-1, 1), (-1, -1)})


@dataclass(frozen=True)
class MultiHotTarget:
    """Six Booleans in canonical order [A, PL, Q+, D+, Q, D]."""

    a: bool
    pl: bool
    qplus: bool
    dplus: bool
    q: bool
    d: bool

    def __post_init__(self):
        if self.a and any((self.pl, self.qplus, self.dplus, self.q, self.d)):
            raise ValueError("absorbing excludes every pattern flag")
        if self.d and not self.dplus:
            raise ValueError("D spanning implies D+ spanning")
        if self.q and not self.qplus:
            raise ValueError("Q spanning implies Q+ spanning")

    @property
    def percolating(self) -> bool:
        return not self.a

    def as_tuple(self) -> tuple[bool, ...]:
        return (self.a, self.pl, self.qplus, self.dplus, self.q, self.d)

    def to_mask(self) -> int:
        return sum(1 << k for k, bit in enumerate(self.as_tuple()) if bit)

    @classmethod
    def from_mask(cls, mask: int) -> "MultiHotTarget":
        if mask & ~0x3F:
            raise ValueError("target mask bits 6-7 must be zero")
        return cls(*(bool(mask >> k & 1) for k in range(6)))


@dataclass(frozen=True)
class RenormScheme:
    """Block geometry + activity predicate + renormalized adjacency.

    block_shape / anchor_stride are (width in sites, height in rows).
    active_codes holds block bit-patterns (row-major over time rows then
    sites, bit j = position j) for which the renormalized site is active.
    Adjacency offsets are (d_space, d_time) on the renormalized grid.
    """

    name: str
    block_shape: tuple[int, int]
    anchor_stride: tuple[int, int]
    active_codes: frozenset[int]
    adjacency: frozenset[tuple[int, int]] = dc_field(default=NEAREST)
    span_axis: str = "time"  # "time" | "space": direction a cluster must traverse

    def __post_init__(self):
        if self.span_axis not in ("time", "space"):
            raise ValueError("span_axis must be 'time' or 'space'")
        w, h = self.block_shape
        if w < 1 or h < 1:
            raise ValueError("block shape components must be >= 1")
        if self.anchor_stride[0] < 1 or self.anchor_stride[1] < 1:
            raise ValueError("anchor stride components must be >= 1")
        n_patterns = 1 << (w * h)
        if any(c < 0 or c >= n_patterns for c in self.active_codes):
            raise ValueError("active code outside the block pattern range")
        for off in self.adjacency:
            if off == (0, 0):
                raise ValueError("adjacency offsets must be nonzero")
            if (-off[0], -off[1]) not in self.adjacency:
                raise ValueError("adjacency must be symmetric under negation")

    def lut(self) -> np.ndarray:
        w, h = self.block_shape
        table = np.zeros(1 << (w * h), dtype=bool)
        table[list(self.active_codes)] = True
        return table


@dataclass(frozen=True)
class RenormField:
    grid: np.ndarray  # (time, space) Boolean
    scheme: RenormScheme
    source_shape: tuple[int, int]  # (n_rows, n_sites)
    spatial_periodic: bool


def _codes_matching(width: int, height: int, pred) -> frozenset[int]:
    n = width * height
    return frozenset(c for c in range(1 << n) if pred(c.bit_count(), c))


_SITE_SCHEME = RenormScheme(
    name="site",
    block_shape=(1, 1),
    anchor_stride=(1, 1),
    active_codes=frozenset({1}),
    adjacency=NEAREST,
)


def site_scheme() -> RenormScheme:
    """1x1 identity scheme; spanning on it is plain site percolation."""
    return _SITE_SCHEME


def builtin_scheme(kind: PatternKind) -> RenormScheme:
    """Default block conventions for the five renormalized patterns.

    D/D+ : 2x1 spatial pair, active iff exactly one site occupied.
    Q/Q+ : 2x2 block, active iff the occupied sites form a diagonal pair.
    PL   : 2x2 block, active iff at least 3 of 4 sites occupied.
    Base kinds connect nearest renormalized neighbors; "+" kinds add the
    four diagonal offsets.  Blocks are disjoint (stride = block shape).
    """
    if kind == PatternKind.A:
        raise ValueError("A is decided by site-level survival, not a scheme")
    if kind in (PatternKind.D, PatternKind.Dplus):
        shape = (2, 1)
        codes = frozenset({0b01, 0b10})
    elif kind in (PatternKind.Q, PatternKind.Qplus):
        shape = (2, 2)
        codes = frozenset({0b1001, 0b0110})
    else:  # PL
        shape = (2, 2)
        codes = _codes_matching(2, 2, lambda pop, _: pop >= 3)
    plus = kind in (PatternKind.Dplus, PatternKind.Qplus)
    return RenormScheme(
        name=kind.value,
        block_shape=shape,
        anchor_stride=shape,
        active_codes=codes,
        adjacency=NEAREST | DIAGONAL if plus else NEAREST,
    )


def renormalize(field: SpaceTimeField | np.ndarray, scheme: RenormScheme) -> RenormField:
    """Map each anchored block through the activity predicate.

    Spatial anchors wrap around iff the stride divides n_sites; time
    anchors never wrap (time is the spanning direction).
    """
    arr = field.to_bool() if isinstance(field, SpaceTimeField) else np.asarray(field, dtype=bool)
    n_rows, n_sites = arr.shape
    w, h = scheme.block_shape
    sw, st = scheme.anchor_stride
    if n_sites < w or n_rows < h:
        raise ValueError("field smaller than one block")

    periodic = n_sites % sw == 0
    if periodic:
        space_anchors = np.arange(0, n_sites, sw)
    else:
        space_anchors = np.arange(0, n_sites - w + 1, sw)
    time_anchors = np.arange(0, n_rows - h + 1, st)

    codes = np.zeros((len(time_anchors), len(space_anchors)), dtype=np.int64)
    for r in range(h):
        rows = arr[time_anchors + r]  # (n_time_anchors, n_sites)
        for c in range(w):
            cols = (space_anchors + c) % n_sites
            codes |= rows[:, cols].astype(np.int64) << (r * w + c)
    grid = scheme.lut()[codes]
    return RenormField(grid, scheme, (n_rows, n_sites), periodic)


@njit(cache=True)
def _uf_find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]  # path halving
        x = parent[x]
    return x


@njit(cache=True)
def _spans_uf(active, offsets, periodic):
    """Union-find clustering; True iff a cluster touches both the first
    and last time rows.  offsets: (k, 2) int64 rows of (d_time, d_space),
    pre-filtered to the backward half of a symmetric adjacency."""
    nt, ns = active.shape
    parent = np.arange(nt * ns, dtype=np.int64)
    for t in range(nt):
        for s in range(ns):
            if not active[t, s]:
                continue
            idx = t * ns + s
            for k in range(offsets.shape[0]):
                t2 = t + offsets[k, 0]
                if t2 < 0 or t2 >= nt:
                    continue
                s2 = s + offsets[k, 1]
                if periodic:
                    s2 %= ns
                elif s2 < 0 or s2 >= ns:
                    continue
                if not active[t2, s2]:
                    continue
                ra = _uf_find(parent, idx)
                rb = _uf_find(parent, t2 * ns + s2)
                if ra != rb:
                    parent[rb] = ra
    touches_top = np.zeros(nt * ns, dtype=np.bool_)
    for s in range(ns):
        if active[0, s]:
            touches_top[_uf_find(parent, s)] = True
    base = (nt - 1) * ns
    for s in range(ns):
        if active[nt - 1, s] and touches_top[_uf_find(parent, base + s)]:
            return True
    return False


def _backward_offsets(adjacency: frozenset[tuple[int, int]],
                      span_axis: str = "time") -> np.ndarray:
    # symmetric set: unioning along one half visits every edge once;
    # offset order follows the grid axes ((time, space), or swapped when
    # the grid was transposed for spatial spanning)
    if span_axis == "space":
        pairs = [(ds, dt) for (ds, dt) in adjacency]
    else:
        pairs = [(dt, ds) for (ds, dt) in adjacency]
    half = [(a, b) for (a, b) in pairs if a < 0 or (a == 0 and b < 0)]
    return np.array(half, dtype=np.int64).reshape(-1, 2)


def spanning(rf: RenormField, spatial_periodic: bool | None = None) -> bool:
    """True iff an active cluster traverses the scheme's span axis.

    Temporal spanning connects the first and last time rows of the
    renormalized grid, with optional wraparound in space.  Spatial
    spanning connects the first and last space columns; wrap bonds are
    disabled there, otherwise a two-cell cluster straddling the seam
    would count as system-spanning.
    """
    grid = np.ascontiguousarray(rf.grid, dtype=bool)
    if rf.scheme.span_axis == "space":
        grid = np.ascontiguousarray(grid.T)
        periodic = False
    else:
        periodic = rf.spatial_periodic if spatial_periodic is None else spatial_periodic
    if grid.size == 0 or not grid[0].any() or not grid[-1].any():
        return False
    offsets = _backward_offsets(rf.scheme.adjacency, rf.scheme.span_axis)
    return bool(_spans_uf(grid, offsets, periodic))


def site_percolates(field: SpaceTimeField | np.ndarray) -> bool:
    """Survival test for automaton fields: occupied site in the last row.

    Valid only when no spontaneous creation holds (every occupied cell
    has an occupied parent), which makes last-row activity equivalent to
    a directed occupied path from row 0.  For Bernoulli controls use
    spanning(renormalize(field, site_scheme())) instead.
    """
    arr = field.to_bool() if isinstance(field, SpaceTimeField) else np.asarray(field, dtype=bool)
    return bool(arr[-1].any())


def default_schemes() -> dict[PatternKind, RenormScheme]:
    return {kind: builtin_scheme(kind) for kind in RENORM_KINDS}


def label_field(
    field: SpaceTimeField | np.ndarray,
    schemes: dict[PatternKind, RenormScheme] | None = None,
) -> MultiHotTarget:
    """Ground-truth multi-hot label for an automaton-generated field.

    A is decided by site-level survival; when A holds every pattern flag
    is forced false.  Otherwise each pattern flag is the spanning verdict
    of its renormalized grid.
    """
    arr = field.to_bool() if isinstance(field, SpaceTimeField) else np.asarray(field, dtype=bool)
    if not site_percolates(arr):
        return MultiHotTarget(True, False, False, False, False, False)
    if schemes is None:
        schemes = default_schemes()
    flags = {
        kind: spanning(renormalize(arr, schemes[kind]))
        for kind in RENORM_KINDS
    }
    return MultiHotTarget(
        False,
        flags[PatternKind.PL],
        flags[PatternKind.Qplus],
        flags[PatternKind.Dplus],
        flags[PatternKind.Q],
        flags[PatternKind.D],
    )


def _parse_shape(text: str) -> tuple[int, int]:
    w, _, h = text.lower().partition("x")
    return int(w), int(h)


def _parse_adjacency(text: str) -> frozenset[tuple[int, int]]:
    text = text.strip().lower()
    if text in ("nearest", "nn"):
        return NEAREST
    if text in ("nearest+diagonal", "nearest+next", "nn+nnn"):
        return NEAREST | DIAGONAL
    offs = set()
    for tok in text.replace(";", " ").replace(")", " ").replace("(", " ").split():
        ds, _, dt = tok.partition(",")
        off = (int(ds), int(dt))
        offs.add(off)
        offs.add((-off[0], -off[1]))
    return frozenset(offs)


def load_scheme_file(path) -> dict[PatternKind, RenormScheme]:
    """Scheme overrides from an INI-style text file.

    One section per pattern name (PL, Qplus, Dplus, Q, D) with keys:
    block = WxH, stride = WxH (optional, defaults to block), active =
    comma-separated row-major bit-strings, adjacency = nearest |
    nearest+diagonal | explicit "ds,dt" offsets.  Patterns not listed
    keep their built-in scheme.
    """
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise FileNotFoundError(path)
    schemes = default_schemes()
    aliases = {"q+": PatternKind.Qplus, "d+": PatternKind.Dplus}
    for section in cp.sections():
        key = section.strip()
        kind = aliases.get(key.lower()) or PatternKind(
            {k.value.lower(): k.value for k in RENORM_KINDS}[key.lower()]
        )
        opts = cp[section]
        block = _parse_shape(opts["block"])
        stride = _parse_shape(opts["stride"]) if "stride" in opts else block
        w, h = block
        codes = set()
        for bits in opts["active"].split(","):
            bits = bits.strip()
            if len(bits) != w * h:
                raise ValueError(
                    f"[{section}] active pattern {bits!r} must have {w * h} bits"
                )
            codes.add(sum(1 << j for j, ch in enumerate(bits) if ch == "1"))
        adjacency = (
            _parse_adjacency(opts["adjacency"]) if "adjacency" in opts
            else schemes[kind].adjacency
        )
        schemes[kind] = RenormScheme(
            name=kind.value,
            block_shape=block,
            anchor_stride=stride,
            active_codes=frozenset(codes),
            adjacency=adjacency,
            span_axis=opts.get("span", schemes[kind].span_axis).strip(),
        )
    return schemes


def reference_schemes() -> dict[PatternKind, RenormScheme]:
    """Scheme set tuned to reproduce the reference critical points at
    q=0.9 (ships as an override file; see schemes/reference.ini)."""
    from importlib import resources

    with resources.as_file(
        resources.files("dppat").joinpath("schemes/reference.ini")
    ) as path:
        return load_scheme_file(path)
