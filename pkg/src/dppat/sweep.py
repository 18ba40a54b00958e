"""Monte Carlo sweeps, phase maps and critical-point extraction.

Empirical spanning probabilities come either from deterministic labels
(simulate + label per realization) or from an ingested table of
calibrated neural scores.  Critical points are read off as threshold
crossings of the probability curves, linearly interpolated between
bracketing grid points.
"""

import csv
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import rng
from .patterns import (
    CANONICAL_ORDER,
    RENORM_KINDS,
    PatternKind,
    default_schemes,
    label_field,
    renormalize,
    site_scheme,
    spanning,
)
from .sim import bernoulli_bool, simulate_batch

PATTERN_NAMES = tuple(k.value for k in CANONICAL_ORDER)
_Z95 = 1.959963984540054


def wilson_interval(k: int, n: int, z: float = _Z95) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4 * n * n)) / denom
    # the bounds are exactly 0 / 1 at the extremes; avoid rounding drift
    lo = 0.0 if k == 0 else max(0.0, center - half)
    hi = 1.0 if k == n else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class SweepResult:
    q: float
    p_grid: np.ndarray
    probs: np.ndarray      # (len(p_grid), 6) in canonical order
    n_trials: np.ndarray   # per grid point
    conf_lo: np.ndarray    # (len(p_grid), 6)
    conf_hi: np.ndarray
    source: str            # deterministic-labels | nn-scores

    def pattern(self, name: str) -> np.ndarray:
        return self.probs[:, PATTERN_NAMES.index(name)]


@dataclass(frozen=True)
class CriticalEstimate:
    pattern: str
    q: float
    p_c: float
    threshold: float
    bracket: tuple[float, float]
    rising: bool
    method: str = "interpolated-crossing"


@dataclass(frozen=True)
class PhaseMap:
    p_grid: np.ndarray
    q_grid: np.ndarray
    classes: np.ndarray        # (len(q_grid), len(p_grid)) of str
    probs: np.ndarray          # (len(q_grid), len(p_grid), 6)
    thresholds: dict = dc_field(default_factory=dict)


def _label_matrix(fields: np.ndarray, schemes) -> np.ndarray:
    out = np.zeros((fields.shape[0], 6), dtype=bool)
    for r in range(fields.shape[0]):
        out[r] = label_field(fields[r], schemes=schemes).as_tuple()
    return out


def labeled_point(p: float, q: float, n_real: int, n_sites: int, n_steps: int,
                  master_seed: int, point_index: int, schemes=None,
                  init_density: float = 0.5, batch: int = 64) -> np.ndarray:
    """Label counts (6,) over n_real realizations at one (p, q) point."""
    if schemes is None:
        schemes = default_schemes()
    counts = np.zeros(6, dtype=np.int64)
    for start in range(0, n_real, batch):
        n_batch = min(batch, n_real - start)
        seeds = np.array(
            [rng.derive_seed(master_seed, point_index, start + r) for r in range(n_batch)],
            dtype=np.uint64,
        )
        fields = simulate_batch(n_sites, n_steps, p, q, seeds, init_density)
        counts += _label_matrix(fields, schemes).sum(axis=0)
    return counts


def _attach_confidence(p_grid, q, counts, n_trials, source) -> SweepResult:
    probs = counts / n_trials[:, None]
    lo = np.zeros_like(probs)
    hi = np.zeros_like(probs)
    for i in range(len(p_grid)):
        for k in range(6):
            lo[i, k], hi[i, k] = wilson_interval(int(counts[i, k]), int(n_trials[i]))
    return SweepResult(q, np.asarray(p_grid, dtype=float), probs,
                       n_trials, lo, hi, source)


def sweep_fixed_q(q: float, p_grid, n_real: int, n_sites: int, n_steps: int,
                  master_seed: int = 0, schemes=None, n_jobs: int = -1) -> SweepResult:
    """Deterministic-label probability sweep over p at fixed q."""
    p_grid = np.asarray(sorted(p_grid), dtype=float)
    if n_real < 1:
        raise ValueError("n_real must be >= 1")
    counts = Parallel(n_jobs=n_jobs)(
        delayed(labeled_point)(p, q, n_real, n_sites, n_steps, master_seed, i, schemes)
        for i, p in enumerate(p_grid)
    )
    counts = np.array(counts, dtype=float)
    n_trials = np.full(len(p_grid), n_real, dtype=np.int64)
    return _attach_confidence(p_grid, q, counts, n_trials, "deterministic-labels")


def sweep_from_scores(q: float, score_rows: list[dict]) -> SweepResult:
    """Sweep built from an ingested neural score table at fixed q.

    P_k(p) is the mean calibrated probability over realizations at that
    grid point (rows with matching q only).
    """
    by_p: dict[float, list] = {}
    for row in score_rows:
        if abs(row["q"] - q) > 1e-9:
            continue
        by_p.setdefault(row["p"], []).append(
            [row[name] for name in PATTERN_NAMES]
        )
    if not by_p:
        raise ValueError(f"score table has no rows at q={q}")
    p_grid = np.array(sorted(by_p), dtype=float)
    probs = np.array([np.mean(by_p[p], axis=0) for p in p_grid])
    n_trials = np.array([len(by_p[p]) for p in p_grid], dtype=np.int64)
    lo = np.zeros_like(probs)
    hi = np.ones_like(probs)
    for i in range(len(p_grid)):
        for k in range(6):
            lo[i, k], hi[i, k] = wilson_interval(
                int(round(probs[i, k] * n_trials[i])), int(n_trials[i]))
    return SweepResult(q, p_grid, probs, n_trials, lo, hi, "nn-scores")


def estimate_crossing(sweep: SweepResult, pattern: str,
                      threshold: float) -> list[CriticalEstimate]:
    """All threshold crossings of P_pattern(p), each with its bracket."""
    y = sweep.pattern(pattern)
    x = sweep.p_grid
    out = []
    for i in range(len(x) - 1):
        a, b = y[i] - threshold, y[i + 1] - threshold
        if a == 0.0 and b == 0.0:
            continue
        if (a <= 0.0 < b) or (a > 0.0 >= b):
            frac = a / (a - b)
            out.append(CriticalEstimate(
                pattern=pattern, q=sweep.q,
                p_c=float(x[i] + frac * (x[i + 1] - x[i])),
                threshold=threshold,
                bracket=(float(x[i]), float(x[i + 1])),
                rising=b > a,
            ))
    return out


def exit_crossing(sweep: SweepResult, pattern: str,
                  threshold: float = 0.5) -> CriticalEstimate | None:
    """Outermost crossing on the decreasing flank (pattern exit point)."""
    falling = [c for c in estimate_crossing(sweep, pattern, threshold) if not c.rising]
    return falling[-1] if falling else None


def onset_crossing(sweep: SweepResult, pattern: str,
                   threshold: float = 0.5) -> CriticalEstimate | None:
    """First crossing on the increasing flank (pattern onset point)."""
    rising = [c for c in estimate_crossing(sweep, pattern, threshold) if c.rising]
    return rising[0] if rising else None


def band_width(sweep: SweepResult, pattern: str,
               lo: float = 0.1, hi: float = 0.9) -> float | None:
    """p-width of the transition band lo < P_pattern < hi (exit flank)."""
    c_hi = exit_crossing(sweep, pattern, hi)
    c_lo = exit_crossing(sweep, pattern, lo)
    if c_hi is None or c_lo is None:
        return None
    return abs(c_lo.p_c - c_hi.p_c)


DEFAULT_THRESHOLDS = {name: 0.5 for name in PATTERN_NAMES}


def assign_class(probs, thresholds=None) -> str:
    """Fixed-order class rule: last pattern in A-PL-Q+-D+-Q-D above its
    threshold wins; A only when no pattern exceeds; otherwise a system
    that percolates without any specific pattern."""
    if thresholds is None:
        thresholds = DEFAULT_THRESHOLDS
    probs = dict(zip(PATTERN_NAMES, probs)) if not isinstance(probs, dict) else probs
    winner = None
    for name in PATTERN_NAMES[1:]:
        if probs[name] > thresholds[name]:
            winner = name
    if winner is not None:
        return winner
    if probs["A"] > thresholds["A"]:
        return "A"
    return "percolating"


def phase_map(p_grid, q_grid, n_real: int, n_sites: int, n_steps: int,
              master_seed: int = 0, thresholds=None, schemes=None,
              n_jobs: int = -1) -> PhaseMap:
    """Deterministic-label phase map over a (p, q) grid."""
    p_grid = np.asarray(p_grid, dtype=float)
    q_grid = np.asarray(q_grid, dtype=float)
    cells = [(iq, ip) for iq in range(len(q_grid)) for ip in range(len(p_grid))]
    counts = Parallel(n_jobs=n_jobs)(
        delayed(labeled_point)(
            p_grid[ip], q_grid[iq], n_real, n_sites, n_steps,
            master_seed, iq * len(p_grid) + ip, schemes)
        for iq, ip in cells
    )
    probs = np.array(counts, dtype=float).reshape(len(q_grid), len(p_grid), 6) / n_real
    return classify_map(p_grid, q_grid, probs, thresholds)


def classify_map(p_grid, q_grid, probs, thresholds=None) -> PhaseMap:
    """Recompute class assignments from stored per-cell probabilities."""
    thresholds = dict(DEFAULT_THRESHOLDS if thresholds is None else thresholds)
    classes = np.empty((len(q_grid), len(p_grid)), dtype=object)
    for iq in range(len(q_grid)):
        for ip in range(len(p_grid)):
            classes[iq, ip] = assign_class(probs[iq, ip], thresholds)
    return PhaseMap(np.asarray(p_grid, float), np.asarray(q_grid, float),
                    classes, probs, thresholds)


def bernoulli_point(p_b: float, n_real: int, n_sites: int, n_rows: int,
                    master_seed: int, point_index: int, schemes=None) -> np.ndarray:
    """Pattern spanning counts on isotropic control fields.

    Site percolation is evaluated by spanning on the 1x1 site scheme
    (site_percolates assumes automaton dynamics and is invalid here);
    the A slot counts its complement.
    """
    if schemes is None:
        schemes = default_schemes()
    counts = np.zeros(6, dtype=np.int64)
    site = site_scheme()
    for r in range(n_real):
        seed = rng.derive_seed(master_seed, point_index, r)
        arr = bernoulli_bool(n_sites, n_rows, p_b, seed)
        site_spans = spanning(renormalize(arr, site))
        counts[0] += not site_spans
        for k, kind in enumerate(RENORM_KINDS, start=1):
            counts[k] += spanning(renormalize(arr, schemes[kind]))
    return counts


def bernoulli_control(pb_grid, n_real: int, n_sites: int, n_rows: int,
                      master_seed: int = 0, schemes=None,
                      n_jobs: int = -1) -> SweepResult:
    """Negative control: spanning probabilities on i.i.d. fields vs p_b."""
    pb_grid = np.asarray(sorted(pb_grid), dtype=float)
    counts = Parallel(n_jobs=n_jobs)(
        delayed(bernoulli_point)(pb, n_real, n_sites, n_rows, master_seed, i, schemes)
        for i, pb in enumerate(pb_grid)
    )
    counts = np.array(counts, dtype=float)
    n_trials = np.full(len(pb_grid), n_real, dtype=np.int64)
    return _attach_confidence(pb_grid, float("nan"), counts, n_trials,
                              "deterministic-labels")


# -- score table + threshold sidecar ingest (written by the NN pipeline) --

SCORE_HEADER = ["p", "q", "realization", "A", "PL", "Qplus", "Dplus", "Q", "D"]


def read_score_table(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SCORE_HEADER:
            raise ValueError(
                f"score table header must be {','.join(SCORE_HEADER)}")
        for raw in reader:
            row = {"realization": int(raw["realization"])}
            for key in ("p", "q", *PATTERN_NAMES):
                row[key] = float(raw[key])
            rows.append(row)
    return rows


def write_score_table(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCORE_HEADER)
        for row in rows:
            writer.writerow([row["p"], row["q"], row["realization"],
                             *(row[name] for name in PATTERN_NAMES)])


def read_thresholds(path) -> dict[str, float]:
    """Sidecar text file of "pattern=value" lines."""
    thresholds = dict(DEFAULT_THRESHOLDS)
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, _, value = line.partition("=")
        name = name.strip()
        if name not in PATTERN_NAMES:
            raise ValueError(f"unknown pattern {name!r} in threshold file")
        thresholds[name] = float(value)
    return thresholds


def write_thresholds(path, thresholds: dict[str, float]) -> None:
    with open(path, "w") as fh:
        for name in PATTERN_NAMES:
            if name in thresholds:
                fh.write(f"{name}={thresholds[name]}\n")


def _as_csv_writer(path_or_file):
    if hasattr(path_or_file, "write"):
        return csv.writer(path_or_file), None
    fh = open(path_or_file, "w", newline="")
    return csv.writer(fh), fh


def sweep_to_csv(sweep: SweepResult, path) -> None:
    writer, fh = _as_csv_writer(path)
    try:
        writer.writerow(["p", "q", "n_trials"]
                        + [f"P_{n}" for n in PATTERN_NAMES]
                        + [f"lo_{n}" for n in PATTERN_NAMES]
                        + [f"hi_{n}" for n in PATTERN_NAMES])
        for i, p in enumerate(sweep.p_grid):
            writer.writerow([p, sweep.q, sweep.n_trials[i],
                             *sweep.probs[i], *sweep.conf_lo[i], *sweep.conf_hi[i]])
    finally:
        if fh is not None:
            fh.close()


def phase_map_to_csv(pm: PhaseMap, path) -> None:
    writer, fh = _as_csv_writer(path)
    try:
        writer.writerow(["p", "q", "class"] + [f"P_{n}" for n in PATTERN_NAMES])
        for iq, q in enumerate(pm.q_grid):
            for ip, p in enumerate(pm.p_grid):
                writer.writerow([p, q, pm.classes[iq, ip], *pm.probs[iq, ip]])
    finally:
        if fh is not None:
            fh.close()
