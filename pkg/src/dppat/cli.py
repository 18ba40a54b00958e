"""Command-line workbench: simulation, labeling, dataset generation,
probability sweeps, phase maps, Bernoulli controls and critical-point
estimation.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

import argparse
import csv
import sys

import numpy as np

from . import store, sweep as sw
from .patterns import load_scheme_file, reference_schemes
from .sim import SimParams, bernoulli_field, simulate
from .store import CorruptRecordError, GenerationSpec
from .sweep import PATTERN_NAMES


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


PRESETS = {
    "desk": {"n": 50, "t": 500, "reals": 256},
    "paper": {"n": 50, "t": 2000, "reals": 1024},
}


def _add_common(p, grids=False):
    p.add_argument("--n", type=int, help="spatial sites (default 50)")
    p.add_argument("--t", type=int, help="time steps (default per preset)")
    p.add_argument("--reals", type=int, help="realizations per grid point")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--scheme-file",
                   help="renormalization scheme override file, or the word "
                        "'reference' for the packaged tuned scheme set")
    p.add_argument("--out", help="output path")
    p.add_argument("--jobs", type=int, default=-1, help="parallel workers")
    if grids:
        p.add_argument("--p-min", type=float, default=0.0)
        p.add_argument("--p-max", type=float, default=1.0)
        p.add_argument("--p-step", type=float, default=0.05)
        p.add_argument("--q-min", type=float, default=0.0)
        p.add_argument("--q-max", type=float, default=1.0)
        p.add_argument("--q-step", type=float, default=0.05)


def _dims(args):
    preset = PRESETS[args.preset]
    n = args.n if args.n is not None else preset["n"]
    t = args.t if args.t is not None else preset["t"]
    reals = getattr(args, "reals", None)
    reals = reals if reals is not None else preset["reals"]
    return n, t, reals


def _schemes(args):
    if not args.scheme_file:
        return None
    if args.scheme_file == "reference":
        return reference_schemes()
    return load_scheme_file(args.scheme_file)


def _grid(lo, hi, step):
    if step <= 0 or hi < lo:
        raise UsageError("invalid grid: need step > 0 and max >= min")
    return np.round(np.arange(lo, hi + step / 2, step), 12)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dppat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one realization -> record file or text")
    _add_common(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--init-density", type=float, default=0.5)

    p = sub.add_parser("label", help="recompute labels for stored records")
    _add_common(p)
    p.add_argument("--data", required=True, help="DPDS data file")

    p = sub.add_parser("gen", help="generate a labeled dataset")
    _add_common(p)
    p.add_argument("--mode", choices=["special-points", "random-points", "test-set"],
                   default="special-points")
    p.add_argument("--points", help="comma list of p:q pairs (special-points)")
    p.add_argument("--n-points", type=int, default=0, help="random point count")
    p.add_argument("--per-point", type=int, default=128)
    p.add_argument("--init-density", type=float, default=0.5)

    p = sub.add_parser("sweep", help="probability sweep over p at fixed q")
    _add_common(p, grids=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--scores", help="NN score table (CSV) instead of simulation")

    p = sub.add_parser("phase-map", help="classify a (p, q) grid")
    _add_common(p, grids=True)
    p.add_argument("--scores", help="NN score table (CSV) instead of simulation")
    p.add_argument("--thresholds", help="pattern=value sidecar file")
    p.add_argument("--png", help="optional raster rendering of the map")

    p = sub.add_parser("bernoulli", help="isotropic negative control sweep")
    _add_common(p, grids=True)

    p = sub.add_parser("crit-est", help="threshold crossings of a sweep CSV")
    p.add_argument("--sweep-csv", required=True)
    p.add_argument("--pattern", required=True, choices=PATTERN_NAMES)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--flank", choices=["exit", "onset", "all"], default="exit")
    p.add_argument("--thresholds", help="pattern=value sidecar file")

    p = sub.add_parser("rebuild-index", help="regenerate a sidecar index")
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="index output path")
    return parser


def _cmd_simulate(args):
    n, t, _ = _dims(args)
    params = SimParams(n, t, args.p, args.q, args.seed, args.init_density)
    field = simulate(params)
    from .patterns import label_field
    target = label_field(field, schemes=_schemes(args))
    if args.out:
        with store.DatasetWriter(args.out) as writer:
            entry = writer.append_record(field, params, target)
        print(f"wrote record at offset {entry.offset} length {entry.length} to {args.out}")
    else:
        arr = field.to_bool()
        for t_row in range(min(arr.shape[0], 40)):
            print("".join("#" if b else "." for b in arr[t_row]))
        if arr.shape[0] > 40:
            print(f"... ({arr.shape[0]} rows total)")
    print("label:", ",".join(f"{n_}={int(b)}" for n_, b in
                             zip(PATTERN_NAMES, target.as_tuple())))


def _cmd_label(args):
    from .patterns import label_field
    schemes = _schemes(args)
    writer = csv.writer(sys.stdout)
    writer.writerow(["record", "p", "q", "seed", *PATTERN_NAMES])
    for i, (entry, field, params, _stored) in enumerate(store.iter_records(args.data)):
        target = label_field(field, schemes=schemes)
        writer.writerow([i, params.p, params.q, params.seed,
                         *(int(b) for b in target.as_tuple())])


def _parse_points(text):
    pts = []
    for tok in text.split(","):
        p_, _, q_ = tok.strip().partition(":")
        pts.append((float(p_), float(q_)))
    return pts


def _cmd_gen(args):
    if not args.out:
        raise UsageError("gen requires --out")
    n, t, _ = _dims(args)
    spec = GenerationSpec(
        mode=args.mode,
        systems_per_point=args.per_point,
        n_sites=n,
        n_steps=t,
        master_seed=args.seed,
        points=tuple(_parse_points(args.points)) if args.points else (),
        n_points=args.n_points,
        init_density=args.init_density,
    )
    store.generate(spec, args.out, schemes=_schemes(args))
    print(f"dataset written to {args.out}")


def _cmd_sweep(args):
    n, t, reals = _dims(args)
    p_grid = _grid(args.p_min, args.p_max, args.p_step)
    if args.scores:
        rows = sw.read_score_table(args.scores)
        result = sw.sweep_from_scores(args.q, rows)
    else:
        result = sw.sweep_fixed_q(args.q, p_grid, reals, n, t,
                                  master_seed=args.seed, schemes=_schemes(args),
                                  n_jobs=args.jobs)
    if args.out:
        sw.sweep_to_csv(result, args.out)
        print(f"sweep written to {args.out}")
    else:
        sw.sweep_to_csv(result, sys.stdout)


def _cmd_phase_map(args):
    thresholds = sw.read_thresholds(args.thresholds) if args.thresholds else None
    if args.scores:
        rows = sw.read_score_table(args.scores)
        points = sorted({(r["p"], r["q"]) for r in rows})
        p_grid = sorted({p for p, _ in points})
        q_grid = sorted({q for _, q in points})
        probs = np.zeros((len(q_grid), len(p_grid), 6))
        for iq, qv in enumerate(q_grid):
            for ip, pv in enumerate(p_grid):
                cell = [[r[nme] for nme in PATTERN_NAMES] for r in rows
                        if r["p"] == pv and r["q"] == qv]
                if not cell:
                    raise CorruptRecordError(
                        f"score table missing grid cell p={pv} q={qv}")
                probs[iq, ip] = np.mean(cell, axis=0)
        pm = sw.classify_map(np.array(p_grid), np.array(q_grid), probs, thresholds)
    else:
        n, t, reals = _dims(args)
        pm = sw.phase_map(_grid(args.p_min, args.p_max, args.p_step),
                          _grid(args.q_min, args.q_max, args.q_step),
                          reals, n, t, master_seed=args.seed,
                          thresholds=thresholds, schemes=_schemes(args),
                          n_jobs=args.jobs)
    if args.out:
        sw.phase_map_to_csv(pm, args.out)
        print(f"phase map written to {args.out}")
    else:
        sw.phase_map_to_csv(pm, sys.stdout)
    if args.png:
        _render_phase_map(pm, args.png)
        print(f"raster written to {args.png}")


def _render_phase_map(pm, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    order = ["A", "percolating", "PL", "Qplus", "Dplus", "Q", "D"]
    codes = np.vectorize(order.index)(pm.classes)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.pcolormesh(pm.p_grid, pm.q_grid, codes, cmap="tab10",
                       vmin=-0.5, vmax=9.5, shading="nearest")
    cbar = fig.colorbar(im, ticks=range(len(order)))
    cbar.ax.set_yticklabels(order)
    ax.set_xlabel("p")
    ax.set_ylabel("q")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _cmd_bernoulli(args):
    n, t, reals = _dims(args)
    pb_grid = _grid(args.p_min, args.p_max, args.p_step)
    result = sw.bernoulli_control(pb_grid, reals, n, t, master_seed=args.seed,
                                  schemes=_schemes(args), n_jobs=args.jobs)
    if args.out:
        sw.sweep_to_csv(result, args.out)
        print(f"control sweep written to {args.out}")
    else:
        sw.sweep_to_csv(result, sys.stdout)


def _read_sweep_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise CorruptRecordError(f"{path}: empty sweep table")
    p_grid = np.array([float(r["p"]) for r in rows])
    q = float(rows[0]["q"]) if rows[0]["q"] not in ("", "nan") else float("nan")
    probs = np.array([[float(r[f"P_{n}"]) for n in PATTERN_NAMES] for r in rows])
    n_trials = np.array([int(r["n_trials"]) for r in rows])
    lo = np.array([[float(r[f"lo_{n}"]) for n in PATTERN_NAMES] for r in rows])
    hi = np.array([[float(r[f"hi_{n}"]) for n in PATTERN_NAMES] for r in rows])
    return sw.SweepResult(q, p_grid, probs, n_trials, lo, hi, "deterministic-labels")


def _cmd_crit_est(args):
    result = _read_sweep_csv(args.sweep_csv)
    threshold = args.threshold
    if args.thresholds:
        threshold = sw.read_thresholds(args.thresholds).get(args.pattern, threshold)
    if args.flank == "exit":
        ests = [sw.exit_crossing(result, args.pattern, threshold)]
    elif args.flank == "onset":
        ests = [sw.onset_crossing(result, args.pattern, threshold)]
    else:
        ests = sw.estimate_crossing(result, args.pattern, threshold)
    ests = [e for e in ests if e is not None]
    if not ests:
        print(f"no {args.flank} crossing of {args.pattern} at threshold {threshold}")
        return
    for e in ests:
        flank = "rising" if e.rising else "falling"
        print(f"{e.pattern} q={e.q} p_c={e.p_c:.6f} threshold={e.threshold} "
              f"bracket=[{e.bracket[0]},{e.bracket[1]}] flank={flank}")


def _cmd_rebuild_index(args):
    entries = store.rebuild_index(args.data, args.out)
    print(f"rebuilt index with {len(entries)} entries")


_COMMANDS = {
    "simulate": _cmd_simulate,
    "label": _cmd_label,
    "gen": _cmd_gen,
    "sweep": _cmd_sweep,
    "phase-map": _cmd_phase_map,
    "bernoulli": _cmd_bernoulli,
    "crit-est": _cmd_crit_est,
    "rebuild-index": _cmd_rebuild_index,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (CorruptRecordError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
