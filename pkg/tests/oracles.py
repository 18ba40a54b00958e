"""Independent brute-force oracles used to check the fast implementations.

These deliberately avoid union-find and any code under test: spanning is
plain breadth-first reachability, site survival is an explicit directed
path search over the three possible parents.
"""

from collections import deque

import numpy as np


def spans_bfs(active, offsets, periodic):
    """Reachability from the first to the last time row over active cells.

    active: (nt, ns) Boolean; offsets: iterable of (d_space, d_time);
    periodic wraps the space coordinate.
    """
    active = np.asarray(active, dtype=bool)
    nt, ns = active.shape
    seen = np.zeros_like(active)
    queue = deque()
    for s in range(ns):
        if active[0, s]:
            seen[0, s] = True
            queue.append((0, s))
    while queue:
        t, s = queue.popleft()
        if t == nt - 1:
            return True
        for ds, dt in offsets:
            t2 = t + dt
            if t2 < 0 or t2 >= nt:
                continue
            s2 = s + ds
            if periodic:
                s2 %= ns
            elif s2 < 0 or s2 >= ns:
                continue
            if active[t2, s2] and not seen[t2, s2]:
                seen[t2, s2] = True
                queue.append((t2, s2))
    return False


def directed_path_exists(field):
    """True iff an occupied directed path (parents i-1, i, i+1 mod N)
    runs from row 0 to the last row."""
    field = np.asarray(field, dtype=bool)
    reachable = field[0].copy()
    n = field.shape[1]
    for t in range(1, field.shape[0]):
        feeds = reachable | np.roll(reachable, 1) | np.roll(reachable, -1)
        reachable = field[t] & feeds
        if not reachable.any():
            return False
    return True
