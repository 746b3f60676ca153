import time
from contextlib import contextmanager

import numpy as np


@contextmanager
def timer():
    start = time.perf_counter()
    try:
        yield lambda: (time.perf_counter() - start)
    finally:
        pass


def summarize_timings(state):
    """Return a dict of total time per stage name (seconds) based on 'time' trace events."""
    totals = {}
    for ev in getattr(state, "trace", []):
        if ev.op == "time":
            name = ev.payload.get("name", "unknown")
            dt = ev.payload.get("seconds", 0.0)
            totals[name] = totals.get(name, 0.0) + dt
    overall = next(
        (ev.payload.get("seconds") for ev in state.trace if ev.op == "time_overall"),
        None,
    )
    return {"per_op": totals, "overall": overall}


def derive_seed(master: int, *key: int) -> int:
    """Counter-based 64-bit sub-seed of `master` addressed by an integer key path.

    Stable across platforms and processes; distinct keys give independent streams.
    """
    if master < 0 or any(k < 0 for k in key):
        raise ValueError("seeds and seed keys must be non-negative integers")
    seq = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def wrap_to_pi(x):
    """Map angles to (-pi, pi]; values already in range are returned untouched."""
    x = np.asarray(x, dtype=float)
    inside = (x > -np.pi) & (x <= np.pi)
    wrapped = np.pi - np.mod(np.pi - x, 2.0 * np.pi)
    return np.where(inside, x, wrapped)


# seed stream labels, first key of derive_seed
PLACEMENT = 0
FIELDS = 1
LSF = 2
SWEEP = 3
ACF_CHECK = 4
