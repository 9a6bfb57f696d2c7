from __future__ import annotations

from collections import defaultdict

import numpy as np

DEFAULT_RATIOS = (0.8, 0.1, 0.1)


def _allocate(n: int, ratios) -> list[int]:
    """Largest-remainder apportionment of ``n`` items."""
    raw = [n * r for r in ratios]
    counts = [int(np.floor(x)) for x in raw]
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def split_events(events, ratios=DEFAULT_RATIOS, seed: int = 0):
    """Stratified (by activity) deterministic train/val/test split.

    Per-activity counts are apportioned first, then the global total is
    corrected so split sizes match ``ratios`` over the whole set.
    """
    events = list(events)
    if not events:
        raise ValueError("cannot split an empty event set")
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    ids = [ev.event_id for ev in events]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate event_id in event set")

    rng = np.random.default_rng(seed)
    by_act = defaultdict(list)
    for i, ev in enumerate(events):
        by_act[ev.activity].append(i)

    target = _allocate(len(events), ratios)
    groups = []
    for act in sorted(by_act):
        idx = np.array(by_act[act])
        rng.shuffle(idx)
        raw = [len(idx) * r for r in ratios]
        groups.append([idx, raw, [int(np.floor(x)) for x in raw]])

    # hand out leftover slots per split, largest fractional remainder first
    for s in range(3):
        need = target[s] - sum(g[2][s] for g in groups)
        cand = sorted(
            (i for i, g in enumerate(groups) if sum(g[2]) < len(g[0])),
            key=lambda i: (-(groups[i][1][s] - groups[i][2][s]), i),
        )
        for i in cand[:need]:
            groups[i][2][s] += 1
    # any still-unassigned events (rounding collisions) go to the split furthest below target
    for g in groups:
        while sum(g[2]) < len(g[0]):
            deficits = [target[s] - sum(h[2][s] for h in groups) for s in range(3)]
            g[2][int(np.argmax(deficits))] += 1

    out = ([], [], [])
    for idx, _, counts in groups:
        a, b = counts[0], counts[0] + counts[1]
        for s, part in enumerate((idx[:a], idx[a:b], idx[b:])):
            out[s].extend(int(i) for i in part)
    return tuple([events[i] for i in sorted(part)] for part in out)


def subsample(events, fraction: float, seed: int = 0):
    """Seeded subset of ``round(fraction * len(events))`` events, original order kept."""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    events = list(events)
    n = int(round(fraction * len(events)))
    if n == len(events):
        return events
    keep = np.sort(np.random.default_rng(seed).choice(len(events), size=n, replace=False))
    return [events[i] for i in keep]
