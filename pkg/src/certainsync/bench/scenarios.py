"""Set-pair generators for the two overlap scenarios."""

from __future__ import annotations

import numpy as np

from ..errors import SizesExceedUniverse


def gen_superset_scenario(n: int, d: int, rng: np.random.Generator):
    """Receiver holds the whole universe ``[1, n]``; the sender lacks ``d`` random elements.

    Returns ``(s1, s2)`` as sorted int64 arrays.
    """
    if not 0 <= d <= n:
        raise SizesExceedUniverse(f"cannot remove {d} elements from a universe of {n}")
    s2 = np.arange(1, n + 1, dtype=np.int64)
    removed = rng.choice(n, size=d, replace=False)
    keep = np.ones(n, dtype=bool)
    keep[removed] = False
    return s2[keep], s2


def gen_general_scenario(n: int, a_only: int, b_only: int, shared: int, rng: np.random.Generator):
    """Two sets with ``shared`` common elements and the given exclusive counts."""
    total = a_only + b_only + shared
    if min(a_only, b_only, shared) < 0 or total > n:
        raise SizesExceedUniverse(f"{a_only}+{b_only}+{shared} elements do not fit in [1, {n}]")
    picked = rng.choice(n, size=total, replace=False).astype(np.int64) + 1
    a = picked[:a_only]
    b = picked[a_only:a_only + b_only]
    common = picked[a_only + b_only:]
    return np.sort(np.concatenate([a, common])), np.sort(np.concatenate([b, common]))
