"""Sample generators for non-Gaussian planar densities used in the demos."""

from __future__ import annotations

import numpy as np

# Letter "T" inside [0, 5]^2: a 5 x 1 top bar over a 1 x 4 stem.
T_SHAPE = ((0.0, 5.0, 4.0, 5.0), (2.0, 3.0, 0.0, 4.0))


def uniform_box(count: int, low=(0.0, 0.0), high=(5.0, 5.0), seed=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)
    return low + (high - low) * rng.random((count, low.size))


def uniform_rectangles(count: int, rects, seed=None) -> np.ndarray:
    """Uniform samples over a union of disjoint axis-aligned ``(x0, x1, y0, y1)`` rectangles."""
    rng = np.random.default_rng(seed)
    rects = np.asarray(rects, dtype=float)
    areas = (rects[:, 1] - rects[:, 0]) * (rects[:, 3] - rects[:, 2])
    which = rng.choice(len(rects), size=count, p=areas / areas.sum())
    u = rng.random((count, 2))
    lo = rects[which][:, [0, 2]]
    span = rects[which][:, [1, 3]] - lo
    return lo + span * u


def letter_t(count: int, seed=None, offset=(0.0, 0.0)) -> np.ndarray:
    return uniform_rectangles(count, T_SHAPE, seed) + np.asarray(offset, dtype=float)
