"""Straight-through clipping: clipped forward values, identity backward.

The forward value is exactly clip(x); the backward rule treats the clip as the
identity so constrained parameters keep receiving gradient outside their range
(and can be pulled back in). Hard-clip mode zeroes the gradient wherever the
constraint is active, which is what plain clipping would do.
"""

from __future__ import annotations

import numpy as np

MODE_STE = "ste"
MODE_CLIP = "clip"
MODE_STATIC = "static"


def clip_ste(x: np.ndarray | float, lo: float, hi: float) -> np.ndarray | float:
    """Forward of the straight-through clip; bitwise equal to np.clip."""
    if lo > hi:
        raise ValueError(f"clip bounds inverted: lo={lo} > hi={hi}")
    return np.clip(x, lo, hi)


def clip_ste_grad(
    x: np.ndarray, lo: float | np.ndarray, hi: float | np.ndarray, mode: str = MODE_STE
) -> np.ndarray:
    """Multiplier applied to the incoming gradient (1 = pass-through)."""
    if mode == MODE_STE:
        return np.ones_like(x)
    if mode == MODE_CLIP:
        return ((x >= lo) & (x <= hi)).astype(x.dtype)
    raise ValueError(f"unknown clip mode {mode!r}")


def project_simplex(b: np.ndarray) -> np.ndarray:
    """Clamp (b1, b2) to [0, 1] per coordinate, then rescale if b1 + b2 > 1.

    Forward of the constrained barycentric parameterization; rows land in the
    simplex {b1, b2 >= 0, b1 + b2 <= 1}.
    """
    c = np.clip(b, 0.0, 1.0)
    s = c.sum(axis=-1, keepdims=True)
    scale = np.where(s > 1.0, 1.0 / np.maximum(s, 1e-12), 1.0)
    return c * scale


def project_simplex_grad(b: np.ndarray, mode: str = MODE_STE) -> np.ndarray:
    """Per-coordinate gradient multiplier for the simplex projection.

    STE passes gradients straight through the whole projection composite.
    Hard clip zeroes coordinates whose clamp is active, and both coordinates
    when the renormalization is active.
    """
    if mode == MODE_STE:
        return np.ones_like(b)
    if mode == MODE_CLIP:
        inside = (b >= 0.0) & (b <= 1.0)
        c = np.clip(b, 0.0, 1.0)
        renorm = c.sum(axis=-1, keepdims=True) > 1.0
        return (inside & ~renorm).astype(b.dtype)
    raise ValueError(f"unknown clip mode {mode!r}")
