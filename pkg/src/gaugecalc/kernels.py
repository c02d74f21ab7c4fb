"""Closed-form integrals of bracketed powers of affine functions."""

from __future__ import annotations

import math

import numpy as np

from .errors import ArgumentError

PARTS = ("abs", "pos", "neg")


def _bracket(g: np.ndarray, part: str) -> np.ndarray:
    if part == "abs":
        return np.abs(g)
    if part == "pos":
        return np.maximum(g, 0.0)
    return np.maximum(-g, 0.0)


def _expm1_ratio(q: float, p: float) -> float:
    """``((1 + q)**p - 1) / (p * q)`` for ``q`` in [-1, 0], stable near 0."""
    if q == 0.0:
        return 1.0
    if q == -1.0:
        return 1.0 / p
    return math.expm1(p * math.log1p(q)) / (p * q)


def affine_power_integral(a: float, b: float, r: float, t0: float, t1: float,
                          part: str = "abs") -> float:
    """``integral_{t0}^{t1} [a + b t]_part ** r dt`` in closed form."""
    if not r >= 1:
        raise ArgumentError(f"r must be >= 1, got {r}")
    if t1 < t0:
        raise ArgumentError("need t0 <= t1")
    if part not in PARTS:
        raise ArgumentError(f"part must be one of {PARTS}")
    if t1 == t0:
        return 0.0
    if b == 0:
        return float(_bracket(np.float64(a), part)) ** r * (t1 - t0)
    root = -a / b
    cuts = [t0, root, t1] if t0 < root < t1 else [t0, t1]
    total = 0.0
    for s0, s1 in zip(cuts, cuts[1:]):
        sign = math.copysign(1.0, a + b * (0.5 * (s0 + s1)))
        if (part == "pos" and sign < 0) or (part == "neg" and sign > 0):
            continue
        g0 = 0.0 if s0 == root else abs(a + b * s0)
        g1 = 0.0 if s1 == root else abs(a + b * s1)
        top = max(g0, g1)
        if top == 0.0:
            continue
        # |g| is linear on [s0, s1] and drops by |b| (s1 - s0) from its top end
        q = max(-abs(b) * (s1 - s0) / top, -1.0)
        total += (s1 - s0) * top**r * _expm1_ratio(q, r + 1)
    return total


def power_antiderivative(w, r: float, part: str):
    """An antiderivative of ``w -> [w]_part ** r`` (elementwise)."""
    w = np.asarray(w, dtype=float)
    if part == "abs":
        return np.sign(w) * np.abs(w) ** (r + 1) / (r + 1)
    if part == "pos":
        return np.maximum(w, 0.0) ** (r + 1) / (r + 1)
    return -np.maximum(-w, 0.0) ** (r + 1) / (r + 1)
