"""Finitely supported probability measures on the unit circle.

Angles are measured in turns and live in the half-open window (-1/2, 1/2],
so the point ``exp(2*pi*i*theta)`` has coordinate ``theta``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "MERGE_TOL",
    "CircleMeasure",
    "MomentSequence",
    "normalize_angle",
    "normalize_angles",
    "cis",
    "moments",
    "haar_discretization",
    "haar_discretization_bound",
    "dirac",
    "pushforward",
    "rotate",
    "quantile_angles",
    "quantile_sample",
]

MERGE_TOL = 1e-12
_MASS_TOL = 1e-12
JSON_VERSION = 1


def normalize_angle(x: float) -> float:
    """Reduce ``x`` modulo 1 into (-1/2, 1/2].

    >>> normalize_angle(0.75)
    -0.25
    >>> normalize_angle(-0.5)
    0.5
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"angle must be finite, got {x!r}")
    r = x - math.floor(x + 0.5)
    return 0.5 if r == -0.5 else r


def normalize_angles(x) -> np.ndarray:
    """Vectorized :func:`normalize_angle`."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("angles must be finite")
    r = x - np.floor(x + 0.5)
    return np.where(r == -0.5, 0.5, r)


def cis(turns) -> np.ndarray:
    """``exp(2*pi*i*turns)`` with exact values at quarter turns.

    Snapping the quarter turns keeps symmetric measures (for instance the
    two-point measure on {1, -1}) free of 1e-16 imaginary residue.
    """
    r = normalize_angles(turns)
    out = np.exp(2j * np.pi * r)
    out = np.where(r == 0.0, 1.0 + 0j, out)
    out = np.where(r == 0.5, -1.0 + 0j, out)
    out = np.where(r == 0.25, 1j, out)
    out = np.where(r == -0.25, -1j, out)
    return out


@dataclass(frozen=True, eq=False)
class CircleMeasure:
    """Probability measure with finitely many atoms on the unit circle.

    Construction normalizes angles into (-1/2, 1/2], sorts them, merges atoms
    closer than ``MERGE_TOL`` turns (including across the +-1/2 seam) and drops
    zero weights. The weights must sum to one within 1e-12.

    Parameters
    ----------
    angles : array_like of float
        Atom positions in turns.
    weights : array_like of float, optional
        Nonnegative masses. Equal weights if omitted.
    """

    angles: np.ndarray
    weights: np.ndarray

    def __init__(self, angles, weights=None):
        a = normalize_angles(np.atleast_1d(np.asarray(angles, dtype=float)))
        if a.size == 0:
            raise ValueError("a measure needs at least one atom")
        if weights is None:
            w = np.full(a.size, 1.0 / a.size)
        else:
            w = np.atleast_1d(np.asarray(weights, dtype=float))
            if w.shape != a.shape:
                raise ValueError("angles and weights must have the same length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        total = w.sum()
        if abs(total - 1.0) > _MASS_TOL * max(1, a.size):
            raise ValueError(f"weights sum to {total!r}, expected 1")

        # atoms hugging -1/2 belong to the +1/2 end of the window
        a = np.where(a < -0.5 + MERGE_TOL, 0.5, a)
        order = np.argsort(a, kind="stable")
        a, w = a[order], w[order]
        a, w = _merge_sorted(a, w)
        keep = w > 0
        a, w = a[keep], w[keep]
        if a.size == 0:
            raise ValueError("all weights are zero")
        a.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "weights", w)

    @property
    def n_atoms(self) -> int:
        return int(self.angles.size)

    @property
    def points(self) -> np.ndarray:
        """Atoms as complex numbers on the unit circle."""
        return cis(self.angles)

    def is_equal_weight(self, rtol: float = 1e-9) -> bool:
        return bool(np.allclose(self.weights, 1.0 / self.n_atoms, rtol=rtol, atol=0))

    def allclose(self, other: "CircleMeasure", atol: float = 1e-10) -> bool:
        """Atom-wise comparison after the canonical sort/merge."""
        if self.n_atoms != other.n_atoms:
            return False
        gap = np.abs(normalize_angles(self.angles - other.angles))
        return bool(np.all(gap <= atol) and np.allclose(self.weights, other.weights, rtol=0, atol=atol))

    def to_dict(self) -> dict:
        return {
            "version": JSON_VERSION,
            "atoms": [{"angle": float(a), "weight": float(w)} for a, w in zip(self.angles, self.weights)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "CircleMeasure":
        if data.get("version") != JSON_VERSION:
            raise ValueError(f"unsupported measure version {data.get('version')!r}")
        atoms = data["atoms"]
        return cls([a["angle"] for a in atoms], [a["weight"] for a in atoms])

    @classmethod
    def from_json(cls, text: str) -> "CircleMeasure":
        return cls.from_dict(json.loads(text))

    def __repr__(self) -> str:
        return f"CircleMeasure(n_atoms={self.n_atoms})"


def _merge_sorted(a: np.ndarray, w: np.ndarray):
    if a.size == 1:
        return a.copy(), w.copy()
    new_group = np.empty(a.size, dtype=bool)
    new_group[0] = True
    new_group[1:] = np.diff(a) > MERGE_TOL
    starts = np.flatnonzero(new_group)
    merged_w = np.add.reduceat(w, starts)
    merged_a = a[starts].copy()
    # seam: first group within tolerance of the last one, modulo one turn
    if merged_a.size > 1 and merged_a[0] + 1.0 - a[-1] <= MERGE_TOL:
        merged_w[-1] += merged_w[0]
        merged_a, merged_w = merged_a[1:], merged_w[1:]
    return merged_a, merged_w


@dataclass(frozen=True, eq=False)
class MomentSequence:
    """Moments ``m_k = integral of z**k``, k = 0..order, with ``m_0 = 1``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).copy()
        if v.ndim != 1 or v.size < 2:
            raise ValueError("need m_0 and at least one further moment")
        if v[0] != 1:
            raise ValueError(f"m_0 must be exactly 1, got {v[0]!r}")
        if np.any(np.abs(v) > 1 + 1e-9):
            raise ValueError("moments of a probability measure on the circle have modulus <= 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def order(self) -> int:
        return self.values.size - 1

    def __getitem__(self, k):
        return self.values[k]

    @classmethod
    def from_values(cls, tail) -> "MomentSequence":
        """Build from ``m_1..m_K``; ``m_0`` is prepended."""
        return cls(np.concatenate([[1.0 + 0j], np.asarray(tail, dtype=complex)]))


def moments(mu: CircleMeasure, K: int) -> MomentSequence:
    if int(K) < 1:
        raise ValueError("K must be >= 1")
    k = np.arange(1, int(K) + 1)
    vals = cis(np.outer(k, mu.angles)) @ mu.weights
    return MomentSequence(np.concatenate([[1.0 + 0j], vals]))


def dirac(angle: float = 0.0) -> CircleMeasure:
    return CircleMeasure([angle], [1.0])


def haar_discretization(n: int) -> CircleMeasure:
    """Uniform measure on the ``n``-th roots of unity."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    return CircleMeasure(np.arange(n) / n, np.full(n, 1.0 / n))


def haar_discretization_bound(n: int) -> float:
    """Upper bound on the distance between the n-point grid and Haar measure."""
    return math.pi / n


def pushforward(mu: CircleMeasure, fmap: Callable[[np.ndarray], np.ndarray]) -> CircleMeasure:
    """Image measure under ``fmap``, which acts on arrays of angles in turns."""
    image = np.asarray(fmap(mu.angles.copy()), dtype=float)
    return CircleMeasure(image, mu.weights)


def rotate(mu: CircleMeasure, a: float) -> CircleMeasure:
    return CircleMeasure(mu.angles + a, mu.weights)


def quantile_angles(mu: CircleMeasure, n: int) -> np.ndarray:
    """Angles of the (k+1/2)/n quantiles, k = 0..n-1, with multiplicity.

    The cumulative distribution starts at angle -1/2; mass sitting exactly on
    a quantile level resolves to the lower atom.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    cdf = np.cumsum(mu.weights)
    levels = (np.arange(n) + 0.5) / n
    idx = np.searchsorted(cdf, levels - 1e-12, side="left")
    idx = np.minimum(idx, mu.n_atoms - 1)
    return mu.angles[idx]


def quantile_sample(mu: CircleMeasure, n: int) -> CircleMeasure:
    """Deterministic ``n``-atom equal-weight coarsening of ``mu``."""
    return CircleMeasure(quantile_angles(mu, n))
