"""Quadratic Wasserstein distance between measures on the circle.

The ground cost is the squared chordal distance
``|exp(2 pi i a) - exp(2 pi i b)|**2 = 2 - 2 cos(2 pi (a - b))``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .circle_measure import (
    CircleMeasure,
    haar_discretization,
    haar_discretization_bound,
    moments,
    quantile_sample,
)

__all__ = [
    "DEFAULT_ATOM_CAP",
    "TransportPlan",
    "TransportSizeError",
    "chordal_cost",
    "w2_exact",
    "w2_bruteforce",
    "w2_cyclic",
    "w2_to_delta1",
    "w2_to_haar",
]

DEFAULT_ATOM_CAP = 4096
BRUTEFORCE_MAX_ATOMS = 8


class TransportSizeError(ValueError):
    """Raised when an input is too large for the exact solver."""


def chordal_cost(a, b) -> np.ndarray:
    """Squared chordal distance between angles (broadcasting)."""
    return 2.0 - 2.0 * np.cos(2.0 * np.pi * (np.asarray(a) - np.asarray(b)))


@dataclass(frozen=True)
class TransportPlan:
    """Coupling between two measures; ``pairs`` holds (source, target, mass)."""

    pairs: tuple
    cost: float

    def matrix(self, n_source: int, n_target: int) -> np.ndarray:
        out = np.zeros((n_source, n_target))
        for i, j, m in self.pairs:
            out[i, j] += m
        return out

    def to_dict(self) -> dict:
        return {"pairs": [[int(i), int(j), float(m)] for i, j, m in self.pairs], "cost": float(self.cost)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "TransportPlan":
        return cls(tuple((int(i), int(j), float(m)) for i, j, m in data["pairs"]), float(data["cost"]))


def _common_denominator(weights: np.ndarray, limit: int):
    """Smallest L <= limit with every weight an integer multiple of 1/L, else None."""
    L = 1
    for w in weights:
        f = Fraction(float(w)).limit_denominator(limit)
        if abs(float(f) - w) > 1e-12:
            return None
        L = L * f.denominator // math.gcd(L, f.denominator)
        if L > limit:
            return None
    return L


def _expand(mu: CircleMeasure, L: int):
    counts = np.rint(mu.weights * L).astype(int)
    return np.repeat(mu.angles, counts), np.repeat(np.arange(mu.n_atoms), counts)


def _assignment(a: np.ndarray, b: np.ndarray):
    cost = chordal_cost(a[:, None], b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return rows, cols, cost[rows, cols]


def _plan_from_pairs(src, tgt, mass, cost_fn) -> TransportPlan:
    agg: dict = {}
    for i, j, m in zip(src, tgt, mass):
        key = (int(i), int(j))
        agg[key] = agg.get(key, 0.0) + float(m)
    pairs = tuple((i, j, m) for (i, j), m in sorted(agg.items()))
    cost = float(sum(m * cost_fn(i, j) for i, j, m in pairs))
    return TransportPlan(pairs, max(cost, 0.0))


def w2_exact(mu: CircleMeasure, nu: CircleMeasure, cap: int = DEFAULT_ATOM_CAP):
    """Exact W2 distance and an optimal plan.

    Weights that are multiples of a common 1/L (L <= cap) are refined onto
    the 1/L mass grid and solved as a linear assignment problem; any other
    weights fall back to the transportation linear program.

    Returns
    -------
    distance : float
    plan : TransportPlan
    """
    if mu.n_atoms + nu.n_atoms > cap:
        raise TransportSizeError(
            f"{mu.n_atoms} + {nu.n_atoms} atoms exceed the cap of {cap}; "
            "coarsen the inputs with quantile_sample first"
        )

    def pair_cost(i, j):
        return float(chordal_cost(mu.angles[i], nu.angles[j]))

    L = _common_denominator(np.concatenate([mu.weights, nu.weights]), cap)
    if L is not None:
        a, ia = _expand(mu, L)
        b, ib = _expand(nu, L)
        rows, cols, _ = _assignment(a, b)
        plan = _plan_from_pairs(ia[rows], ib[cols], np.full(rows.size, 1.0 / L), pair_cost)
    else:
        plan = _transport_lp(mu, nu, pair_cost)
    return math.sqrt(plan.cost), plan


def _transport_lp(mu, nu, pair_cost) -> TransportPlan:
    n, m = mu.n_atoms, nu.n_atoms
    c = chordal_cost(mu.angles[:, None], nu.angles[None, :]).ravel()
    a_rows = np.kron(np.eye(n), np.ones((1, m)))
    a_cols = np.kron(np.ones((1, n)), np.eye(m))
    res = linprog(
        c,
        A_eq=np.vstack([a_rows, a_cols]),
        b_eq=np.concatenate([mu.weights, nu.weights]),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    x = res.x.reshape(n, m)
    i, j = np.nonzero(x > 1e-15)
    return _plan_from_pairs(i, j, x[i, j], pair_cost)


def _require_equal_weight(mu: CircleMeasure, nu: CircleMeasure):
    if mu.n_atoms != nu.n_atoms:
        raise ValueError(f"atom counts differ: {mu.n_atoms} vs {nu.n_atoms}")
    if not (mu.is_equal_weight() and nu.is_equal_weight()):
        raise ValueError("inputs must be equal-weight measures")


def w2_bruteforce(mu: CircleMeasure, nu: CircleMeasure) -> float:
    """Minimum over all n! pairings; oracle for :func:`w2_exact`."""
    _require_equal_weight(mu, nu)
    n = mu.n_atoms
    if n > BRUTEFORCE_MAX_ATOMS:
        raise ValueError(f"brute force is limited to {BRUTEFORCE_MAX_ATOMS} atoms, got {n}")
    cost = chordal_cost(mu.angles[:, None], nu.angles[None, :])
    idx = np.arange(n)
    best = min(cost[idx, list(p)].sum() for p in itertools.permutations(range(n)))
    return math.sqrt(max(best / n, 0.0))


def w2_cyclic(mu: CircleMeasure, nu: CircleMeasure, validate: bool = False):
    """Best cyclic shift of the sorted-order pairing.

    Returns ``(distance, matched)``. ``matched`` is None unless ``validate``
    is set, in which case it tells whether the shift pairing reached the
    exact optimum (to 1e-10).
    """
    _require_equal_weight(mu, nu)
    n = mu.n_atoms
    a, b = mu.angles, nu.angles
    shifts = (np.arange(n)[:, None] + np.arange(n)[None, :]) % n
    costs = chordal_cost(a[None, :], b[shifts]).mean(axis=1)
    value = math.sqrt(max(float(costs.min()), 0.0))
    matched = None
    if validate:
        matched = abs(value - w2_exact(mu, nu)[0]) <= 1e-10
    return value, matched


def w2_to_delta1(mu: CircleMeasure) -> float:
    """Closed form: every coupling with a point mass is the product coupling."""
    m1 = moments(mu, 1)[1]
    return math.sqrt(max(2.0 - 2.0 * m1.real, 0.0))


def w2_to_haar(mu: CircleMeasure, grid: int, return_bound: bool = False):
    """Distance to the ``grid``-point Haar discretization.

    ``mu`` is first coarsened to ``grid`` quantile atoms. With
    ``return_bound`` the discretization error bound pi/grid is returned too.
    """
    d, _ = w2_exact(quantile_sample(mu, grid), haar_discretization(grid))
    if return_bound:
        return d, haar_discretization_bound(grid)
    return d

