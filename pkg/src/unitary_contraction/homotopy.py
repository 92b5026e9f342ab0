"""Two-stage contraction of unitaries toward the identity.

Stage one randomizes: ``h(t, u) = u w_t`` where ``w_t`` runs through a ladder
of generators, ``w_{m+s} = V_0 ... V_{m-1} exp(pi i s X_m)``. The spectrum of
``h(t, u)`` is pushed toward the uniform measure.

Stage two deforms by functional calculus with the circle map
``f_t(x) = x |2x|**t`` (angles in turns), which drags spectral mass to 1.
The composite ``g_{s(t)}(h(t, u))`` uses the schedule
``s(t) = min(d**-0.5, t)``, where ``d`` is the current distance to Haar.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .circle_measure import CircleMeasure, cis
from .free_conv import freeness_defect
from .matrix_model import (
    HermitianGenerator,
    check_seed,
    check_unitary,
    eigen_angles,
    functional_calculus,
    principal_log_generator,
    reunitarize,
    sample_haar_unitary,
    spectral_measure,
    two_norm,
)
from .transport import chordal_cost, w2_to_haar

__all__ = [
    "DEFAULT_T_GRID",
    "StageLadder",
    "HomotopyTrace",
    "TraceSample",
    "Lemma32Bound",
    "f_map",
    "g_deform",
    "lemma32_bound",
    "paper_tail",
    "corrected_tail",
    "g_lipschitz_findings",
    "build_ladder",
    "h_path",
    "schedule_s",
    "contract",
]

DEFAULT_T_GRID = tuple(np.round(np.arange(0, 6.0001, 0.25), 10))
_REUNITARIZE_EVERY = 8


def f_map(t: float, x):
    """``x |2x|**t`` on angles in (-1/2, 1/2]; fixes 0 and 1/2."""
    if t < 0:
        raise ValueError("t must be >= 0")
    x = np.asarray(x, dtype=float)
    return x * np.abs(2.0 * x) ** t


def g_deform(U: np.ndarray, t: float) -> np.ndarray:
    """Functional calculus of ``U`` with the circle map ``f_t``."""
    return functional_calculus(U, lambda x: f_map(t, x))


def paper_tail(t: float) -> float:
    return math.sqrt(math.pi / (2 * (t + 1)))


def corrected_tail(t: float) -> float:
    """``pi / sqrt(2t + 3)``, from ``|exp(i a) - 1| <= |a|`` and the exact integral of ``f_t**2``."""
    return math.pi / math.sqrt(2 * t + 3)


class Lemma32Bound(NamedTuple):
    lhs: float
    rhs_paper: float
    rhs_corrected: float


def lemma32_bound(U: np.ndarray, t: float, grid: int) -> Lemma32Bound:
    """``||g_t(U) - 1||_2`` against both forms of its upper bound."""
    lhs = two_norm(g_deform(U, t) - np.eye(U.shape[0]))
    d = w2_to_haar(spectral_measure(U), grid)
    return Lemma32Bound(lhs, (2 * t + 1) * d + paper_tail(t), (2 * t + 1) * d + corrected_tail(t))


def g_lipschitz_findings(t: float, a, b, slack: float = 1e-9) -> np.ndarray:
    """Indices of angle pairs where ``g_t`` stretches chords by more than ``2t + 1``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    before = np.sqrt(chordal_cost(a, b))
    after = np.sqrt(chordal_cost(f_map(t, a), f_map(t, b)))
    return np.flatnonzero(after > (2 * t + 1) * before + slack)


@dataclass(frozen=True, eq=False)
class StageLadder:
    """Generators ``X_0, X_1, ...`` shared by every input of an experiment.

    ``prefix[m]`` caches ``V_0 ... V_{m-1}`` with ``V_j = exp(pi i X_j)``.
    In adaptive mode ``defects[m]`` is the accepted candidate's worst freeness
    defect against the probes, and ``flagged[m]`` marks stages whose retry cap
    ran out before the target was met.
    """

    generators: tuple
    dim: int
    seed: int
    prefix: tuple = field(repr=False)
    defects: tuple = ()
    flagged: tuple = ()
    attempts: tuple = ()

    @property
    def stages(self) -> int:
        return len(self.generators)


def _stage_generator(N: int, seed: int, m: int, attempt: int) -> HermitianGenerator:
    return principal_log_generator(sample_haar_unitary(N, seed, m, attempt, stream="ladder"))


def build_ladder(
    N: int,
    stages: int,
    seed: int,
    *,
    probes: Sequence[np.ndarray] | None = None,
    target: float = 0.1,
    max_length: int = 4,
    max_power: int = 3,
    max_retries: int = 3,
) -> StageLadder:
    """Sample one Haar generator per stage.

    With ``probes`` given, a candidate for stage ``m`` is kept only if its
    unitary passes :func:`freeness_defect` below ``target`` against every
    probe's current position ``u_j w_m``; otherwise it is resampled, up to
    ``max_retries`` extra draws. When retries run out the best candidate is
    kept and the stage is flagged.
    """
    N, stages, seed = int(N), int(stages), check_seed(seed)
    if stages < 1:
        raise ValueError("stages must be >= 1")
    gens, prefix, defects, flagged, attempts = [], [np.eye(N, dtype=complex)], [], [], []
    for m in range(stages):
        if probes is None:
            gens.append(_stage_generator(N, seed, m, 0))
        else:
            best = None
            for attempt in range(max_retries + 1):
                X = _stage_generator(N, seed, m, attempt)
                V = X.exp_pi_i(1.0)
                worst = max(
                    freeness_defect(u @ prefix[-1], V, max_length, max_power).max_defect for u in probes
                )
                if best is None or worst < best[0]:
                    best = (worst, X, attempt)
                if worst <= target:
                    break
            defects.append(best[0])
            flagged.append(best[0] > target)
            attempts.append(best[2])
            gens.append(best[1])
        P = prefix[-1] @ gens[-1].exp_pi_i(1.0)
        if (m + 1) % _REUNITARIZE_EVERY == 0:
            P = reunitarize(P, force=True)
        prefix.append(P)
    return StageLadder(tuple(gens), N, seed, tuple(prefix), tuple(defects), tuple(flagged), tuple(attempts))


def _w(ladder: StageLadder, t: float) -> np.ndarray:
    if t < 0 or t > ladder.stages + 1e-12:
        raise ValueError(f"t={t} outside [0, {ladder.stages}] for this ladder")
    m = min(int(math.floor(t)), ladder.stages)
    s = t - m
    if s <= 0:
        return ladder.prefix[m]
    return ladder.prefix[m] @ ladder.generators[m].exp_pi_i(s)


def h_path(ladder: StageLadder, u: np.ndarray, t: float) -> np.ndarray:
    """``u w_t``: the randomizing homotopy at time ``t``."""
    if u.shape != (ladder.dim, ladder.dim):
        raise ValueError(f"input has shape {u.shape}, ladder dimension is {ladder.dim}")
    return u @ _w(ladder, t)


def schedule_s(t: float, dist_to_haar: float) -> float:
    """``min(d**-0.5, t)``, reading ``0**-0.5`` as infinity."""
    if dist_to_haar < 0:
        raise ValueError("distance must be >= 0")
    if dist_to_haar == 0:
        return float(t)
    return float(min(dist_to_haar ** -0.5, t))


class TraceSample(NamedTuple):
    t: float
    dist_to_haar: float
    norm_to_identity: float
    schedule_s: float


@dataclass
class HomotopyTrace:
    samples: list
    N: int
    seed: int
    grid: int
    label: str = ""

    CSV_HEADER = ("t", "dist_to_haar", "norm_to_identity", "schedule_s")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])

    def at(self, t: float) -> TraceSample:
        for s in self.samples:
            if abs(s.t - t) < 1e-12:
                return s
        raise KeyError(t)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_HEADER)
        for s in self.samples:
            writer.writerow([repr(float(v)) for v in s])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "metadata": {"N": self.N, "seed": self.seed, "grid": self.grid, "label": self.label},
            "samples": [s._asdict() for s in self.samples],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "HomotopyTrace":
        meta = data["metadata"]
        samples = [TraceSample(**s) for s in data["samples"]]
        return cls(samples, meta["N"], meta["seed"], meta["grid"], meta.get("label", ""))


def contract(
    ladder: StageLadder,
    u: np.ndarray,
    t_grid: Sequence[float] = DEFAULT_T_GRID,
    grid: int | None = None,
    label: str = "",
) -> HomotopyTrace:
    """Record ``(t, d, ||g_s(h(t, u)) - 1||_2, s)`` along ``t_grid``.

    The norm is evaluated from the spectrum of ``h(t, u)``: for a normal
    matrix, ``||g(H) - 1||_2**2 = 2 - 2 Re tau(g(H))``, which only needs the
    eigenvalues.
    """
    u = check_unitary(u)
    grid = ladder.dim if grid is None else int(grid)
    ts = [float(t) for t in t_grid]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("t_grid must be strictly increasing")
    samples = []
    for t in ts:
        theta = eigen_angles(h_path(ladder, u, t))
        d = w2_to_haar(CircleMeasure(theta), grid)
        s = schedule_s(t, d)
        m1 = np.mean(cis(f_map(s, theta))).real
        norm = math.sqrt(max(2.0 - 2.0 * m1, 0.0))
        samples.append(TraceSample(t, float(d), norm, s))
    return HomotopyTrace(samples, ladder.dim, ladder.seed, grid, label)
