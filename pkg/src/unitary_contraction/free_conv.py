"""Free multiplicative convolution of circle measures.

Two independent routes are provided:

* :func:`boxtimes_moments` computes moments of ``uv`` for free ``u, v`` from
  the moments of each factor alone, using only the defining property of
  freeness (alternating products of centered elements have trace zero).
* :func:`boxtimes_sampled` realizes approximately free unitaries as
  ``A`` and ``Q B Q*`` with ``Q`` Haar-distributed.

Centering algebra
-----------------
Write ``c_p = x**p - alpha_p`` for the centered power of a letter ``x`` with
``alpha_p = tau(x**p)``. Products of same-algebra letters reduce by

    c_a x_p = c_{a+p} - alpha_a c_p + (alpha_{a+p} - alpha_a alpha_p)
    c_a c_b = c_{a+b} - alpha_a c_b - alpha_b c_a + (alpha_{a+b} - alpha_a alpha_b)

so every word expands into alternating words of centered letters. Such a
word has trace zero unless its two ends come from the same algebra, in
which case traciality lets the ends merge and the word gets shorter.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .circle_measure import CircleMeasure, MomentSequence, quantile_angles
from .matrix_model import normalized_trace, sample_haar_unitary, spectral_measure
from .transport import chordal_cost, w2_exact

__all__ = [
    "LEFT",
    "RIGHT",
    "DEFAULT_MOMENT_CAP",
    "AlternatingWord",
    "FreenessDefect",
    "ContractionCheck",
    "trace_of_word",
    "boxtimes_moments",
    "boxtimes_sampled",
    "boxtimes_sampled_moments",
    "freeness_defect",
    "w2_contraction_check",
]

LEFT, RIGHT = 0, 1
DEFAULT_MOMENT_CAP = 10
DEFAULT_DEFECT_BUDGET = 64
_TAG_NAMES = {LEFT: "U", RIGHT: "V"}


@dataclass(frozen=True)
class AlternatingWord:
    """Word in powers of two algebras; ``letters`` holds ``(tag, power)``."""

    letters: tuple

    def __post_init__(self):
        merged: list = []
        for tag, power in self.letters:
            if tag not in (LEFT, RIGHT):
                raise ValueError(f"unknown tag {tag!r}")
            if int(power) < 1:
                raise ValueError("powers must be >= 1")
            if merged and merged[-1][0] == tag:
                merged[-1] = (tag, merged[-1][1] + int(power))
            else:
                merged.append((tag, int(power)))
        object.__setattr__(self, "letters", tuple(merged))

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return " ".join(f"{_TAG_NAMES[t]}^{p}" if p > 1 else _TAG_NAMES[t] for t, p in self.letters)

    def power(self, tag: int) -> int:
        return sum(p for t, p in self.letters if t == tag)

    @classmethod
    def product_power(cls, k: int) -> "AlternatingWord":
        """The word ``(UV)^k``."""
        return cls(((LEFT, 1), (RIGHT, 1)) * int(k))


class FreenessDefect(NamedTuple):
    max_defect: float
    worst_word: AlternatingWord
    max_length: int


class ContractionCheck(NamedTuple):
    lhs: float
    rhs: float
    coupling_bound: float


def _moment_table(m: MomentSequence, need: int) -> np.ndarray:
    if m.order < need:
        raise ValueError(f"moment sequence of order {m.order} is too short, need {need}")
    return np.asarray(m.values[: need + 1], dtype=complex)


def _make_tracer(a: np.ndarray, b: np.ndarray):
    """Return ``tau`` of words, closed over the moment tables of both letters."""
    alpha = (a, b)

    @lru_cache(maxsize=None)
    def centered(seq: tuple) -> complex:
        # seq: alternating centered letters, read cyclically
        if not seq:
            return 1.0 + 0j
        if len(seq) == 1 or seq[0][0] != seq[-1][0]:
            return 0j
        # Rotate the last letter to the front and merge it with the first.
        # Of the four terms of c_p c_q, the three that keep a centered letter
        # leave a cyclically alternating word, so only the scalar survives.
        tag, q = seq[0]
        p = seq[-1][1]
        al = alpha[tag]
        scalar = al[p + q] - al[p] * al[q]
        if scalar == 0:
            return 0j
        return scalar * centered(seq[1:-1])

    def trace(word: AlternatingWord) -> complex:
        states: dict = {(): 1.0 + 0j}
        for tag, p in word.letters:
            al = alpha[tag]
            nxt: dict = {}

            def add(key, coef):
                if coef != 0:
                    nxt[key] = nxt.get(key, 0j) + coef

            for seq, coef in states.items():
                if seq and seq[-1][0] == tag:
                    a_ = seq[-1][1]
                    pre = seq[:-1]
                    add(pre + ((tag, a_ + p),), coef)
                    add(pre + ((tag, p),), -coef * al[a_])
                    add(pre, coef * (al[a_ + p] - al[a_] * al[p]))
                else:
                    add(seq, coef * al[p])
                    add(seq + ((tag, p),), coef)
            states = nxt
        return sum((coef * centered(seq) for seq, coef in states.items()), 0j)

    return trace


def trace_of_word(word: AlternatingWord, mu_m: MomentSequence, nu_m: MomentSequence) -> complex:
    """Trace of a word in free unitaries ``U ~ mu`` and ``V ~ nu``."""
    a = _moment_table(mu_m, word.power(LEFT))
    b = _moment_table(nu_m, word.power(RIGHT))
    return _make_tracer(a, b)(word)


def boxtimes_moments(
    mu_m: MomentSequence, nu_m: MomentSequence, K: int, cap: int = DEFAULT_MOMENT_CAP
) -> MomentSequence:
    """Moments ``m_0..m_K`` of the free multiplicative convolution.

    Only ``m_1..m_K`` of each input are read. The number of intermediate
    words grows exponentially with ``K``, hence the ``cap``.
    """
    K = int(K)
    if K < 1:
        raise ValueError("K must be >= 1")
    if K > cap:
        raise ValueError(
            f"K={K} exceeds the cap of {cap}: the expansion of (UV)^K visits "
            "exponentially many centered words; raise `cap` deliberately if needed"
        )
    trace = _make_tracer(_moment_table(mu_m, K), _moment_table(nu_m, K))
    vals = [trace(AlternatingWord.product_power(k)) for k in range(1, K + 1)]
    return MomentSequence.from_values(vals)


def _sampled_product(mu: CircleMeasure, nu: CircleMeasure, N: int, seed: int) -> np.ndarray:
    N = int(N)
    if N < 2:
        raise ValueError("N must be >= 2")
    Q = _haar(N, seed)
    a = np.exp(2j * np.pi * quantile_angles(mu, N))
    b = np.exp(2j * np.pi * quantile_angles(nu, N))
    return a[:, None] * ((Q * b) @ Q.conj().T)


@lru_cache(maxsize=2)
def _haar(N: int, seed: int) -> np.ndarray:
    # one conjugator per (N, seed); read-only because it is shared between calls
    Q = sample_haar_unitary(N, seed, stream="sampler")
    Q.setflags(write=False)
    return Q


def boxtimes_sampled(mu: CircleMeasure, nu: CircleMeasure, N: int, seed: int) -> CircleMeasure:
    """Spectral measure of ``A Q B Q*`` with quantile spectra and Haar ``Q``."""
    return spectral_measure(_sampled_product(mu, nu, N, seed))


def boxtimes_sampled_moments(mu: CircleMeasure, nu: CircleMeasure, N: int, seed: int, K: int) -> MomentSequence:
    """Moments of :func:`boxtimes_sampled` from traces of powers.

    Same sample as :func:`boxtimes_sampled` for equal ``(N, seed)``, but skips
    the eigensolver: ``m_k = tau(W**k)``.
    """
    W = _sampled_product(mu, nu, N, seed)
    return MomentSequence.from_values(_trace_powers(W, int(K)))


def _trace_powers(W: np.ndarray, K: int) -> list:
    n = W.shape[0]
    powers = [None, W]
    out = [normalized_trace(W)]
    for k in range(2, K + 1):
        # tau(W^k) = sum(W^i * (W^j)^T) / n with i + j = k, i = ceil(k / 2)
        i, j = (k + 1) // 2, k // 2
        while len(powers) <= i:
            powers.append(powers[-1] @ W)
        out.append(complex(np.sum(powers[i] * powers[j].T)) / n)
    return out


def freeness_defect(
    U: np.ndarray,
    V: np.ndarray,
    max_length: int,
    max_power: int,
    budget: int = DEFAULT_DEFECT_BUDGET,
) -> FreenessDefect:
    """Largest ``|tau|`` of an alternating product of centered powers of U and V."""
    if U.shape != V.shape:
        raise ValueError("U and V must have the same shape")
    max_length, max_power = int(max_length), int(max_power)
    if max_length < 1 or max_power < 1:
        raise ValueError("max_length and max_power must be >= 1")
    if max_length * max_power > budget:
        raise ValueError(f"max_length * max_power = {max_length * max_power} exceeds the budget of {budget}")
    n = U.shape[0]
    eye = np.eye(n)
    centered = {}
    for tag, X in ((LEFT, U), (RIGHT, V)):
        P = np.eye(n, dtype=complex)
        for p in range(1, max_power + 1):
            P = P @ X
            centered[tag, p] = P - normalized_trace(P) * eye

    best = (-1.0, None)

    def visit(M, letters):
        nonlocal best
        tag = 1 - letters[-1][0]
        last = len(letters) + 1 == max_length
        for p in range(1, max_power + 1):
            C = centered[tag, p]
            word = letters + ((tag, p),)
            if last:
                val = abs(complex(np.sum(M * C.T)) / n)
            else:
                prod = M @ C
                val = abs(normalized_trace(prod))
                visit(prod, word)
            if val > best[0]:
                best = (val, word)

    for tag in (LEFT, RIGHT):
        for p in range(1, max_power + 1):
            M = centered[tag, p]
            val = abs(normalized_trace(M))
            if val > best[0]:
                best = (val, ((tag, p),))
            if max_length > 1:
                visit(M, ((tag, p),))
    return FreenessDefect(float(best[0]), AlternatingWord(best[1]), max_length)


def w2_contraction_check(
    mu1: CircleMeasure, mu2: CircleMeasure, nu: CircleMeasure, N: int, seed: int
) -> ContractionCheck:
    """Both sides of ``d(mu1 [x] nu, mu2 [x] nu) <= d(mu1, mu2)`` at matrix scale.

    ``A1`` and ``A2`` are diagonal with quantile spectra, paired by an optimal
    assignment so that ``||A1 - A2||_2`` is the transport cost between the
    coarsened measures. Both products share one Haar conjugate of ``B``.
    ``coupling_bound`` is ``||A1 - A2||_2``, which dominates ``lhs``.
    """
    from scipy.optimize import linear_sum_assignment

    N = int(N)
    if N < 2:
        raise ValueError("N must be >= 2")
    a1 = quantile_angles(mu1, N)
    a2 = quantile_angles(mu2, N)
    _, cols = linear_sum_assignment(chordal_cost(a1[:, None], a2[None, :]))
    a2 = a2[cols]
    Q = _haar(N, seed)
    b = np.exp(2j * np.pi * quantile_angles(nu, N))
    QBQ = (Q * b) @ Q.conj().T
    z1 = np.exp(2j * np.pi * a1)
    z2 = np.exp(2j * np.pi * a2)
    lhs, _ = w2_exact(spectral_measure(z1[:, None] * QBQ), spectral_measure(z2[:, None] * QBQ))
    rhs, _ = w2_exact(mu1, mu2)
    bound = math.sqrt(float(np.mean(np.abs(z1 - z2) ** 2)))
    return ContractionCheck(lhs, rhs, bound)


def _all_words(max_length: int, max_power: int):
    """Every alternating word up to the caps (used by diagnostics and tests)."""
    for length in range(1, max_length + 1):
        for start in (LEFT, RIGHT):
            for powers in itertools.product(range(1, max_power + 1), repeat=length):
                yield AlternatingWord(tuple(((start + i) % 2, p) for i, p in enumerate(powers)))
