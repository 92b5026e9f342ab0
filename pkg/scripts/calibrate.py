"""Calibration runs behind the statistical thresholds used by the tests.

Each study draws fresh seeds (disjoint from the ones the test suite uses),
prints quantiles of the monitored quantity, and the fraction of runs under
the threshold. Run one study or all:

    python3 scripts/calibrate.py haar_rigidity --runs 200
    python3 scripts/calibrate.py all
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from unitary_contraction.circle_measure import CircleMeasure
from unitary_contraction.cli.scenarios import contraction_starts, random_measure
from unitary_contraction.free_conv import (
    boxtimes_sampled_moments,
    freeness_defect,
    w2_contraction_check,
)
from unitary_contraction.homotopy import build_ladder, contract
from unitary_contraction.matrix_model import derive_rng, diag_unitary, sample_haar_unitary, spectral_measure
from unitary_contraction.transport import w2_to_haar

SEED_BASE = 10_000  # keeps calibration seeds away from the test seeds


def haar_rigidity(runs, N=256):
    """w2_to_haar of one Haar sample's spectrum; threshold 0.1."""
    return [w2_to_haar(spectral_measure(sample_haar_unitary(N, SEED_BASE + s)), N) for s in range(runs)], 0.1


def bernoulli_square(runs, N=512, K=6):
    """max_k |m_k| of the sampled Bernoulli square; threshold 0.1."""
    b = CircleMeasure([0.0, 0.5])
    vals = [np.max(np.abs(boxtimes_sampled_moments(b, b, N, SEED_BASE + s, K).values[1:])) for s in range(runs)]
    return vals, 0.1


def freeness(runs, N=512):
    """freeness_defect of a fixed two-cluster unitary against a Haar partner; threshold 0.1."""
    U = diag_unitary(np.r_[np.zeros(N // 2), np.linspace(-0.4, 0.4, N - N // 2)])
    return [freeness_defect(U, sample_haar_unitary(N, SEED_BASE + s), 4, 3).max_defect for s in range(runs)], 0.1


def fact24(runs, N=512):
    """lhs - rhs of the contraction check on random triples; threshold 0.05."""
    out = []
    for s in range(runs):
        rng = derive_rng(SEED_BASE + s, "instance", 5)
        mu1, mu2, nu = (random_measure(rng) for _ in range(3))
        chk = w2_contraction_check(mu1, mu2, nu, N, SEED_BASE + s)
        out.append(chk.lhs - chk.rhs)
    return out, 0.05


def randomized_distance(runs, N=256):
    """Largest dist_to_haar for t >= 1 over the four standard starts; threshold 0.15."""
    out = []
    for s in range(runs):
        L = build_ladder(N, 4, SEED_BASE + s)
        worst = 0.0
        for u in contraction_starts(N, SEED_BASE + s).values():
            tr = contract(L, u, [0.0, 1.0, 2.0, 3.0, 4.0])
            worst = max(worst, float(np.max(tr.column("dist_to_haar")[1:])))
        out.append(worst)
    return out, 0.15


def adaptive_ladder(runs, N=512, stages=2):
    """Worst accepted defect of the adaptive ladder with probes {I, -I}; the run
    counts as accepted when no stage is flagged (target 0.1, at most 3 retries)."""
    probes = [np.eye(N, dtype=complex), -np.eye(N, dtype=complex)]
    out = []
    for s in range(runs):
        L = build_ladder(N, stages, SEED_BASE + s, probes=probes, target=0.1, max_length=4, max_power=3)
        out.append(max(L.defects) if not any(L.flagged) else float("inf"))
    return out, 0.1


STUDIES = {
    "haar_rigidity": haar_rigidity,
    "bernoulli_square": bernoulli_square,
    "freeness": freeness,
    "fact24": fact24,
    "randomized_distance": randomized_distance,
    "adaptive_ladder": adaptive_ladder,
}


def summarize(name, values, threshold, elapsed):
    v = np.asarray(values, dtype=float)
    finite = v[np.isfinite(v)]
    q = np.quantile(finite, [0.5, 0.95, 0.99, 1.0]) if finite.size else [np.nan] * 4
    return {
        "study": name,
        "runs": int(v.size),
        "threshold": threshold,
        "fraction_within": float(np.mean(v <= threshold)),
        "median": float(q[0]),
        "q95": float(q[1]),
        "q99": float(q[2]),
        "max": float(q[3]),
        "seconds": round(elapsed, 1),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("study", choices=[*STUDIES, "all"])
    parser.add_argument("--runs", type=int, default=100)
    args = parser.parse_args(argv)
    names = list(STUDIES) if args.study == "all" else [args.study]
    for name in names:
        start = time.perf_counter()
        values, threshold = STUDIES[name](args.runs)
        print(json.dumps(summarize(name, values, threshold, time.perf_counter() - start)), flush=True)


if __name__ == "__main__":
    main()
