import itertools
from functools import lru_cache

import numpy as np
import pytest

from unitary_contraction.circle_measure import (
    CircleMeasure,
    MomentSequence,
    dirac,
    haar_discretization,
    moments,
    quantile_angles,
    rotate,
)
from unitary_contraction.free_conv import (
    LEFT,
    RIGHT,
    AlternatingWord,
    _all_words,
    boxtimes_moments,
    boxtimes_sampled,
    boxtimes_sampled_moments,
    freeness_defect,
    trace_of_word,
    w2_contraction_check,
)
from unitary_contraction.matrix_model import derive_rng, diag_unitary, normalized_trace, sample_haar_unitary
from unitary_contraction.transport import w2_exact

BERNOULLI = CircleMeasure([0.0, 0.5])


# ----------------------------------------------------------------- oracle
# tau((ab)^n) = sum over non-crossing partitions pi of kappa_pi[a] * m_{K(pi)}[b],
# with K the Kreweras complement. Both factors depend only on block sizes.


def set_partitions(n):
    if n == 0:
        yield []
        return
    for part in set_partitions(n - 1):
        for i in range(len(part)):
            yield part[:i] + [part[i] + [n - 1]] + part[i + 1:]
        yield part + [[n - 1]]


def is_noncrossing(part):
    owner = {x: i for i, block in enumerate(part) for x in block}
    for a, b, c, d in itertools.combinations(sorted(owner), 4):
        if owner[a] == owner[c] != owner[b] == owner[d]:
            return False
    return True


@lru_cache(maxsize=None)
def nc_partitions(n):
    return tuple(tuple(tuple(b) for b in p) for p in set_partitions(n) if is_noncrossing(p))


def kreweras_sizes(part, n):
    """Block sizes of the Kreweras complement, as cycles of pi^-1 gamma."""
    pi_inv = {}
    for block in part:
        block = sorted(block)
        for i, x in enumerate(block):
            pi_inv[block[(i + 1) % len(block)]] = x
    perm = {x: pi_inv[(x + 1) % n] for x in range(n)}
    seen, sizes = set(), []
    for x in range(n):
        if x in seen:
            continue
        size, y = 0, x
        while y not in seen:
            seen.add(y)
            y = perm[y]
            size += 1
        sizes.append(size)
    return sizes


def free_cumulants(m, K):
    kappa = {}
    for n in range(1, K + 1):
        rest = sum(
            np.prod([kappa[len(b)] for b in p]) for p in nc_partitions(n) if len(p) > 1
        )
        kappa[n] = m[n] - rest
    return kappa


def oracle_boxtimes(ma, mb, K):
    kappa = free_cumulants(ma, K)
    out = [1.0 + 0j]
    for n in range(1, K + 1):
        total = 0j
        for p in nc_partitions(n):
            k_part = np.prod([kappa[len(b)] for b in p])
            m_part = np.prod([mb[s] for s in kreweras_sizes(p, n)])
            total += k_part * m_part
        out.append(total)
    return np.array(out)


def random_measure(seed, n_max=6):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, n_max + 1))
    return CircleMeasure(rng.uniform(-0.5, 0.5, n), rng.dirichlet(np.ones(n)))


class TestOracle:
    def test_catalan_counts(self):
        assert [len(nc_partitions(n)) for n in range(1, 7)] == [1, 2, 5, 14, 42, 132]

    def test_kreweras_of_extremes(self):
        n = 5
        assert sorted(kreweras_sizes([[i] for i in range(n)], n)) == [n]
        assert kreweras_sizes([list(range(n))], n) == [1] * n


class TestAlternatingWord:
    def test_canonical_merge(self):
        w = AlternatingWord(((LEFT, 1), (LEFT, 2), (RIGHT, 1), (RIGHT, 1), (LEFT, 1)))
        assert w.letters == ((LEFT, 3), (RIGHT, 2), (LEFT, 1))
        assert str(w) == "U^3 V^2 U"
        assert w.power(LEFT) == 4 and w.power(RIGHT) == 2

    def test_product_power(self):
        w = AlternatingWord.product_power(3)
        assert len(w) == 6 and w.power(LEFT) == 3

    @pytest.mark.parametrize("letters", [((2, 1),), ((LEFT, 0),)])
    def test_rejects(self, letters):
        with pytest.raises(ValueError):
            AlternatingWord(letters)

    def test_all_words_alternate(self):
        words = list(_all_words(3, 2))
        assert len(words) == 2 * (2 + 4 + 8)
        assert all(a[0] != b[0] for w in words for a, b in zip(w.letters, w.letters[1:]))


class TestRecursion:
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_noncrossing_oracle(self, seed):
        mu, nu = random_measure(seed), random_measure(1000 + seed)
        K = 6
        ma, mb = moments(mu, K), moments(nu, K)
        got = boxtimes_moments(ma, mb, K).values
        assert np.max(np.abs(got - oracle_boxtimes(ma.values, mb.values, K))) <= 1e-12

    def test_matches_oracle_order_eight(self):
        mu, nu = random_measure(42), random_measure(43)
        ma, mb = moments(mu, 8), moments(nu, 8)
        got = boxtimes_moments(ma, mb, 8).values
        assert np.max(np.abs(got - oracle_boxtimes(ma.values, mb.values, 8))) <= 1e-12

    @pytest.mark.parametrize("seed", range(4))
    def test_identity_element(self, seed):
        mu = random_measure(seed)
        m = moments(mu, 8)
        out = boxtimes_moments(m, moments(dirac(0.0), 8), 8)
        assert np.max(np.abs(out.values - m.values)) <= 1e-12

    @pytest.mark.parametrize("side", ["left", "right"])
    def test_haar_absorption_exact(self, side):
        m = moments(random_measure(3), 10)
        haar = MomentSequence.from_values(np.zeros(10))
        args = (m, haar) if side == "left" else (haar, m)
        assert np.all(boxtimes_moments(*args, 10).values[1:] == 0)

    def test_bernoulli_square_is_haar(self):
        mb = moments(BERNOULLI, 8)
        assert np.all(boxtimes_moments(mb, mb, 8).values[1:] == 0)

    @pytest.mark.parametrize("seed", range(6))
    def test_first_two_moments(self, seed):
        a, b = moments(random_measure(seed), 2), moments(random_measure(50 + seed), 2)
        out = boxtimes_moments(a, b, 2)
        assert abs(out[1] - a[1] * b[1]) <= 1e-14
        m2 = a[2] * b[1] ** 2 + a[1] ** 2 * b[2] - a[1] ** 2 * b[1] ** 2
        assert abs(out[2] - m2) <= 1e-14

    @pytest.mark.parametrize("seed", range(6))
    def test_commutative_and_bounded(self, seed):
        a, b = moments(random_measure(seed), 8), moments(random_measure(77 + seed), 8)
        ab, ba = boxtimes_moments(a, b, 8).values, boxtimes_moments(b, a, 8).values
        assert np.max(np.abs(ab - ba)) <= 1e-12
        assert np.all(np.abs(ab) <= 1 + 1e-9)

    def test_cap(self):
        m = moments(BERNOULLI, 11)
        with pytest.raises(ValueError, match="cap"):
            boxtimes_moments(m, m, 11)

    def test_single_letter_word(self):
        m, n = moments(random_measure(1), 4), moments(random_measure(2), 4)
        assert trace_of_word(AlternatingWord(((LEFT, 3),)), m, n) == pytest.approx(m[3], abs=1e-15)
        assert trace_of_word(AlternatingWord(((RIGHT, 2),)), m, n) == pytest.approx(n[2], abs=1e-15)

    def test_word_against_matrices(self):
        # tau(U^2 V U V^3) for U, V = A, QBQ* at large N, against the recursion
        mu, nu = random_measure(5), random_measure(6)
        N = 600
        Q = sample_haar_unitary(N, 3)
        A = diag_unitary(quantile_angles(mu, N))
        B = Q @ diag_unitary(quantile_angles(nu, N)) @ Q.conj().T
        lhs = normalized_trace(A @ A @ B @ A @ B @ B @ B)
        word = AlternatingWord(((LEFT, 2), (RIGHT, 1), (LEFT, 1), (RIGHT, 3)))
        rhs = trace_of_word(word, moments(mu, 4), moments(nu, 4))
        # quantile coarsening moves moments by O(1/N); the sampler adds O(1/N) noise
        assert abs(lhs - rhs) <= 0.05


class TestSampler:
    def test_diracs(self):
        for seed in (0, 1):
            assert boxtimes_sampled(dirac(0.0), dirac(0.0), 16, seed).allclose(dirac(0.0), atol=1e-12)

    def test_minus_one_rotates(self):
        nu = haar_discretization(4)
        nu = CircleMeasure(nu.angles + np.array([0.01, -0.02, 0.03, 0.0]))
        out = boxtimes_sampled(dirac(0.5), nu, 8, 3)
        assert w2_exact(out, rotate(nu, 0.5))[0] <= 1e-7

    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            boxtimes_sampled(dirac(), dirac(), 1, 0)

    def test_deterministic(self):
        a = boxtimes_sampled(BERNOULLI, random_measure(2), 64, 11)
        b = boxtimes_sampled(BERNOULLI, random_measure(2), 64, 11)
        assert np.array_equal(a.angles, b.angles)

    def test_trace_power_moments_match_spectrum(self):
        mu, nu = random_measure(8), random_measure(9)
        direct = moments(boxtimes_sampled(mu, nu, 128, 4), 6).values
        fast = boxtimes_sampled_moments(mu, nu, 128, 4, 6).values
        assert np.max(np.abs(direct - fast)) <= 1e-8

    @pytest.mark.parametrize("seed", range(3))
    def test_bernoulli_square_sampled(self, seed):
        m = boxtimes_sampled_moments(BERNOULLI, BERNOULLI, 512, seed, 6).values
        assert np.max(np.abs(m[1:])) <= 0.1

    def test_agrees_with_recursion(self):
        mu, nu = random_measure(21), random_measure(22)
        rec = boxtimes_moments(moments(mu, 6), moments(nu, 6), 6).values
        smp = np.mean([boxtimes_sampled_moments(mu, nu, 512, s, 6).values for s in range(4)], axis=0)
        assert np.max(np.abs(rec - smp)) <= 0.05


class TestFreenessDefect:
    def test_self_is_not_free(self):
        U = diag_unitary(np.r_[np.zeros(20), np.full(12, 0.3)])
        d = freeness_defect(U, U, 2, 1)
        tau1, tau2 = normalized_trace(U), normalized_trace(U @ U)
        assert d.max_defect >= abs(tau2 - tau1**2) - 1e-12
        assert d.max_defect > 0.1

    def test_identity_letters_vanish(self):
        V = sample_haar_unitary(32, 1)
        d = freeness_defect(np.eye(32), V, 4, 3)
        assert d.max_defect <= 1e-12

    def test_haar_partner_near_free(self):
        U = diag_unitary(np.r_[np.zeros(256), np.linspace(-0.4, 0.4, 256)])
        for seed in range(3):
            d = freeness_defect(U, sample_haar_unitary(512, seed), 4, 3)
            assert d.max_defect <= 0.1
            assert d.max_length == 4 and len(d.worst_word) <= 4

    def test_budget(self):
        with pytest.raises(ValueError, match="budget"):
            freeness_defect(np.eye(2), np.eye(2), 10, 10)

    def test_matches_explicit_word(self):
        rng = derive_rng(0, "instance", 1)
        U, V = sample_haar_unitary(16, 1), diag_unitary(rng.uniform(-0.5, 0.5, 16))
        d = freeness_defect(U, V, 3, 2)
        eye = np.eye(16)

        def centered(X, p):
            P = np.linalg.matrix_power(X, p)
            return P - normalized_trace(P) * eye

        best = 0.0
        for w in _all_words(3, 2):
            M = eye
            for tag, p in w.letters:
                M = M @ centered(U if tag == LEFT else V, p)
            best = max(best, abs(normalized_trace(M)))
        assert d.max_defect == pytest.approx(best, abs=1e-12)

    def test_decreases_with_dimension(self):
        def median_defect(N):
            U = diag_unitary(np.r_[np.zeros(N // 2), np.full(N - N // 2, 0.25)])
            return np.median([freeness_defect(U, sample_haar_unitary(N, s), 2, 3).max_defect for s in range(20)])

        assert median_defect(1024) < median_defect(64)


class TestContractionCheck:
    def test_equal_inputs(self):
        mu, nu = random_measure(1), random_measure(2)
        chk = w2_contraction_check(mu, mu, nu, 64, 0)
        assert chk.lhs == pytest.approx(0.0, abs=1e-7)
        assert chk.rhs == pytest.approx(0.0, abs=1e-7)

    def test_trivial_partner(self):
        mu1 = CircleMeasure([0.0, 0.1, 0.3, -0.2])
        mu2 = CircleMeasure([0.05, 0.4, -0.1, -0.3])
        chk = w2_contraction_check(mu1, mu2, dirac(0.0), 8, 0)
        assert chk.lhs == pytest.approx(chk.rhs, abs=1e-7)

    @pytest.mark.parametrize("seed", range(3))
    def test_random_triples(self, seed):
        mu1, mu2, nu = random_measure(seed), random_measure(10 + seed), random_measure(20 + seed)
        chk = w2_contraction_check(mu1, mu2, nu, 256, seed)
        assert chk.lhs <= chk.coupling_bound + 1e-8
        assert chk.lhs <= chk.rhs + 0.05
