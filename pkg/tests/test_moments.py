import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import betaln, comb

from matmoments.canonical import CanonicalSequence, canonical_to_moments, range_widths
from matmoments.ensembles import sample_uniform_moment_space
from matmoments.errors import NotInterior
from matmoments.linalg import Field
from matmoments.moments import (
    MomentSequence,
    arcsine_moments,
    clt_constants,
    clt_matrix_A,
    clt_scale,
    extremal_moments,
    hankel_matrices,
    is_interior,
    log_volume,
    standardize_moment_vector,
)

from helpers import random_canonical

fields = st.sampled_from(list(Field))
seeds = st.integers(0, 2**32 - 1)


def arcsine_sequence(k, p, field=Field.REAL):
    return MomentSequence(field, arcsine_moments(k)[:, None, None] * np.eye(p))


class TestMomentSequence:
    def test_read_only(self):
        S = MomentSequence.scalar([0.5, 0.375])
        with pytest.raises(ValueError):
            S.S[0, 0, 0] = 1.0

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            MomentSequence(Field.REAL, np.zeros((2, 2)))
        with pytest.raises(ValueError):
            MomentSequence(Field.REAL, np.zeros((0, 2, 2)))

    def test_truncate(self):
        S = MomentSequence.scalar([0.5, 0.375, 0.3125])
        assert S.truncate(2).n == 2
        with pytest.raises(IndexError):
            S.truncate(4)


class TestHankel:
    def test_order_one(self):
        S = np.array([[[0.3, 0.1], [0.1, 0.6]]])
        lower, upper = hankel_matrices(S, 1)
        np.testing.assert_allclose(lower, S[0])
        np.testing.assert_allclose(upper, np.eye(2) - S[0])

    def test_arcsine_order_two(self):
        lower, upper = hankel_matrices(MomentSequence.scalar([0.5, 0.375]), 2)
        np.testing.assert_allclose(lower, [[1, 0.5], [0.5, 0.375]])
        np.testing.assert_allclose(upper, [[0.125]])

    def test_boundary_delta_one(self):
        _, upper = hankel_matrices(MomentSequence.scalar([1.0]), 1)
        np.testing.assert_allclose(upper, [[0.0]])

    def test_order_four_layout(self):
        s = [0.4, 0.3, 0.25, 0.2]
        lower, upper = hankel_matrices(MomentSequence.scalar(s), 4)
        np.testing.assert_allclose(lower, [[1, 0.4, 0.3], [0.4, 0.3, 0.25], [0.3, 0.25, 0.2]])
        np.testing.assert_allclose(upper, [[0.1, 0.05], [0.05, 0.05]])

    def test_block_layout(self, rng):
        U = random_canonical(3, 2, Field.COMPLEX, rng)
        S = canonical_to_moments(CanonicalSequence(Field.COMPLEX, U)).S
        lower, upper = hankel_matrices(S, 3)
        np.testing.assert_allclose(lower[2:, 2:], S[2])
        np.testing.assert_allclose(upper[:2, 2:], S[0] - S[1])
        np.testing.assert_allclose(lower, np.conj(lower.T))

    def test_order_out_of_range(self):
        with pytest.raises(IndexError):
            hankel_matrices(MomentSequence.scalar([0.5]), 2)


class TestInterior:
    def test_examples(self):
        assert is_interior(MomentSequence.scalar([0.5, 0.375, 0.3125]))
        assert not is_interior(MomentSequence(Field.REAL, np.eye(2)[None]))
        assert not is_interior(MomentSequence.scalar([0.5, 0.5]))

    def test_uniform_draws_interior(self, rng):
        for field in Field:
            S = sample_uniform_moment_space(8, 3, field, rng, size=50)
            assert all(is_interior(MomentSequence(field, s)) for s in S)

    def test_lower_bound_violation(self):
        # s_2 < s_1^2 is impossible for a probability measure
        assert not is_interior(MomentSequence.scalar([0.5, 0.2]))


class TestExtremal:
    def test_first(self):
        pair = extremal_moments(MomentSequence(Field.REAL, 0.5 * np.eye(2)[None]), 1)
        np.testing.assert_allclose(pair.lower, np.zeros((2, 2)))
        np.testing.assert_allclose(pair.upper, np.eye(2))

    def test_scalar_second(self):
        pair = extremal_moments(MomentSequence.scalar([0.5, 0.3]), 2)
        assert pair.lower[0, 0] == pytest.approx(0.25)
        assert pair.upper[0, 0] == pytest.approx(0.5)

    def test_matrix_second(self):
        pair = extremal_moments(MomentSequence(Field.REAL, 0.5 * np.eye(2)[None]), 2)
        np.testing.assert_allclose(pair.lower, 0.25 * np.eye(2))
        np.testing.assert_allclose(pair.upper, 0.5 * np.eye(2))

    def test_scalar_third_closed_form(self):
        # s3^- = s2^2/s1, s3^+ = s2 - (s1 - s2)^2/(1 - s1)
        s1, s2 = 0.6, 0.4
        pair = extremal_moments(MomentSequence.scalar([s1, s2]), 3)
        assert pair.lower[0, 0] == pytest.approx(s2**2 / s1, rel=1e-13)
        assert pair.upper[0, 0] == pytest.approx(s2 - (s1 - s2) ** 2 / (1 - s1), rel=1e-13)

    def test_prefix_must_be_interior(self):
        with pytest.raises(NotInterior):
            extremal_moments(MomentSequence.scalar([1.0, 0.5]), 2)

    @given(seed=seeds, field=fields, p=st.integers(1, 3), n=st.integers(2, 8))
    def test_strict_loewner_bracket(self, seed, field, p, n):
        rng = np.random.default_rng(seed)
        S = sample_uniform_moment_space(n, p, field, rng)
        for k in range(1, n + 1):
            pair = extremal_moments(S, k)
            assert np.linalg.eigvalsh(S.S[k - 1] - pair.lower).min() > 0
            assert np.linalg.eigvalsh(pair.upper - S.S[k - 1]).min() > 0

    @given(seed=seeds, field=fields, p=st.integers(1, 3), n=st.integers(2, 7))
    def test_depends_only_on_prefix(self, seed, field, p, n):
        rng = np.random.default_rng(seed)
        longer = sample_uniform_moment_space(n + 2, p, field, rng)
        for k in range(1, n + 1):
            short = MomentSequence(field, longer.S[:k])
            for which in ("lower", "upper"):
                np.testing.assert_array_equal(
                    getattr(extremal_moments(longer, k), which), getattr(extremal_moments(short, k), which)
                )

    @given(seed=seeds, field=fields, p=st.integers(1, 3), n=st.integers(1, 9))
    def test_width_matches_range_recursion(self, seed, field, p, n):
        rng = np.random.default_rng(seed)
        U = random_canonical(n, p, field, rng)
        S = canonical_to_moments(CanonicalSequence(field, U))
        D = range_widths(U)
        for k in range(1, n + 1):
            width = extremal_moments(S, k).width
            np.testing.assert_allclose(width, D[k - 1], atol=1e-10 * np.abs(D[k - 1]).max() + 1e-14)


def _scalar_volume_n3():
    def width(s2, s1):
        return (s2 - (s1 - s2) ** 2 / (1 - s1)) - s2**2 / s1

    val, _ = integrate.dblquad(width, 0, 1, lambda s1: s1**2, lambda s1: s1, epsabs=1e-13, epsrel=1e-11)
    return val


class TestVolume:
    def test_trivial(self):
        assert math.exp(log_volume(1, 1)) == 1.0

    def test_n2_against_integral(self):
        val, _ = integrate.quad(lambda s: s - s * s, 0, 1)
        assert math.exp(log_volume(2, 1)) == pytest.approx(val, rel=1e-12)
        assert val == pytest.approx(1 / 6, rel=1e-12)

    def test_n3_against_double_integral(self):
        assert math.exp(log_volume(3, 1)) == pytest.approx(_scalar_volume_n3(), rel=1e-8)

    def test_p2_n1(self):
        assert math.exp(log_volume(1, 2)) == pytest.approx(math.pi / 6, rel=1e-13)
        assert math.exp(log_volume(1, 2, Field.COMPLEX)) == pytest.approx(math.pi / 12, rel=1e-13)

    @pytest.mark.parametrize("n", range(1, 11))
    def test_scalar_beta_product(self, n):
        expected = sum(betaln(k, k) for k in range(1, n + 1))
        assert log_volume(n, 1) == pytest.approx(expected, rel=1e-12)
        assert log_volume(n, 1, Field.COMPLEX) == pytest.approx(expected, rel=1e-12)

    def test_large_case_is_finite(self):
        lv = log_volume(20, 3)
        assert math.isfinite(lv) and lv < -700


class TestArcsine:
    def test_values(self):
        np.testing.assert_allclose(arcsine_moments(1), [0.5])
        np.testing.assert_allclose(arcsine_moments(3), [0.5, 0.375, 0.3125])

    def test_binomial_and_monotone(self):
        s = arcsine_moments(30)
        j = np.arange(1, 31)
        np.testing.assert_allclose(s, comb(2 * j, j) / 4.0**j, rtol=1e-13)
        assert np.all(np.diff(s) < 0) and s[-1] > 0

    def test_matches_integral(self):
        for j in (1, 4, 7):
            val, _ = integrate.quad(lambda x: x**j / (math.pi * math.sqrt(x * (1 - x))), 0, 1, limit=200)
            assert arcsine_moments(j)[-1] == pytest.approx(val, rel=1e-8)


class TestCltMatrix:
    def test_small(self):
        np.testing.assert_allclose(clt_matrix_A(1), [[1.0]])
        np.testing.assert_allclose(clt_matrix_A(2), [[1, 0], [1, 0.25]])
        np.testing.assert_allclose(clt_matrix_A(3)[2], [15 / 16, 3 / 8, 1 / 16])

    def test_lower_triangular_closed_form(self):
        A = clt_matrix_A(7)
        for i in range(1, 8):
            for j in range(1, 8):
                expected = 2.0 ** (-2 * i + 2) * comb(2 * i, i - j, exact=True) if j <= i else 0.0
                assert A[i - 1, j - 1] == pytest.approx(expected, abs=1e-15)

    def test_scale(self):
        assert clt_scale(10, 2) == pytest.approx(math.sqrt(4 * 10 * 3))
        assert clt_scale(10, 2, Field.COMPLEX) == pytest.approx(math.sqrt(8 * 10 * 2))
        c = clt_constants(3, 2)
        np.testing.assert_allclose(c.arcsine, arcsine_moments(3))
        np.testing.assert_allclose(c.A, clt_matrix_A(3))
        assert c.scale(10) == pytest.approx(clt_scale(10, 2))


class TestStandardize:
    def test_centre_is_zero(self):
        S = arcsine_sequence(4, 2)
        np.testing.assert_allclose(standardize_moment_vector(S, 50), 0.0, atol=1e-14)

    def test_scalar_example(self):
        G = standardize_moment_vector(MomentSequence.scalar([0.75]), 1)
        assert G[0, 0, 0] == pytest.approx(math.sqrt(2) / 2)

    def test_inverse_A(self):
        # A^{-1} for k=2 is [[1, 0], [-4, 4]]
        S = MomentSequence.scalar(arcsine_moments(2) + np.array([0.01, 0.02]))
        G = standardize_moment_vector(S, 2)[:, 0, 0]
        d = np.array([0.01, 0.02])
        np.testing.assert_allclose(G / math.sqrt(16), np.array([[1, 0], [-4, 4]]) @ d, rtol=1e-12)

    def test_k_exceeds_n(self):
        with pytest.raises(ValueError):
            standardize_moment_vector(MomentSequence.scalar([0.5, 0.4]), 1)

    def test_block_structure(self, rng):
        p, k, n = 2, 3, 7
        dS = 0.01 * np.stack([rng.standard_normal((p, p)) for _ in range(k)])
        dS = 0.5 * (dS + np.swapaxes(dS, -1, -2))
        S = arcsine_moments(k)[:, None, None] * np.eye(p) + dS
        G = standardize_moment_vector(S, n, Field.REAL)
        expected = np.einsum("ij,jab->iab", np.linalg.inv(clt_matrix_A(k)), dS) * clt_scale(n, p)
        np.testing.assert_allclose(G, expected, rtol=1e-11, atol=1e-13)
