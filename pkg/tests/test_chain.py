import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypermut.chain import (
    ClassDistribution,
    ModelParams,
    TransitionMatrix,
    binomial,
    class_distribution,
    n_step_matrix,
    occupation_probs,
    p_step,
    single_site_power,
    transition_matrix,
)
from hypermut.errors import DomainError

from oracles import (
    hypercube_class_law,
    parity_stay_probability,
    pascal_row,
    two_step_class_law_by_enumeration,
)

probs = st.floats(min_value=0.01, max_value=0.99)


class TestModelParams:
    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_rejects_closed_endpoints(self, p):
        with pytest.raises(DomainError):
            ModelParams(3, p)

    def test_rejects_empty_genome(self):
        with pytest.raises(DomainError):
            ModelParams(0, 0.2)

    def test_fraction_kept_exact(self):
        mp = ModelParams(2, Fraction(1, 4))
        assert mp.exact and mp.eigen_ratio == Fraction(1, 2)
        assert not mp.as_float().exact


class TestBinomial:
    def test_small(self):
        assert binomial(4, 2) == 6

    def test_out_of_range_is_zero(self):
        assert binomial(5, -1) == 0
        assert binomial(5, 6) == 0

    def test_against_pascal_triangle(self):
        row = pascal_row(30)
        assert binomial(30, 15) == row[15] == 155117520
        assert [binomial(30, k) for k in range(31)] == row

    def test_exact_up_to_sixty(self):
        assert binomial(60, 30) == math.comb(60, 30)
        assert isinstance(binomial(60, 30), int)

    def test_log_domain_beyond(self):
        assert binomial(100, 50) == pytest.approx(math.comb(100, 50), rel=1e-12)


class TestSingleSite:
    def test_p_step_values(self):
        mp = ModelParams(1, 0.25)
        assert p_step(mp, 0) == 1.0
        assert p_step(mp, 1) == 0.75
        assert p_step(mp, 2) == pytest.approx(parity_stay_probability(0.25, 2)) == pytest.approx(0.625)

    def test_zero_steps_at_half(self):
        assert p_step(ModelParams(1, 0.5), 0) == 1.0
        assert p_step(ModelParams(1, 0.5), 3) == 0.5

    def test_kernel(self):
        k = single_site_power(ModelParams(1, 0.25), 1)
        assert (k.stay_prob, k.flip_prob) == (0.75, 0.25)
        k = single_site_power(ModelParams(1, 0.5), 3)
        assert (k.stay_prob, k.flip_prob) == (0.5, 0.5)

    def test_kernel_matches_matrix_square(self):
        M = np.array([[0.9, 0.1], [0.1, 0.9]])
        k = single_site_power(ModelParams(1, 0.1), 2)
        np.testing.assert_allclose(k.as_matrix(), M @ M, atol=1e-15)
        assert k.stay_prob == pytest.approx(0.82)

    @pytest.mark.parametrize("n", range(17))
    @pytest.mark.parametrize("p", [0.05, 0.3, 0.5, 0.8])
    def test_diagonal_is_parity_probability(self, p, n):
        exact = parity_stay_probability(Fraction(p), n)
        assert p_step(ModelParams(1, p), n) == pytest.approx(float(exact), abs=1e-14)

    @given(probs, st.integers(0, 200))
    def test_distance_to_half(self, p, n):
        mp = ModelParams(1, p)
        assert abs(p_step(mp, n) - 0.5) == pytest.approx(abs(1 - 2 * p) ** n / 2, abs=1e-15)

    def test_exact_kernel(self):
        k = single_site_power(ModelParams(1, Fraction(1, 10)), 2)
        assert k.stay_prob == Fraction(41, 50)


class TestClassDistribution:
    def test_point_mass_at_zero_steps(self):
        np.testing.assert_array_equal(class_distribution(ModelParams(2, 0.25), 2, 0).probs, [0, 0, 1])

    def test_one_step_by_enumeration(self):
        law = class_distribution(ModelParams(2, 0.25), 2, 1).probs
        expected = two_step_class_law_by_enumeration(2, 0.25, 2)
        np.testing.assert_allclose(law, expected, atol=1e-15)
        np.testing.assert_allclose(law, [0.0625, 0.375, 0.5625])

    def test_displayed_corner_entries(self):
        mp = ModelParams(3, 0.25)
        law = class_distribution(mp, 3, 1)
        assert law[0] == pytest.approx(0.25 ** 3)
        for i in range(4):
            for n in (1, 2, 5):
                pn = p_step(mp, n)
                law = class_distribution(mp, i, n)
                assert law[0] == pytest.approx((1 - pn) ** i * pn ** (3 - i))
                assert law[3] == pytest.approx(pn ** i * (1 - pn) ** (3 - i))

    def test_exact_mode(self):
        law = class_distribution(ModelParams(2, Fraction(1, 4)), 2, 1).probs
        assert list(law) == [Fraction(1, 16), Fraction(3, 8), Fraction(9, 16)]
        assert list(law) == two_step_class_law_by_enumeration(2, Fraction(1, 4), 2)

    def test_rejects_bad_class(self):
        with pytest.raises(DomainError):
            class_distribution(ModelParams(3, 0.2), 4, 1)
        with pytest.raises(DomainError):
            class_distribution(ModelParams(3, 0.2), -1, 1)

    @pytest.mark.parametrize("N,p,n", [(3, 0.2, 3), (4, 0.35, 2), (5, 0.7, 4)])
    def test_lumping_matches_hypercube(self, N, p, n):
        mp = ModelParams(N, p)
        for i in range(N + 1):
            np.testing.assert_allclose(class_distribution(mp, i, n).probs,
                                       hypercube_class_law(N, p, i, n), atol=1e-13)

    def test_long_genome_log_domain(self):
        mp = ModelParams(200, 0.01)
        law = class_distribution(mp, 50, 3).probs
        assert law.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(law >= 0)
        mean = 50 * p_step(mp, 3) + 150 * (1 - p_step(mp, 3))
        assert (np.arange(201) * law).sum() == pytest.approx(mean, rel=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 12), probs, st.data())
    def test_chapman_kolmogorov(self, N, p, data):
        i = data.draw(st.integers(0, N))
        n = data.draw(st.integers(0, 20))
        mp = ModelParams(N, p)
        law = class_distribution(mp, i, n).probs
        assert math.fsum(law) == pytest.approx(1.0, abs=1e-12)
        power = n_step_matrix(transition_matrix(mp), n)
        np.testing.assert_allclose(law, power[i], atol=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 12), probs, st.integers(0, 20), st.data())
    def test_reversible_wrt_binomial_measure(self, N, p, n, data):
        i = data.draw(st.integers(0, N))
        j = data.draw(st.integers(0, N))
        mp = ModelParams(N, p)
        lhs = class_distribution(mp, i, n)[j] * math.comb(N, i)
        rhs = class_distribution(mp, j, n)[i] * math.comb(N, j)
        assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_occupation_probs_vectorised(self):
        mp = ModelParams(6, 0.3)
        ns = np.arange(0, 12)
        for i in range(7):
            for j in range(7):
                direct = [class_distribution(mp, i, int(n))[j] for n in ns]
                np.testing.assert_allclose(occupation_probs(mp, i, j, ns), direct, atol=1e-15)

    def test_occupation_probs_log_domain(self):
        mp = ModelParams(60, 0.02)
        ns = np.array([1, 5, 40])
        direct = [class_distribution(mp, 30, int(n))[25] for n in ns]
        np.testing.assert_allclose(occupation_probs(mp, 30, 25, ns), direct, rtol=1e-10)

    def test_validation(self):
        with pytest.raises(DomainError):
            ClassDistribution(np.array([0.5, 0.4]))
        with pytest.raises(DomainError):
            ClassDistribution(np.array([1.2, -0.2]))


class TestTransitionMatrix:
    def test_single_site(self):
        np.testing.assert_allclose(transition_matrix(ModelParams(1, 0.3)).entries, [[0.7, 0.3], [0.3, 0.7]])
        np.testing.assert_allclose(transition_matrix(ModelParams(1, 0.5)).entries, [[0.5, 0.5], [0.5, 0.5]])

    def test_row_matches_enumeration(self):
        P = transition_matrix(ModelParams(2, 0.25))
        np.testing.assert_allclose(P[2], [0.0625, 0.375, 0.5625])

    @pytest.mark.parametrize("p", [0.01, 0.5, 0.99])
    def test_positive_diagonal_and_stochastic(self, p):
        P = transition_matrix(ModelParams(7, p)).entries
        assert np.all(np.diag(P) > 0)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)

    def test_exact_rows_sum_to_one(self):
        P = transition_matrix(ModelParams(4, Fraction(3, 10)))
        assert P.exact
        assert all(sum(row) == 1 for row in P.entries)

    def test_rejects_non_stochastic(self):
        with pytest.raises(DomainError):
            TransitionMatrix(np.array([[0.5, 0.4], [0.5, 0.5]]))

    def test_immutable(self):
        P = transition_matrix(ModelParams(2, 0.25))
        with pytest.raises(ValueError):
            P.entries[0, 0] = 1.0


class TestNStepMatrix:
    def test_zero_power_is_identity(self):
        np.testing.assert_array_equal(n_step_matrix(transition_matrix(ModelParams(3, 0.2)), 0).entries, np.eye(4))

    def test_square_single_site(self):
        P2 = n_step_matrix(transition_matrix(ModelParams(1, 0.25)), 2)
        np.testing.assert_allclose(P2.entries, [[0.625, 0.375], [0.375, 0.625]])

    def test_power_matches_closed_law(self):
        mp = ModelParams(2, 0.25)
        P2 = n_step_matrix(transition_matrix(mp), 2)
        for i in range(3):
            np.testing.assert_allclose(P2[i], class_distribution(mp, i, 2).probs, atol=1e-15)

    def test_exact_power(self):
        mp = ModelParams(3, Fraction(1, 3))
        P5 = n_step_matrix(transition_matrix(mp), 5)
        for i in range(4):
            assert list(P5[i]) == list(class_distribution(mp, i, 5).probs)
