import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from opbound.errors import DivergenceError, InvalidInputError
from opbound.generators import random_knots
from opbound.operators import (
    bernstein_eigenvalues_exact,
    collocation_matrix,
    make_bernstein,
    make_integral_schoenberg,
    make_kantorovich,
    make_schoenberg,
)
from opbound.spectral import (
    check_schoenberg_eigen_pattern,
    distinct_positive_real,
    eigendecompose,
    fixed_point_projection,
    is_oscillatory,
    is_totally_positive,
    iterate_decay,
    spectral_location_check,
)
from opbound.splines import KnotSequence


def collocations():
    kn = random_knots(2, 6, seed=4, min_gauge=0.05)
    return [
        collocation_matrix(make_bernstein(5)),
        collocation_matrix(make_bernstein(12)),
        collocation_matrix(make_kantorovich(7)),
        collocation_matrix(make_schoenberg(KnotSequence.uniform(2, 4))),
        collocation_matrix(make_schoenberg(kn)),
        collocation_matrix(make_integral_schoenberg(kn)),
    ]


class TestEigendecompose:
    def test_identity(self):
        s = eigendecompose(np.eye(4))
        np.testing.assert_allclose(s.eigenvalues, 1.0)
        assert s.unit_multiplicity == 4 and s.gap == 0.0

    def test_symmetric_two_by_two(self):
        # characteristic polynomial (2-λ)^2 - 1
        np.testing.assert_allclose(eigendecompose([[2, 1], [1, 2]]).eigenvalues, [3, 1])

    def test_bernstein_three(self):
        s = eigendecompose(collocation_matrix(make_bernstein(3)))
        np.testing.assert_allclose(s.eigenvalues.real, [1, 1, 2 / 3, 2 / 9], rtol=1e-12)
        assert s.unit_multiplicity == 2 and s.gap == pytest.approx(2 / 3)

    @pytest.mark.parametrize("n", range(2, 21))
    def test_bernstein_gap(self, n):
        s = eigendecompose(collocation_matrix(make_bernstein(n)))
        assert s.gap == pytest.approx((n - 1) / n, rel=1e-9)
        np.testing.assert_allclose(s.eigenvalues.real, bernstein_eigenvalues_exact(n), rtol=1e-9)
        assert spectral_location_check(s)

    def test_complex_pairs_kept(self):
        s = eigendecompose([[0, -0.5], [0.5, 0]])
        np.testing.assert_allclose(np.sort(s.eigenvalues.imag), [-0.5, 0.5], atol=1e-15)

    def test_rejects_non_square(self):
        with pytest.raises(InvalidInputError):
            eigendecompose(np.ones((2, 3)))


class TestSpectralLocation:
    def test_minus_one(self):
        assert not spectral_location_check(eigendecompose(np.diag([1.0, -1.0])))

    def test_repeated_inside(self):
        assert spectral_location_check(eigendecompose(np.diag([1.0, 0.5, 0.5])))

    def test_divergent_projection(self):
        with pytest.raises(DivergenceError):
            fixed_point_projection(np.diag([1.0, 1.2]))


class TestProjection:
    def test_diagonal(self):
        np.testing.assert_allclose(fixed_point_projection(np.diag([1.0, 0.5])).matrix, np.diag([1.0, 0.0]))

    def test_identity(self):
        np.testing.assert_allclose(fixed_point_projection(np.eye(3)).matrix, np.eye(3))

    def test_bernstein_rank_two(self):
        A = collocation_matrix(make_bernstein(6))
        P = fixed_point_projection(A)
        assert P.rank == 2
        # power-iteration oracle: A^m converges to P at rate (5/6)^m
        np.testing.assert_allclose(np.linalg.matrix_power(A, 400), P.matrix, atol=1e-10)

    def test_idempotent(self):
        for A in collocations():
            P = fixed_point_projection(A).matrix
            np.testing.assert_allclose(P @ P, P, atol=1e-8)
            np.testing.assert_allclose(A @ P, P, atol=1e-8)


class TestIterateDecay:
    def test_diagonal_exact(self):
        tr = iterate_decay(np.diag([1.0, 0.5]), np.diag([1.0, 0.0]), 30)
        np.testing.assert_allclose(tr.rho, 0.5 ** np.arange(1, 31), rtol=1e-14)
        assert tr.fitted_rate == pytest.approx(0.5, rel=1e-10)
        assert tr.gamma_bound_holds

    def test_projection_stays_zero(self):
        P = fixed_point_projection(collocation_matrix(make_bernstein(4))).matrix
        tr = iterate_decay(P, P, 20)
        assert np.all(tr.rho <= 1e-13)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-0.95, 0.95), min_size=1, max_size=6), st.integers(1, 3))
    def test_normal_matrices_decay_exactly(self, lam, ones):
        # diagonal (hence normal) matrices: ||A^m - P||_inf = γ^m
        d = np.array([1.0] * ones + lam)
        gamma = max(abs(v) for v in lam)
        assume(gamma > 0.05)
        P = fixed_point_projection(np.diag(d))
        tr = iterate_decay(np.diag(d), P, 25)
        np.testing.assert_allclose(tr.rho, gamma ** np.arange(1, 26), rtol=1e-10, atol=1e-300)

    @pytest.mark.parametrize("n", [3, 5, 8])
    def test_bernstein_rate(self, n):
        A = collocation_matrix(make_bernstein(n))
        tr = iterate_decay(A, fixed_point_projection(A), 60)
        assert tr.fitted_rate == pytest.approx((n - 1) / n, rel=0.05)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-0.95, 0.95), min_size=1, max_size=6))
    def test_ratio_after_burn_in_normal(self, lam):
        d = np.array([1.0] + lam)
        gamma = max(abs(v) for v in lam)
        assume(gamma > 0.05)
        tr = iterate_decay(np.diag(d), fixed_point_projection(np.diag(d)), 40)
        ok = tr.rho[5:-1] > 1e-200
        assert np.all(tr.rho[6:][ok] <= tr.rho[5:-1][ok] * (gamma + 1e-6))

    def test_ratio_tends_to_gap(self):
        # non-normal collocation matrices only decay at rate γ asymptotically: the
        # ratio rho_{m+1}/rho_m can exceed γ by ~1e-2 at m = 6, the excess dying out
        # like (λ_3/γ)^m, so only the limit is asserted
        for A in collocations():
            s = eigendecompose(A)
            tr = iterate_decay(A, fixed_point_projection(A), 60, gamma=s.gap)
            ratio = tr.rho[1:] / tr.rho[:-1]
            late = slice(39, 59)
            assert np.all(np.abs(ratio[late] - s.gap) <= 1e-3)

    def test_secondary_function_norms(self):
        A = collocation_matrix(make_bernstein(4))
        probes = np.eye(5)
        tr = iterate_decay(A, fixed_point_projection(A), 15, probes=probes)
        # identity probes recover the max-entry norm, which the row-sum norm dominates
        assert np.all(tr.function_norms <= tr.rho + 1e-15)


# ---------------------------------------------------------------------------
# total positivity


def _tp_matrix(draw_x, draw_y):
    x = np.sort(draw_x)
    y = np.sort(draw_y)
    return np.exp(np.outer(x, y))  # strictly TP kernel for increasing x, y


@st.composite
def tp_matrices(draw):
    n = draw(st.integers(1, 8))
    xs = draw(st.lists(st.floats(0.0, 1.5), min_size=n, max_size=n, unique=True))
    ys = draw(st.lists(st.floats(0.0, 1.5), min_size=n, max_size=n, unique=True))
    assume(np.min(np.diff(np.sort(xs)), initial=1) > 0.2 and np.min(np.diff(np.sort(ys)), initial=1) > 0.2)
    return _tp_matrix(np.array(xs), np.array(ys))


@st.composite
def bidiagonal_products(draw):
    # Loewner–Whitney: products of positive elementary bidiagonal factors are TP
    n = draw(st.integers(2, 8))
    A = np.diag(draw(st.lists(st.floats(0.5, 2.0), min_size=n, max_size=n)))
    for _ in range(draw(st.integers(1, 2 * n))):
        i = draw(st.integers(0, n - 2))
        E = np.eye(n)
        if draw(st.booleans()):
            E[i + 1, i] = draw(st.floats(0.1, 2.0))
        else:
            E[i, i + 1] = draw(st.floats(0.1, 2.0))
        A = A @ E
    return A


class TestTotalPositivity:
    def test_two_by_two(self):
        v = is_totally_positive(np.array([[1.0, 1.0], [1.0, 2.0]]))
        assert v.totally_positive and v.min_minor == pytest.approx(1.0)

    def test_permutation(self):
        v = is_totally_positive(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert not v.totally_positive and v.min_minor == pytest.approx(-1.0)

    def test_integral_schoenberg_k2(self):
        A = collocation_matrix(make_integral_schoenberg(KnotSequence.uniform(2, 4)))
        v = is_totally_positive(A, method="exhaustive")
        assert v.totally_positive and v.method == "exhaustive"

    def test_large_uses_elimination(self):
        A = collocation_matrix(make_integral_schoenberg(KnotSequence.uniform(3, 12)))
        v = is_totally_positive(A)
        assert v.method == "elimination" and v.totally_positive

    @settings(max_examples=60, deadline=None)
    @given(tp_matrices())
    def test_methods_agree_on_tp(self, A):
        ex = is_totally_positive(A, method="exhaustive")
        el = is_totally_positive(A, method="elimination")
        assert ex.totally_positive and el.totally_positive

    @settings(max_examples=60, deadline=None)
    @given(bidiagonal_products())
    def test_methods_agree_on_bidiagonal_products(self, A):
        assert is_totally_positive(A, method="exhaustive").totally_positive
        assert is_totally_positive(A, method="elimination").totally_positive

    @settings(max_examples=80, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 2**31 - 1))
    def test_methods_agree_on_random(self, n, seed):
        rng = np.random.default_rng(seed)
        A = rng.uniform(-0.2, 1.0, (n, n)) if seed % 2 else rng.uniform(0.0, 1.0, (n, n))
        assume(abs(np.linalg.det(A)) > 1e-6)
        ex = is_totally_positive(A, method="exhaustive")
        el = is_totally_positive(A, method="elimination")
        assert ex.totally_positive == el.totally_positive

    def test_methods_agree_on_collocations(self):
        for A in collocations():
            if A.shape[0] > 8:
                continue
            ex = is_totally_positive(A, method="exhaustive")
            el = is_totally_positive(A, method="elimination")
            assert ex.totally_positive == el.totally_positive


class TestOscillatory:
    def test_two_by_two(self):
        rep = is_oscillatory(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert rep.oscillatory and rep.nonsingular

    def test_diagonal_not_oscillatory(self):
        rep = is_oscillatory(np.diag([1.0, 2.0, 3.0]))
        assert rep.totally_positive and not rep.oscillatory
        assert not rep.superdiagonal_positive

    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_integral_schoenberg(self, k, n):
        for kn in [KnotSequence.uniform(k, n)] + [random_knots(k, n, s, 0.02) for s in range(5)]:
            A = collocation_matrix(make_integral_schoenberg(kn))
            assert is_oscillatory(A).oscillatory
            d = distinct_positive_real(np.linalg.eigvals(A))
            assert d["real"] and d["positive"] and d["distinct"]

    def test_distinctness_flags(self):
        d = distinct_positive_real(np.array([1.0, 0.5, 0.5]))
        assert d["real"] and d["positive"] and not d["distinct"]
        assert not distinct_positive_real(np.array([1.0, -0.1]))["positive"]


class TestSchoenbergPattern:
    def test_k2_n4(self):
        rep = check_schoenberg_eigen_pattern(KnotSequence.uniform(2, 4))
        assert rep.holds and rep.unit_count == 2
        assert rep.rest_real and rep.rest_positive and rep.rest_strictly_decreasing
        assert rep.matches_integral_schoenberg

    def test_zero_bookkeeping_reported(self):
        rep = check_schoenberg_eigen_pattern(KnotSequence.uniform(3, 5))
        assert rep.zero_discrepancy and not rep.matrix_has_zero_eigenvalue

    def test_smallest_instance(self):
        rep = check_schoenberg_eigen_pattern(KnotSequence.uniform(1, 2))
        assert rep.k == 1 and rep.n == 2
        # piecewise-linear interpolation at the knots: the collocation matrix is the identity
        assert rep.unit_count == 3 and not rep.holds

    def test_degree_one_is_identity(self):
        A = collocation_matrix(make_schoenberg(random_knots(1, 5, 0, 0.02)))
        np.testing.assert_allclose(A, np.eye(6), atol=1e-14)
