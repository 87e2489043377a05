import math

import numpy as np
import pytest

from sktlab.grid import (
    DimensionMismatchError,
    NonZeroMeanError,
    PeriodicLaplacian,
    apply_mass_matrix,
    inner,
    lp_norm,
    mean_of,
    tilde,
)


def test_apply_kills_constants():
    L = PeriodicLaplacian(4)
    np.testing.assert_array_equal(L.apply(np.full(4, 3.7)), np.zeros(4))


def test_apply_basis_vector_matches_matrix_row():
    # direct row evaluation of the defining matrix at M = 4
    L = PeriodicLaplacian(4)
    got = L.apply(np.array([1.0, 0.0, 0.0, 0.0]))
    np.testing.assert_allclose(got, 16.0 * np.array([-2.0, 1.0, 0.0, 1.0]), rtol=0, atol=0)


def test_apply_alternating_eigenmode():
    # (1,-1,1,-1) is the k=2 mode at M=4, eigenvalue -4*16*sin^2(pi/2) = -64
    L = PeriodicLaplacian(4)
    u = np.array([1.0, -1.0, 1.0, -1.0])
    np.testing.assert_allclose(L.apply(u), -64.0 * u, rtol=1e-14)
    dense = L.dense_matrix() @ u
    np.testing.assert_allclose(L.apply(u), dense, rtol=1e-14)


def test_apply_mean_free_rough_inputs():
    rng = np.random.default_rng(7)
    for M in range(3, 129, 7):
        L = PeriodicLaplacian(M)
        u = rng.standard_normal(M)
        assert abs(mean_of(L.apply(u))) <= 1e-12 * lp_norm(u, 2)


def test_apply_mean_free_smooth_states_large_M():
    rng = np.random.default_rng(8)
    for M in (256, 512):
        L = PeriodicLaplacian(M)
        x = np.arange(1, M + 1) / M
        c = rng.standard_normal(7)
        u = c[0] + sum(
            c[k] * np.cos(2 * np.pi * k * x) + c[6 - k] * np.sin(2 * np.pi * k * x)
            for k in range(1, 4)
        )
        assert abs(mean_of(L.apply(u))) <= 1e-12 * lp_norm(u, 2)


def test_apply_dimension_mismatch():
    L = PeriodicLaplacian(5)
    with pytest.raises(DimensionMismatchError):
        L.apply(np.zeros(4))


def test_small_M_rejected():
    with pytest.raises(ValueError):
        PeriodicLaplacian(2)


def test_eigen_system_closed_form():
    lams = sorted(lam for _, lam in PeriodicLaplacian(3).eigen_system())
    np.testing.assert_allclose(lams, [0.0, 27.0, 27.0], rtol=1e-14)
    lams4 = sorted(lam for _, lam in PeriodicLaplacian(4).eigen_system())
    np.testing.assert_allclose(lams4, [0.0, 32.0, 32.0, 64.0], rtol=1e-14)


def test_eigen_system_matches_dense_eigensolve():
    for M in range(3, 65):
        L = PeriodicLaplacian(M)
        numeric = np.sort(np.linalg.eigvalsh(-L.dense_matrix()))
        closed = np.sort(L.eigenvalues)
        np.testing.assert_allclose(numeric, closed, rtol=1e-10, atol=1e-10 * M * M)
        assert closed[0] == 0.0
        assert closed[1] >= 16.0  # nonzero spectrum is bounded below by 16


def test_solve_poisson_zero():
    L = PeriodicLaplacian(6)
    np.testing.assert_array_equal(L.solve_poisson(np.zeros(6)), np.zeros(6))


def test_solve_poisson_eigenmode():
    L = PeriodicLaplacian(4)
    w = np.array([1.0, -1.0, 1.0, -1.0])
    np.testing.assert_allclose(L.solve_poisson(w), -w / 64.0, rtol=1e-13)


def test_solve_poisson_round_trip_and_dense_oracle():
    rng = np.random.default_rng(3)
    for M in (3, 5, 8, 33, 64):
        L = PeriodicLaplacian(M)
        w = tilde(rng.standard_normal(M))
        phi = L.solve_poisson(w)
        np.testing.assert_allclose(L.apply(phi), w, rtol=0, atol=1e-10 * lp_norm(w, 2) * M * M)
        assert abs(mean_of(phi)) < 1e-14 * max(1.0, lp_norm(phi, 2))
        # brute-force linear solve as oracle: pin the mean with a Lagrange row
        A = np.zeros((M + 1, M + 1))
        A[:M, :M] = L.dense_matrix()
        A[:M, M] = 1.0
        A[M, :M] = 1.0
        rhs = np.concatenate([w, [0.0]])
        phi_dense = np.linalg.solve(A, rhs)[:M]
        np.testing.assert_allclose(phi, phi_dense, atol=1e-10 * max(1.0, np.abs(phi_dense).max()))


def test_solve_poisson_rejects_nonzero_mean():
    L = PeriodicLaplacian(4)
    with pytest.raises(NonZeroMeanError):
        L.solve_poisson(np.array([1.0, 0.0, 0.0, 0.0]))


def test_mean_and_tilde_basics():
    u = np.array([1.0, 2.0, 3.0])
    assert mean_of(u) == 2.0
    np.testing.assert_allclose(tilde(u), [-1.0, 0.0, 1.0], atol=1e-15)
    c = np.full(5, -0.3)
    assert mean_of(c) == pytest.approx(-0.3)
    np.testing.assert_allclose(tilde(c), np.zeros(5), atol=1e-16)


def test_tilde_reconstruction_identity():
    rng = np.random.default_rng(11)
    for M in (3, 17, 256):
        u = rng.standard_normal(M) * 10.0
        back = tilde(u) + mean_of(u)
        np.testing.assert_allclose(back, u, rtol=1e-15, atol=1e-15)
        assert abs(mean_of(tilde(u))) < 1e-16 * max(1.0, np.abs(u).max())


def test_lp_norms():
    ones = np.ones(7)
    for p in (1, 2, 3.5, np.inf):
        assert lp_norm(ones, p) == pytest.approx(1.0)
    assert lp_norm(np.array([1.0, 0.0, 0.0, 0.0]), 2) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        lp_norm(ones, 0.5)


def test_inner_cauchy_schwarz():
    rng = np.random.default_rng(2)
    for _ in range(200):
        M = rng.integers(3, 64)
        u = rng.standard_normal(M)
        v = rng.standard_normal(M)
        assert abs(inner(u, v)) <= lp_norm(u, 2) * lp_norm(v, 2) * (1 + 1e-14)


def test_neg_sobolev_constants():
    L = PeriodicLaplacian(6)
    assert L.neg_sobolev_norm(np.full(6, -2.5)) == pytest.approx(2.5, rel=1e-14)


def test_neg_sobolev_eigenmode_value():
    # -(u | L^{-1} u)_M = ||u||^2 / 64 = 1/64 for the alternating mode at M=4
    L = PeriodicLaplacian(4)
    u = np.array([1.0, -1.0, 1.0, -1.0])
    assert L.neg_sobolev_norm(u) == pytest.approx(1.0 / 8.0, rel=1e-13)


def test_neg_sobolev_dominated_by_l2():
    rng = np.random.default_rng(5)
    for _ in range(500):
        M = int(rng.integers(3, 128))
        L = PeriodicLaplacian(M)
        u = rng.standard_normal(M) * rng.uniform(0.1, 10)
        assert L.neg_sobolev_norm(u) <= lp_norm(u, 2) * (1 + 1e-13)


def test_poincare_constant_one_zero_violations():
    # stated inequality ||tilde(phi)||_2 <= ||L phi||_2; proof constant is 1/16
    rng = np.random.default_rng(17)
    worst = 0.0
    for M in range(3, 257):
        L = PeriodicLaplacian(M)
        phi = rng.standard_normal((100, M))
        lap = np.roll(phi, -1, axis=1) + np.roll(phi, 1, axis=1) - 2.0 * phi
        lap *= float(M) ** 2
        tilded = phi - phi.mean(axis=1, keepdims=True)
        lhs = np.sqrt((tilded**2).mean(axis=1))
        rhs = np.sqrt((lap**2).mean(axis=1))
        assert np.all(lhs <= rhs)
        worst = max(worst, float(np.max(lhs / np.maximum(rhs, 1e-300))))
    assert worst <= 1.0 / 16.0 + 1e-12


def test_mass_matrix_constants_fixed():
    c = np.full(5, 4.2)
    np.testing.assert_allclose(apply_mass_matrix(c), c, rtol=1e-15)


def test_mass_matrix_alternating_mode():
    u = np.array([1.0, -1.0, 1.0, -1.0])
    np.testing.assert_allclose(apply_mass_matrix(u), u / 3.0, rtol=1e-15)


def test_mass_matrix_laplacian_identity():
    # 6 B u - 6 u = M^{-2} L u
    rng = np.random.default_rng(23)
    for M in (3, 4, 7, 32, 256):
        L = PeriodicLaplacian(M)
        u = rng.standard_normal(M)
        lhs = 6.0 * apply_mass_matrix(u) - 6.0 * u
        rhs = L.apply(u) / float(M) ** 2
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * max(1.0, np.abs(u).max()))


def test_mass_matrix_spectrum_bounds():
    rng = np.random.default_rng(29)
    for M in (3, 8, 33):
        u = rng.standard_normal(M)
        # Rayleigh quotient of the action stays within [1/3, 1]
        q = inner(u, apply_mass_matrix(u)) / inner(u, u)
        assert 1.0 / 3.0 - 1e-12 <= q <= 1.0 + 1e-12


def test_energy_identity_matches_hat_gradient_norm():
    # -(w | L w)_M equals the exact squared L2 norm of the derivative of
    # the piecewise-linear reconstruction of w
    from sktlab.reconstruct import PiecewiseLinear

    rng = np.random.default_rng(31)
    for M in (3, 4, 9, 64):
        L = PeriodicLaplacian(M)
        for _ in range(30):
            w = rng.standard_normal(M)
            lhs = -inner(w, L.apply(w))
            grad = PiecewiseLinear(w).derivative()
            rhs = grad.lp_norm(2) ** 2
            assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_neg_sobolev_time_derivative_second_order():
    # centered difference of ||w(t)||_{-1,M}^2 matches -2 (L^{-1} w | w')_M
    M = 16
    L = PeriodicLaplacian(M)
    x = np.arange(1, M + 1) / M
    mode1 = np.cos(2 * np.pi * x)
    mode2 = np.sin(4 * np.pi * x)

    def w(t):
        return math.cos(t) * mode1 + math.sin(2 * t) * mode2

    def wprime(t):
        return -math.sin(t) * mode1 + 2 * math.cos(2 * t) * mode2

    t0 = 0.37
    target = -2.0 * inner(L.solve_poisson(w(t0)), wprime(t0))
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        fd = (L.neg_sobolev_norm(w(t0 + h)) ** 2 - L.neg_sobolev_norm(w(t0 - h)) ** 2) / (2 * h)
        errs.append(abs(fd - target))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.2)
