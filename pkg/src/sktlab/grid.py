"""Periodic lattice Laplacian, its spectrum and pseudoinverse, and rescaled norms.

Vectors of length M live on the uniform grid of the unit torus with sites
x_k = k/M, k = 1..M (array index k-1); indices wrap periodically.  All norms
and inner products carry the 1/M rescaling, so that the constant vector has
unit norm for every p and every M.
"""

from __future__ import annotations

import math

import numpy as np


class DimensionMismatchError(ValueError):
    """Vector length does not match the operator's site count."""


class NonZeroMeanError(ValueError):
    """Input to the Poisson solve is not (numerically) mean-free."""


def mean_of(u) -> float:
    """Arithmetic average of the components, compensated summation."""
    u = np.asarray(u, dtype=float)
    return math.fsum(u) / u.size


def tilde(u) -> np.ndarray:
    """Projection onto the mean-free hyperplane: u - mean(u).

    A second correction pass drives the residual mean to the last ulp.
    """
    u = np.asarray(u, dtype=float)
    v = u - mean_of(u)
    return v - mean_of(v)


def lp_norm(u, p) -> float:
    """Rescaled l^p norm ((1/M) sum |u_i|^p)^(1/p); max norm for p = inf."""
    u = np.asarray(u, dtype=float)
    if p == np.inf or p == math.inf:
        return float(np.max(np.abs(u))) if u.size else 0.0
    if p < 1:
        raise ValueError(f"p must satisfy 1 <= p <= inf, got {p}")
    if p == 1:
        s = math.fsum(np.abs(u))
    elif p == 2:
        s = math.fsum(u * u)
    else:
        s = math.fsum(np.abs(u) ** p)
    return (s / u.size) ** (1.0 / p)


def inner(u, v) -> float:
    """Rescaled inner product (1/M) sum u_i v_i."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatchError(f"shapes {u.shape} and {v.shape} differ")
    return math.fsum(u * v) / u.size


class PeriodicLaplacian:
    """The M x M periodic second-difference operator scaled by M^2.

    Off-diagonal couplings are M^2 to the two periodic neighbours and the
    diagonal is -2 M^2; the kernel is the constants.  The spectrum and the
    mean-free pseudoinverse are handled in the real trigonometric eigenbasis
    (rfft), never through a dense solve.  Instances are immutable and safe
    to share.
    """

    def __init__(self, M: int):
        if M < 3:
            raise ValueError(f"site count must be >= 3, got {M}")
        self.M = int(M)
        k = np.arange(M)
        # eigenvalues of the *negated* operator: 4 M^2 sin^2(pi k / M)
        self.eigenvalues = 4.0 * M * M * np.sin(np.pi * k / M) ** 2
        self.eigenvalues[0] = 0.0
        # multipliers on the rfft side (k = 0 .. M//2)
        self._neg_eigs_rfft = self.eigenvalues[: M // 2 + 1].copy()
        self._inv_rfft = np.zeros(M // 2 + 1)
        self._inv_rfft[1:] = 1.0 / self._neg_eigs_rfft[1:]

    def _check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.M,):
            raise DimensionMismatchError(
                f"expected length {self.M}, got shape {u.shape}"
            )
        return u

    def apply(self, u) -> np.ndarray:
        """Second difference M^2 (u_{i+1} + u_{i-1} - 2 u_i), periodic.

        Evaluated in conservative flux form (difference of first
        differences) so the entries telescope and the mean stays near
        machine zero.
        """
        u = self._check(u)
        M = float(self.M)
        g = M * (np.roll(u, -1) - u)
        return M * (g - np.roll(g, 1))

    def eigen_system(self) -> list[tuple[int, float]]:
        """(k, 4 M^2 sin^2(pi k/M)) for k = 0..M-1, frequencies of -L."""
        return [(k, float(lam)) for k, lam in enumerate(self.eigenvalues)]

    def dense_matrix(self) -> np.ndarray:
        """Assembled dense matrix, for audits only."""
        M = self.M
        A = np.zeros((M, M))
        idx = np.arange(M)
        A[idx, idx] = -2.0
        A[idx, (idx + 1) % M] = 1.0
        A[idx, (idx - 1) % M] = 1.0
        return float(M) ** 2 * A

    def solve_poisson(self, w) -> np.ndarray:
        """Unique mean-zero Phi with L Phi = w; w must be mean-free.

        Raises NonZeroMeanError instead of silently projecting, so that
        bookkeeping errors in callers surface immediately.
        """
        w = self._check(w)
        scale = lp_norm(w, 2)
        if abs(mean_of(w)) > 1e-12 * max(scale, 1e-300):
            raise NonZeroMeanError(
                f"mean {mean_of(w):.3e} exceeds 1e-12 of the norm {scale:.3e}"
            )
        w_hat = np.fft.rfft(w)
        phi_hat = -w_hat * self._inv_rfft
        phi = np.fft.irfft(phi_hat, n=self.M)
        return phi - mean_of(phi)

    def neg_sobolev_norm(self, u) -> float:
        """sqrt(-(tilde u | L^{-1} tilde u)_M + mean(u)^2); always <= l2 norm."""
        u = self._check(u)
        m = mean_of(u)
        ut = tilde(u)
        phi = self.solve_poisson(ut)
        quad = -inner(ut, phi)
        return math.sqrt(max(quad, 0.0) + m * m)


def apply_mass_matrix(u) -> np.ndarray:
    """Circulant (2/3, 1/6) averaging: (2/3) u_i + (1/6)(u_{i-1} + u_{i+1}).

    Satisfies 6 B = M^{-2} L + 6 I; its spectrum lies in [1/3, 1].
    """
    u = np.asarray(u, dtype=float)
    if u.size < 3:
        raise ValueError("mass matrix needs at least 3 sites")
    return (2.0 / 3.0) * u + (1.0 / 6.0) * (np.roll(u, 1) + np.roll(u, -1))
