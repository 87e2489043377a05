"""Reconstruction of torus functions from grid vectors, and the norms built on them.

A length-M vector u (sites x_k = k/M) induces a step function (value u_k on
the half-open cell (x_{k-1}, x_k]) and a continuous piecewise-linear function
(nodal value u_k at x_k, affine between nodes).  Fine-grid resampling and
DFT-based Sobolev norms support comparing different resolutions; the two
trip norms combine a sup-in-time negative norm with a space-time L2 term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import PeriodicLaplacian, lp_norm, mean_of


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant reconstruction; value u_k on the cell (x_{k-1}, x_k]."""

    values: np.ndarray

    @property
    def M(self) -> int:
        return len(self.values)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        M = self.M
        # cell index: smallest k with x <= k/M, i.e. ceil(x*M), snapped at nodes
        t = np.mod(x, 1.0) * M
        k = np.ceil(t - 1e-12 * M).astype(int)
        k = np.where(k <= 0, M, k)
        return np.asarray(self.values)[k - 1]

    def lp_norm(self, p) -> float:
        """L^p(T) norm of the step function; equals the rescaled vector norm."""
        return lp_norm(self.values, p)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous periodic broken-line reconstruction through the nodal values."""

    values: np.ndarray

    @property
    def M(self) -> int:
        return len(self.values)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        M = self.M
        vals = np.asarray(self.values, dtype=float)
        t = np.mod(x, 1.0) * M
        # snap to nodes so nodal evaluation is exact despite the x*M rounding
        near = np.rint(t)
        t = np.where(np.abs(t - near) <= 16 * np.finfo(float).eps * M, near, t)
        t = np.mod(t, M)
        j = np.floor(t).astype(int)  # left node index, node 0 == node M
        frac = t - j
        left = vals[(j - 1) % M]
        right = vals[j % M]
        out = left * (1.0 - frac) + right * frac
        return out if out.shape else float(out)

    def derivative(self) -> StepFunction:
        """Exact derivative: step function with value M (u_{k+1} - u_k) on cell k."""
        v = np.asarray(self.values, dtype=float)
        d = float(self.M) * (np.roll(v, -1) - v)
        # derivative on cell (x_{k-1}, x_k] is M (u_k - u_{k-1})
        return StepFunction(np.roll(d, 1))

    def lp_norm(self, p) -> float:
        """Exact L^1 or L^2 norm by closed-form integration per cell."""
        v = np.asarray(self.values, dtype=float)
        a = v
        b = np.roll(v, -1)
        M = self.M
        if p == 2:
            cells = (a * a + a * b + b * b) / 3.0
            return math.sqrt(math.fsum(cells) / M)
        if p == 1:
            same = np.abs(a + b) / 2.0
            denom = np.abs(a - b)
            crossing = np.where(denom > 0, (a * a + b * b) / np.where(denom > 0, 2 * denom, 1.0), 0.0)
            cells = np.where(a * b >= 0, same, crossing)
            return math.fsum(cells) / M
        raise ValueError(f"closed-form norm only for p in (1, 2), got {p}")


def interpolate_nodal(f, M: int) -> np.ndarray:
    """Sample a callable on the grid nodes x_k = k/M, k = 1..M."""
    x = np.arange(1, M + 1) / M
    return np.asarray([float(f(xi)) for xi in x])


@dataclass(frozen=True)
class FineGridFunction:
    """Uniform samples on the torus at resolution M_ref (sample points k/M_ref)."""

    samples: np.ndarray

    @property
    def M_ref(self) -> int:
        return len(self.samples)

    def l2_norm(self) -> float:
        return lp_norm(self.samples, 2)

    def mean(self) -> float:
        return mean_of(self.samples)


def resample(u, M_ref: int, mode: str = "step") -> FineGridFunction:
    """Samples of the step or linear reconstruction of u on the fine grid.

    M must divide M_ref so coarse cells and nodes align with fine samples;
    step-mode fine norms then reproduce the coarse vector norms exactly.
    """
    u = np.asarray(u, dtype=float)
    M = len(u)
    if M_ref % M != 0:
        raise ValueError(f"M = {M} must divide M_ref = {M_ref}")
    r = M_ref // M
    if mode == "step":
        return FineGridFunction(np.repeat(u, r))
    if mode == "linear":
        # integer arithmetic keeps shared nodes exact
        j = np.arange(1, M_ref + 1)
        q, rem = np.divmod(j, r)
        left = u[(q - 1) % M]
        right = u[q % M]
        frac = rem / r
        return FineGridFunction(np.where(rem == 0, u[(q - 1) % M], left * (1 - frac) + right * frac))
    raise ValueError(f"mode must be 'step' or 'linear', got {mode!r}")


def fourier_sobolev_norm(F: FineGridFunction, s: float, homogeneous: bool = False,
                         remove_mean: bool = False) -> float:
    """H^s norm from the DFT of the samples, truncated at the Nyquist frequency.

    Inhomogeneous weights (1 + k^2)^s; homogeneous weights k^{2s} over k != 0.
    A homogeneous norm with s < 0 of non-mean-free input is refused unless
    mean removal is requested explicitly.
    """
    samples = np.asarray(F.samples, dtype=float)
    n = samples.size
    if homogeneous and s < 0 and not remove_mean:
        m = mean_of(samples)
        if abs(m) > 1e-10:
            raise ValueError(
                f"homogeneous norm with s < 0 needs mean-free input (mean {m:.3e}); "
                "pass remove_mean=True to project"
            )
    c = np.fft.rfft(samples) / n
    k = np.arange(c.size)
    mult = np.full(c.size, 2.0)
    mult[0] = 1.0
    if n % 2 == 0:
        mult[-1] = 1.0
    power = np.abs(c) ** 2 * mult
    if homogeneous:
        terms = power[1:] * (k[1:].astype(float) ** (2 * s))
    else:
        terms = power * (1.0 + k.astype(float) ** 2) ** s
        if remove_mean:
            terms = terms[1:]
    return math.sqrt(math.fsum(terms))


def _check_schedule(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        raise ValueError("need at least two snapshot times")
    if times[0] != 0.0:
        raise ValueError(f"schedule must start at 0, got {times[0]}")
    if np.any(np.diff(times) <= 0):
        raise ValueError("snapshot times must be strictly increasing")
    return times


def trip_norm_continuous(times, samples) -> float:
    """sqrt(max_t ||.||_{H^-1}^2 + trapezoidal integral of ||.||_{L^2}^2).

    `samples` is (n_times, M_ref): fine-grid snapshots on [0, T].
    """
    times = _check_schedule(times)
    samples = np.asarray(samples, dtype=float)
    hneg = [fourier_sobolev_norm(FineGridFunction(row), -1.0) ** 2 for row in samples]
    l2sq = np.array([lp_norm(row, 2) ** 2 for row in samples])
    integral = float(np.trapezoid(l2sq, times))
    return math.sqrt(max(hneg) + integral)


def trip_norm_discrete(times, vectors, lap: PeriodicLaplacian | None = None) -> float:
    """sqrt(max_t ||.||_{-1,M}^2 + trapezoidal integral of the step-function L^2^2)."""
    times = _check_schedule(times)
    vectors = np.asarray(vectors, dtype=float)
    M = vectors.shape[1]
    if lap is None:
        lap = PeriodicLaplacian(M)
    neg = [lap.neg_sobolev_norm(row) ** 2 for row in vectors]
    l2sq = np.array([lp_norm(row, 2) ** 2 for row in vectors])
    integral = float(np.trapezoid(l2sq, times))
    return math.sqrt(max(neg) + integral)
