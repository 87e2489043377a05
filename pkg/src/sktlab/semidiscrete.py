"""Large-population limit on a fixed lattice: coupled ODE system and integrator.

The pair (u, v) evolves by u' = L(d1 u + a12 u*v), v' = L(d2 v + a21 u*v)
where L is the periodic lattice Laplacian.  Integration is classical
fourth-order Runge-Kutta with a fixed step sized from the spectral radius,
subdivided so that every requested snapshot time is hit exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import PeriodicLaplacian
from .params import ModelParams


@dataclass(frozen=True)
class IntegratorConfig:
    snapshots: np.ndarray
    step_scale: float = 1.0        # multiplies the stability step, for Richardson checks
    negativity: str = "warn"       # "warn" | "reject"

    def __post_init__(self):
        t = np.asarray(self.snapshots, dtype=float)
        if t.size < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("snapshots must be increasing and start at 0")
        if self.step_scale <= 0:
            raise ValueError("step_scale must be positive")
        if self.negativity not in ("warn", "reject"):
            raise ValueError(f"unknown negativity policy {self.negativity!r}")
        object.__setattr__(self, "snapshots", t)


@dataclass
class OdePath:
    times: np.ndarray
    u: np.ndarray  # (n_times, M)
    v: np.ndarray


def rhs(u, v, params: ModelParams, lap: PeriodicLaplacian):
    """Right-hand side (L(d1 u + a12 u*v), L(d2 v + a21 u*v))."""
    uv = u * v
    du = lap.apply(params.d1 * u + params.a12 * uv)
    dv = lap.apply(params.d2 * v + params.a21 * uv)
    return du, dv


def stability_step(M: int, mu_max: float, scale: float = 1.0) -> float:
    """dt = scale * 0.5 / (4 M^2 mu_max): keeps lambda*dt at 0.5, well inside RK4."""
    return scale * 0.5 / (4.0 * M * M * max(mu_max, 1e-300))


def _check_negativity(u, v, policy: str, t: float):
    low = min(float(u.min()), float(v.min()))
    if low < -1e-12:
        msg = f"negative component {low:.3e} at t = {t:.6g}"
        if policy == "reject":
            raise ValueError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)


def integrate(u0, v0, params: ModelParams, config: IntegratorConfig,
              lap: PeriodicLaplacian | None = None) -> OdePath:
    """RK4 path of the lattice system through the requested snapshot times.

    The step is recomputed from the sup-norm bounds at snapshot boundaries
    only; means of both components are conserved by construction.
    """
    u = np.array(u0, dtype=float)
    v = np.array(v0, dtype=float)
    M = u.size
    if v.size != M:
        raise ValueError("u0 and v0 must have equal length")
    if lap is None:
        lap = PeriodicLaplacian(M)
    times = config.snapshots
    us = [u.copy()]
    vs = [v.copy()]
    for t0, t1 in zip(times[:-1], times[1:]):
        mu_max = max(params.d1 + params.a12 * float(np.abs(v).max()),
                     params.d2 + params.a21 * float(np.abs(u).max()))
        dt_max = stability_step(M, mu_max, config.step_scale)
        n = max(1, math.ceil((t1 - t0) / dt_max))
        dt = (t1 - t0) / n
        for _ in range(n):
            k1u, k1v = rhs(u, v, params, lap)
            k2u, k2v = rhs(u + 0.5 * dt * k1u, v + 0.5 * dt * k1v, params, lap)
            k3u, k3v = rhs(u + 0.5 * dt * k2u, v + 0.5 * dt * k2v, params, lap)
            k4u, k4v = rhs(u + dt * k3u, v + dt * k3v, params, lap)
            u = u + (dt / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
            v = v + (dt / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        _check_negativity(u, v, config.negativity, t1)
        us.append(u.copy())
        vs.append(v.copy())
    return OdePath(times=times.copy(), u=np.asarray(us), v=np.asarray(vs))


def exact_decoupled_mode(c: float, eps: float, k: int, d: float, M: int, t: float) -> np.ndarray:
    """Analytic solution of the decoupled lattice heat flow for one cosine mode.

    c + eps exp(-d lambda_k t) cos(2 pi k x_j), lambda_k = 4 M^2 sin^2(pi k / M).
    """
    if not 0 <= k < M:
        raise ValueError(f"mode index k = {k} outside [0, {M})")
    lam = 4.0 * M * M * math.sin(math.pi * k / M) ** 2
    x = np.arange(1, M + 1) / M
    return c + eps * math.exp(-d * lam * t) * np.cos(2 * np.pi * k * x)
