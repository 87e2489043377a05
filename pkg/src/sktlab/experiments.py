"""Seeded replica studies: gap scaling, convergence orders, QV matching, certificates.

Each study is deterministic given (config, seed): replica r uses the Philox
stream keyed by (seed, r), replicas are reduced in index order, and thread
fan-out cannot change any output byte.  Studies return StudyResult rows in
the documented CSV/JSON schema.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .duality import (
    EnvCoefficient,
    JumpPath,
    interp_vector,
    random_regular_instance,
    random_singular_instance,
    solve_kolmogorov,
    solve_kolmogorov_singular,
    stability_gap,
    verify_combined,
    verify_duality,
    verify_singular,
)
from .grid import PeriodicLaplacian, lp_norm, mean_of
from .kernel import BACKEND
from .params import ModelParams
from .reconstruct import trip_norm_discrete
from .results import StudyResult, StudyRow
from .semidiscrete import IntegratorConfig, integrate
from .walkers import CountsState, extract_martingale, predicted_qv, simulate_path

THREADS_ENV = "SKTLAB_THREADS"


class ConfigError(ValueError):
    """Invalid study configuration."""


class CertificateFailure(RuntimeError):
    """A hard certificate (per-time duality form) failed."""


class ReferenceUnresolved(RuntimeError):
    """Reference resolution M_ref fails its self-convergence audit."""


@dataclass
class StudyConfig:
    study: str
    d1: float = 1.0
    d2: float = 1.0
    a12: float = 0.1
    a21: float = 0.1
    M_values: tuple = (8,)
    N_values: tuple = (250, 1000, 4000)
    replicas: int = 64
    T: float = 0.05
    snapshots: int = 65
    seed: int = 0
    M_ref: int = 512
    target: tuple = (1.0, 1.0)     # constant reference densities
    eps: float = 0.05              # perturbation amplitude (det-order)
    eps_values: tuple = (1e-1, 1e-2, 1e-3)  # stability sweep
    n_regular: int = 100           # duality suite sizes
    n_singular: int = 50
    scale_floor: float = 4.0       # warn when N/M^2 drops below
    threads: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.replicas < 1 or self.snapshots < 2 or self.T <= 0:
            raise ConfigError("replicas >= 1, snapshots >= 2, T > 0 required")
        if any(m < 3 for m in self.M_values):
            raise ConfigError("all M values must be >= 3")
        if any(n < 1 for n in self.N_values):
            raise ConfigError("all N values must be >= 1")

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.d1, self.d2, self.a12, self.a21)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["M_values"] = list(self.M_values)
        d["N_values"] = list(self.N_values)
        d["target"] = list(self.target)
        d["eps_values"] = list(self.eps_values)
        return d


def effective_threads(config: StudyConfig) -> tuple[int, str | None]:
    """Thread budget, honoring the environment override; returns (n, override)."""
    override = os.environ.get(THREADS_ENV)
    if override:
        try:
            return max(1, int(override)), override
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV}={override!r} is not an integer") from exc
    return max(1, config.threads), None


def _metadata(config: StudyConfig) -> dict:
    n, override = effective_threads(config)
    return {"backend": BACKEND, "threads": n, "threads_env_override": override,
            "version": __version__}


def loglog_slope(xs, ys) -> tuple[float | None, float | None]:
    """OLS slope of log y against log x with its standard error.

    (None, None) when the fit is undefined: fewer than two points or
    nonpositive values.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 2 or np.any(ys <= 0) or np.any(xs <= 0):
        return None, None
    X = np.log(np.asarray(xs, dtype=float))
    Y = np.log(np.asarray(ys, dtype=float))
    n = X.size
    A = np.vstack([X, np.ones(n)]).T
    beta, *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = Y - A @ beta
    if n > 2:
        s2 = float(resid @ resid) / (n - 2)
        err = math.sqrt(s2 / float(((X - X.mean()) ** 2).sum()))
    else:
        err = float("nan")
    return float(beta[0]), err


def _gap_replica(args):
    (d1, d2, a12, a21, M, N, T, snapshots, seed, r, c1, c2) = args
    params = ModelParams(d1, d2, a12, a21)
    state = CountsState(N, np.full(M, int(round(N * c1))), np.full(M, int(round(N * c2))))
    sched = np.linspace(0.0, T, snapshots)
    path = simulate_path(state, params, sched, seed=(seed, r))
    lap = PeriodicLaplacian(M)
    Z = c1 - path.U
    W = c2 - path.V
    # mass-matched start: the mean channel stays pinned
    drift = abs(mean_of(Z[-1]) - mean_of(Z[0]))
    if drift > 1e-13 * max(1.0, abs(c1)):
        raise AssertionError(f"mean channel drifted by {drift:.3e}")
    gap = trip_norm_discrete(sched, Z, lap) ** 2 + trip_norm_discrete(sched, W, lap) ** 2
    return gap, path.event_count


def _replica_map(fn, tasks, threads: int):
    if threads <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def _check_constant_target(config: StudyConfig):
    c1, c2 = config.target
    params = config.params
    if c1 < 0 or c2 < 0:
        raise ConfigError("target densities must be nonnegative")
    if c1 * c2 >= params.smallness_bound:
        raise ConfigError(
            f"target product {c1 * c2} violates the smallness bound {params.smallness_bound}")


def run_gap_vs_N(config: StudyConfig) -> StudyResult:
    """Trip-norm-squared gap to a constant admissible target, N swept at fixed M.

    Constant targets solve the lattice system exactly with zero Taylor
    remainder, isolating the stochastic term; the fitted slope of the mean
    squared gap against N is the headline number (theory: an upper bound
    of order 1/N).
    """
    t0 = time.time()
    _check_constant_target(config)
    M = config.M_values[0]
    c1, c2 = config.target
    params = config.params
    threads, _ = effective_threads(config)
    rows = []
    means = []
    for N in config.N_values:
        tN = time.time()
        tasks = [(config.d1, config.d2, config.a12, config.a21, M, N, config.T,
                  config.snapshots, config.seed, r, c1, c2)
                 for r in range(config.replicas)]
        out = _replica_map(_gap_replica, tasks, threads)
        gaps = np.asarray([g for g, _ in out])
        events = np.asarray([e for _, e in out])
        mean = float(gaps.mean())
        means.append(mean)
        extra = {
            "scale_ratio": N / (M * M),
            "scale_floor_ok": bool(N / (M * M) >= config.scale_floor),
            "smallness_margin": params.smallness_margin(c1, c2),
            "c0_bound": c1 + c2,
            "mean_events": float(events.mean()),
            "lambda_T": (None if params.d1 == 0 else
                         config.T + config.T**2 * (params.d1 + params.a12 * c2) + 1.0 / params.d1),
            "gamma_T": (None if params.d2 == 0 else
                        config.T + config.T**2 * (params.d2 + params.a21 * c1) + 1.0 / params.d2),
        }
        rows.append(StudyRow(
            study="gap-vs-n", M=M, N=N, R=config.replicas, T=config.T, seed=config.seed,
            mean_sq_gap=mean, stderr=float(gaps.std(ddof=1) / math.sqrt(len(gaps))),
            slope=None, slope_err=None, runtime_s=time.time() - tN, extra=extra,
        ))
    slope, slope_err = loglog_slope(config.N_values, means)
    for r in rows:
        r.slope, r.slope_err = slope, slope_err
    return StudyResult(study="gap-vs-n", config=config.as_dict(), rows=rows,
                       slope=slope, slope_err=slope_err, seed=config.seed,
                       runtime_s=time.time() - t0, metadata=_metadata(config))


def _restrict(fine: np.ndarray, M: int) -> np.ndarray:
    """Nodal subsampling from a fine grid whose size M_ref is a multiple of M."""
    M_ref = fine.shape[-1]
    idx = (np.arange(1, M + 1) * (M_ref // M)) - 1
    return fine[..., idx]


def _reference_pair(config: StudyConfig, M_ref: int):
    c1, c2 = config.target
    x = np.arange(1, M_ref + 1) / M_ref
    u0 = c1 + config.eps * np.cos(2 * np.pi * x)
    v0 = c2 + config.eps * np.sin(2 * np.pi * x)
    sched = np.linspace(0.0, config.T, config.snapshots)
    return integrate(u0, v0, config.params, IntegratorConfig(snapshots=sched))


def _det_gap(config: StudyConfig, ref, M: int) -> float:
    sched = ref.times
    u0 = _restrict(ref.u[0], M)
    v0 = _restrict(ref.v[0], M)
    sol = integrate(u0, v0, config.params, IntegratorConfig(snapshots=sched))
    lap = PeriodicLaplacian(M)
    z = sol.u - _restrict(ref.u, M)
    w = sol.v - _restrict(ref.v, M)
    return trip_norm_discrete(sched, z, lap) ** 2 + trip_norm_discrete(sched, w, lap) ** 2


def run_deterministic_order(config: StudyConfig) -> StudyResult:
    """Squared trip-norm gap between coarse lattice solutions and a fine reference.

    The reference is a small smooth perturbation of admissible constants
    solved at M_ref; coarse runs are initialized by nodal sampling.  The
    squared gap is expected to scale like M^-4.
    """
    t0 = time.time()
    _check_constant_target(config)
    if any(config.M_ref % M for M in config.M_values):
        raise ConfigError("every M must divide M_ref")
    if config.M_ref % 2:
        raise ConfigError("M_ref must be even for the self-convergence audit")
    ref = _reference_pair(config, config.M_ref)
    # reference self-convergence, run against the half-resolution reference:
    # the halved reference carries ~4x the error, so the observed drift is
    # ~3x the reference's own share and 8% here matches a 2% doubling audit
    M_probe = max(config.M_values)
    ref_half = _reference_pair(config, config.M_ref // 2)
    g_full = _det_gap(config, ref, M_probe)
    g_half = _det_gap(config, ref_half, M_probe)
    drift = abs(g_full - g_half) / max(g_full, 1e-300)
    if drift > 0.08:
        raise ReferenceUnresolved(
            f"gap at M={M_probe} moves {drift:.1%} when halving M_ref={config.M_ref}")
    rows, gaps = [], []
    for M in config.M_values:
        tM = time.time()
        gap = _det_gap(config, ref, M)
        gaps.append(gap)
        rows.append(StudyRow(
            study="det-order", M=M, N=0, R=1, T=config.T, seed=config.seed,
            mean_sq_gap=gap, stderr=0.0, slope=None, slope_err=None,
            runtime_s=time.time() - tM,
            extra={"M_ref": config.M_ref, "eps": config.eps,
                   "reference_self_convergence": drift},
        ))
    slope, slope_err = loglog_slope(config.M_values, gaps)
    for r in rows:
        r.slope, r.slope_err = slope, slope_err
    return StudyResult(study="det-order", config=config.as_dict(), rows=rows,
                       slope=slope, slope_err=slope_err, seed=config.seed,
                       runtime_s=time.time() - t0, metadata=_metadata(config))


def _rough_replica(args):
    (d1, d2, a12, a21, M, N, T, snapshots, seed, r, c1, c2) = args
    params = ModelParams(d1, d2, a12, a21)
    state = CountsState(N, np.full(M, int(round(N * c1))), np.full(M, int(round(N * c2))))
    sched = np.linspace(0.0, T, snapshots)
    path = simulate_path(state, params, sched, seed=(seed, r))
    ode = integrate(state.n_u / N, state.n_v / N, params, IntegratorConfig(snapshots=sched))
    du = path.U - ode.u
    dv = path.V - ode.v
    sup_u = max(lp_norm(row, 2) ** 2 for row in du)
    sup_v = max(lp_norm(row, 2) ** 2 for row in dv)
    return sup_u + sup_v


def run_rough_estimate(config: StudyConfig) -> StudyResult:
    """Sup-in-time squared l2 gap to the lattice system from the same start.

    Means must decay in N; the fitted slope is reported and should beat
    the -0.5 guaranteed by the crude bound (the sharp rate is -1).
    """
    t0 = time.time()
    M = config.M_values[0]
    c1, c2 = config.target
    threads, _ = effective_threads(config)
    rows, means = [], []
    for N in config.N_values:
        tN = time.time()
        tasks = [(config.d1, config.d2, config.a12, config.a21, M, N, config.T,
                  config.snapshots, config.seed, r, c1, c2)
                 for r in range(config.replicas)]
        sups = np.asarray(_replica_map(_rough_replica, tasks, threads))
        means.append(float(sups.mean()))
        rows.append(StudyRow(
            study="rough", M=M, N=N, R=config.replicas, T=config.T, seed=config.seed,
            mean_sq_gap=float(sups.mean()),
            stderr=float(sups.std(ddof=1) / math.sqrt(len(sups))),
            slope=None, slope_err=None, runtime_s=time.time() - tN,
            extra={"scale_ratio": N / (M * M), "c0_bound": c1 + c2},
        ))
    slope, slope_err = loglog_slope(config.N_values, means)
    for r in rows:
        r.slope, r.slope_err = slope, slope_err
    monotone = all(a > b for a, b in zip(means[:-1], means[1:]))
    res = StudyResult(study="rough", config=config.as_dict(), rows=rows,
                      slope=slope, slope_err=slope_err, seed=config.seed,
                      runtime_s=time.time() - t0, metadata=_metadata(config))
    res.metadata["monotone_decay"] = monotone
    res.passed = monotone and slope is not None and slope <= -0.5
    return res


def _qv_replica(args):
    (d1, d2, a12, a21, M, N, T, snapshots, seed, r, c1, c2) = args
    params = ModelParams(d1, d2, a12, a21)
    state = CountsState(N, np.full(M, int(round(N * c1))), np.full(M, int(round(N * c2))))
    sched = np.linspace(0.0, T, snapshots)
    path = simulate_path(state, params, sched, seed=(seed, r))
    m_final = extract_martingale(path)[-1]
    qv_final = predicted_qv(path)[-1]
    return m_final, qv_final


def run_qv_study(config: StudyConfig) -> StudyResult:
    """Variance matching: squared noise against its predictable compensator.

    Per site, D_r = M_i(T)^2 - <M_i>(T) has zero mean; the per-site z-score
    of D over replicas is recorded, along with the martingale-mean z-score.
    """
    t0 = time.time()
    M = config.M_values[0]
    N = config.N_values[0]
    c1, c2 = config.target
    threads, _ = effective_threads(config)
    tasks = [(config.d1, config.d2, config.a12, config.a21, M, N, config.T,
              config.snapshots, config.seed, r, c1, c2)
             for r in range(config.replicas)]
    out = _replica_map(_qv_replica, tasks, threads)
    R = config.replicas
    m = np.asarray([o[0] for o in out])           # (R, M)
    qv = np.asarray([o[1] for o in out])
    D = m**2 - qv
    z_var = D.mean(axis=0) / (D.std(axis=0, ddof=1) / math.sqrt(R))
    z_mean = m.mean(axis=0) / (m.std(axis=0, ddof=1) / math.sqrt(R))
    frac_ok = float(np.mean(np.abs(z_var) <= 3.0))
    rows = [StudyRow(
        study="qv", M=M, N=N, R=R, T=config.T, seed=config.seed,
        mean_sq_gap=float((m**2).mean()), stderr=float(D.std(ddof=1) / math.sqrt(R * M)),
        slope=None, slope_err=None, runtime_s=time.time() - t0,
        extra={"z_var_per_site": [float(z) for z in z_var],
               "z_mean_per_site": [float(z) for z in z_mean],
               "frac_sites_z_le_3": frac_ok,
               "mean_predicted_qv": float(qv.mean())},
    )]
    res = StudyResult(study="qv", config=config.as_dict(), rows=rows,
                      slope=None, slope_err=None, seed=config.seed,
                      runtime_s=time.time() - t0, metadata=_metadata(config))
    res.passed = frac_ok >= 0.95 and bool(np.all(np.abs(z_mean) <= 4.0))
    return res


def run_duality_suite(config: StudyConfig) -> StudyResult:
    """Randomized certification sweep of the regular and singular estimates.

    Any per-time certificate failure is a hard study failure; singular
    ratios are archived together with their step-halving stability.
    """
    t0 = time.time()
    rng = np.random.default_rng(config.seed)
    rows = []
    failures = 0
    a_grid = (0.1, 1.0, 10.0)
    for i in range(config.n_regular):
        inst = random_regular_instance(rng)
        sol = solve_kolmogorov(inst.z0, inst.env, inst.f, inst.r, inst.snapshots)
        a = a_grid[i % len(a_grid)] if i < 3 * len(a_grid) else inst.a
        rep = verify_duality(sol, inst.env, inst.f, inst.r, a)
        if not rep.per_time_pass:
            failures += 1
        rows.append(StudyRow(
            study="duality", M=len(inst.z0), N=0, R=1, T=float(inst.snapshots[-1]),
            seed=config.seed, mean_sq_gap=rep.per_time_min_slack, stderr=None,
            slope=None, slope_err=None, runtime_s=0.0,
            extra={"kind": "regular", "a": a, "alpha": inst.env.alpha,
                   "per_time_pass": rep.per_time_pass, "stated_pass": rep.stated_pass,
                   "slack": rep.slack},
        ))
    ratio_max = 0.0
    for i in range(config.n_singular):
        inst = random_singular_instance(rng)
        s1 = solve_kolmogorov_singular(inst.env, inst.x_d, inst.snapshots, 1.0)
        r1 = verify_singular(s1, inst.env, inst.x_d)
        s2 = solve_kolmogorov_singular(inst.env, inst.x_d, inst.snapshots, 0.5)
        r2 = verify_singular(s2, inst.env, inst.x_d)
        change = abs(r2.ratio - r1.ratio) / max(abs(r1.ratio), 1e-300)
        ratio_max = max(ratio_max, r1.ratio)
        rows.append(StudyRow(
            study="duality", M=inst.x_d.x0.size, N=0, R=1, T=float(inst.snapshots[-1]),
            seed=config.seed, mean_sq_gap=r1.ratio, stderr=None,
            slope=None, slope_err=None, runtime_s=0.0,
            extra={"kind": "singular", "ratio": r1.ratio, "step_halving_change": change,
                   "stable": bool(change <= 0.05)},
        ))
    res = StudyResult(study="duality", config=config.as_dict(), rows=rows,
                      slope=None, slope_err=None, seed=config.seed,
                      runtime_s=time.time() - t0, metadata=_metadata(config))
    res.metadata["regular_failures"] = failures
    res.metadata["singular_ratio_max"] = ratio_max
    res.passed = failures == 0
    if failures:
        raise CertificateFailure(f"{failures} per-time certificates failed")
    return res


def run_stability_sweep(config: StudyConfig) -> StudyResult:
    """Gap-to-initial-data ratio for eigenmode perturbations across eps and M."""
    t0 = time.time()
    _check_constant_target(config)
    c1, c2 = config.target
    params = config.params
    margin_factor = params.smallness_bound / max(c1 * c2, 1e-300)
    sched = np.linspace(0.0, config.T, config.snapshots)
    rows, ratios = [], []
    for M in config.M_values:
        x = np.arange(1, M + 1) / M
        ref = integrate(np.full(M, c1), np.full(M, c2), params,
                        IntegratorConfig(snapshots=sched))
        for eps in config.eps_values:
            u0 = c1 + eps * np.cos(2 * np.pi * x)
            other = integrate(u0, np.full(M, c2), params, IntegratorConfig(snapshots=sched))
            rep = stability_gap(ref, other, params)
            ratios.append(rep.ratio)
            rows.append(StudyRow(
                study="stability", M=M, N=0, R=1, T=config.T, seed=config.seed,
                mean_sq_gap=rep.gap_sq, stderr=None, slope=None, slope_err=None,
                runtime_s=0.0,
                extra={"eps": eps, "ratio": rep.ratio, "bracket": rep.bracket,
                       "certified": rep.certified, "margin_factor": margin_factor},
            ))
    spread = max(ratios) / min(ratios)
    res = StudyResult(study="stability", config=config.as_dict(), rows=rows,
                      slope=None, slope_err=None, seed=config.seed,
                      runtime_s=time.time() - t0, metadata=_metadata(config))
    res.metadata["ratio_spread"] = spread
    res.metadata["margin_factor"] = margin_factor
    res.passed = spread <= 2.0 and margin_factor >= 10.0
    return res


@dataclass
class GapDecomposition:
    """Gap system pieces between a target lattice path and a stochastic path."""

    times: np.ndarray
    Z: np.ndarray          # target u minus stochastic U, per snapshot
    W: np.ndarray
    env_u: np.ndarray      # d1 + a12 V along the stochastic path
    env_v: np.ndarray      # d2 + a21 U
    F_u: np.ndarray        # a12 * target_u ⊙ W (coupling forcing for Z)
    F_v: np.ndarray        # a21 * target_v ⊙ Z
    mart_u: np.ndarray
    mart_v: np.ndarray
    lambda_T: float
    gamma_T: float


def build_gap_decomposition(path, target_u, target_v, params: ModelParams) -> GapDecomposition:
    """Assemble the coupled gap system from a stochastic path and a target path.

    target_u/target_v are (S, M) snapshot arrays of the reference lattice
    solution on the same schedule.
    """
    Z = target_u - path.U
    W = target_v - path.V
    env_u = params.d1 + params.a12 * path.V
    env_v = params.d2 + params.a21 * path.U
    if env_u.min() < params.d1 - 1e-15 or env_v.min() < params.d2 - 1e-15:
        raise AssertionError("environment dropped below its diffusion floor")
    T = float(path.times[-1])
    lam = T + T**2 * (params.d1 + params.a12 * mean_of(path.V[0])) + 1.0 / params.d1
    gam = T + T**2 * (params.d2 + params.a21 * mean_of(path.U[0])) + 1.0 / params.d2
    return GapDecomposition(
        times=path.times, Z=Z, W=W, env_u=env_u, env_v=env_v,
        F_u=params.a12 * target_u * W, F_v=params.a21 * target_v * Z,
        mart_u=extract_martingale(path, 1), mart_v=extract_martingale(path, 2),
        lambda_T=lam, gamma_T=gam,
    )


def certify_gap_instance(path, target_u, target_v, params: ModelParams, a: float = 1.0):
    """End-to-end combined certificate for the species-1 gap of one run.

    The martingale is known at snapshot resolution, so the singular drive is
    the cadlag staircase through -mart_u and the environment/coupling are
    snapshot-interpolated; the combined estimate holds for that system.
    """
    dec = build_gap_decomposition(path, target_u, target_v, params)
    env = EnvCoefficient(mu=interp_vector(dec.times, dec.env_u), alpha=params.d1,
                         mu_max=float(dec.env_u.max()))
    f = interp_vector(dec.times, dec.F_u)
    x_d = JumpPath.from_snapshots(dec.times, -dec.mart_u)
    return verify_combined(dec.Z[0], env, f, None, None, x_d, a=a, snapshots=dec.times)


RUNNERS = {
    "gap-vs-n": run_gap_vs_N,
    "det-order": run_deterministic_order,
    "rough": run_rough_estimate,
    "qv": run_qv_study,
    "duality": run_duality_suite,
    "stability": run_stability_sweep,
}
