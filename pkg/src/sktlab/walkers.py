"""Exact event-driven simulation of the scaled repulsive two-species walk.

Integer per-site counts are the source of truth; densities are the derived
views n/N.  A species-1 individual at site j jumps at total rate
2 M^2 n_u[j] (d1 + a12 n_v[j]/N), direction +-1 with probability 1/2 each
(and symmetrically for species 2).  Paths carry exactly-accumulated time
integrals of the per-site loads g1 = U (d1 + a12 V), g2 = V (d2 + a21 U),
from which both the drift integrals and the predictable quadratic variation
are assembled without quadrature error.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ._simpy import _fen_add, _fen_build, _fen_find
from .grid import PeriodicLaplacian
from .kernel import get_kernel
from .params import ModelParams


class FrozenStateError(RuntimeError):
    """step() called on a state with zero total jump rate."""


@dataclass
class CountsState:
    N: int
    n_u: np.ndarray
    n_v: np.ndarray

    def __post_init__(self):
        self.n_u = np.asarray(self.n_u, dtype=np.int64)
        self.n_v = np.asarray(self.n_v, dtype=np.int64)
        if self.n_u.shape != self.n_v.shape or self.n_u.ndim != 1:
            raise ValueError("count vectors must be 1-d and of equal length")
        if self.N <= 0:
            raise ValueError("N must be a positive integer")
        if (self.n_u < 0).any() or (self.n_v < 0).any():
            raise ValueError("counts must be nonnegative")

    @property
    def M(self) -> int:
        return len(self.n_u)

    @property
    def U(self) -> np.ndarray:
        return self.n_u / self.N

    @property
    def V(self) -> np.ndarray:
        return self.n_v / self.N

    def copy(self) -> "CountsState":
        return CountsState(self.N, self.n_u.copy(), self.n_v.copy())


def init_from_density(u0, v0, N: int, M: int | None = None) -> CountsState:
    """Counts n = round(N * profile(x_k)) with ties-to-even.

    Profiles may be callables on the torus or length-M vectors; they must be
    nonnegative.  Deterministic rounding is one admissible choice of initial
    law for almost-surely bounded initial data.
    """
    def sample(p):
        if callable(p):
            if M is None:
                raise ValueError("M is required when profiles are callables")
            x = np.arange(1, M + 1) / M
            return np.asarray([float(p(xi)) for xi in x])
        return np.asarray(p, dtype=float)

    pu, pv = sample(u0), sample(v0)
    if (pu < 0).any() or (pv < 0).any():
        raise ValueError("density profiles must be nonnegative")
    return CountsState(N, np.rint(N * pu).astype(np.int64), np.rint(N * pv).astype(np.int64))


def channel_weights(state: CountsState, params: ModelParams) -> np.ndarray:
    """Fresh per-channel jump rates: species-1 channels first, then species-2."""
    M, N = state.M, state.N
    scale = 2.0 * M * M * N
    g1 = (state.n_u / N) * (params.d1 + params.a12 * (state.n_v / N))
    g2 = (state.n_v / N) * (params.d2 + params.a21 * (state.n_u / N))
    return scale * np.concatenate([g1, g2])


class RateTree:
    """Prefix-sum (Fenwick) tree over the 2M jump channels of a state."""

    def __init__(self, state: CountsState, params: ModelParams):
        self.M = state.M
        self.n = 2 * state.M
        self.w = [float(x) for x in channel_weights(state, params)]
        self.fen = _fen_build(self.w)
        self.top_bit = 1 << (self.n.bit_length() - 1)
        self.total = 0.0
        for x in self.w:
            self.total += x

    def leaf_weights(self) -> np.ndarray:
        return np.asarray(self.w)

    def set_weight(self, ch: int, new: float):
        delta = new - self.w[ch]
        self.w[ch] = new
        _fen_add(self.fen, self.n, ch + 1, delta)
        self.total += delta

    def refresh_sites(self, state: CountsState, params: ModelParams, sites):
        """Recompute the four channels touched by a move of/into `sites`."""
        N = state.N
        scale = 2.0 * self.M * self.M * N
        for i in sites:
            g1 = (int(state.n_u[i]) / N) * (params.d1 + params.a12 * (int(state.n_v[i]) / N))
            g2 = (int(state.n_v[i]) / N) * (params.d2 + params.a21 * (int(state.n_u[i]) / N))
            self.set_weight(i, scale * g1)
            self.set_weight(self.M + i, scale * g2)

    def sample(self, r: float) -> tuple[int, int]:
        """Channel containing cumulative weight r: (species in {1,2}, site)."""
        ch = _fen_find(self.fen, self.n, self.top_bit, r)
        if ch >= self.n:
            ch = self.n - 1
        guard = 0
        while self.w[ch] <= 0.0 and guard < self.n:
            ch = (ch + 1) % self.n
            guard += 1
        if guard == self.n:
            raise FrozenStateError("all channel weights are zero")
        return (1, ch) if ch < self.M else (2, ch - self.M)

    def rebuild(self):
        self.fen = _fen_build(self.w)
        self.total = 0.0
        for x in self.w:
            self.total += x


@dataclass(frozen=True)
class JumpEvent:
    dt: float
    species: int
    site: int
    direction: int


def step(state: CountsState, tree: RateTree, params: ModelParams, rng) -> JumpEvent:
    """One exact jump: exponential waiting time, channel by weight, fair direction.

    Mutates `state` and `tree` in place.
    """
    if tree.total <= 0.0:
        raise FrozenStateError("total jump rate is zero")
    dt = rng.standard_exponential() / tree.total
    species, j = tree.sample(rng.random() * tree.total)
    theta = 1 if rng.random() < 0.5 else -1
    j2 = (j + theta) % state.M
    counts = state.n_u if species == 1 else state.n_v
    counts[j] -= 1
    counts[j2] += 1
    if counts[j] < 0:
        raise AssertionError(f"negative count at site {j}")
    tree.refresh_sites(state, params, (j, j2))
    return JumpEvent(dt=dt, species=species, site=j, direction=theta)


@dataclass
class EventLog:
    times: np.ndarray
    species: np.ndarray
    sites: np.ndarray
    directions: np.ndarray

    def __len__(self):
        return len(self.times)


@dataclass
class PathRecord:
    """Snapshots of a simulated path plus exact load integrals.

    gu_int[s] / gv_int[s] hold the componentwise integrals of g1 / g2 over
    [0, times[s]], accumulated exactly between events (the integrand is
    piecewise constant); the drift integrals are their image under the
    lattice Laplacian.
    """

    params: ModelParams
    N: int
    times: np.ndarray
    n_u: np.ndarray        # (S, M) int64
    n_v: np.ndarray
    gu_int: np.ndarray     # (S, M) float
    gv_int: np.ndarray
    event_count: int
    leaf_weights: np.ndarray
    seed: object = None
    events: EventLog | None = None

    @property
    def M(self) -> int:
        return self.n_u.shape[1]

    @property
    def U(self) -> np.ndarray:
        return self.n_u / self.N

    @property
    def V(self) -> np.ndarray:
        return self.n_v / self.N

    def drift_integrals(self, species: int = 1,
                        lap: PeriodicLaplacian | None = None) -> np.ndarray:
        """(S, M) array of integral_0^{t_s} L(g_species) ds."""
        if lap is None:
            lap = PeriodicLaplacian(self.M)
        g = self.gu_int if species == 1 else self.gv_int
        return np.asarray([lap.apply(row) for row in g])


def simulate_path(state0: CountsState, params: ModelParams, schedule, seed,
                  collect_events: bool = False, backend: str | None = None) -> PathRecord:
    """Exact path on [0, schedule[-1]] with snapshots at the scheduled times.

    Reproducible: the Philox stream is fully determined by `seed` (an int or
    a tuple such as (study_seed, replica)), independent of backend.
    """
    schedule = np.asarray(schedule, dtype=float)
    if schedule.size < 1 or schedule[0] != 0.0 or np.any(np.diff(schedule) < 0):
        raise ValueError("schedule must be sorted and start at 0")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    kern = get_kernel(backend)
    out = kern.run_path(
        state0.n_u, state0.n_v, state0.M, state0.N,
        params.d1, params.d2, params.a12, params.a21,
        schedule, rng, collect_events,
    )
    snap_nu, snap_nv, snap_gu, snap_gv, count, leaves, ev_t, ev_sp, ev_site, ev_dir = out
    # totals are conserved exactly; check every snapshot
    tot_u, tot_v = int(state0.n_u.sum()), int(state0.n_v.sum())
    if not (np.all(snap_nu.sum(axis=1) == tot_u) and np.all(snap_nv.sum(axis=1) == tot_v)):
        raise AssertionError("integer mass conservation violated")
    events = EventLog(ev_t, ev_sp, ev_site, ev_dir) if collect_events else None
    return PathRecord(
        params=params, N=state0.N, times=schedule.copy(),
        n_u=snap_nu, n_v=snap_nv, gu_int=snap_gu, gv_int=snap_gv,
        event_count=count, leaf_weights=leaves, seed=seed, events=events,
    )


def extract_martingale(path: PathRecord, species: int = 1,
                       lap: PeriodicLaplacian | None = None) -> np.ndarray:
    """(S, M) noise part: density(t) - density(0) - accumulated drift integral."""
    dens = path.U if species == 1 else path.V
    return dens - dens[0] - path.drift_integrals(species, lap)


def predicted_qv(path: PathRecord, site: int | None = None, species: int = 1) -> np.ndarray | float:
    """Pathwise predictable quadratic variation of the per-site noise.

    (M^2/N) * (2 G_i + G_{i+1} + G_{i-1}) with G the exact load integrals;
    scalar at the final time for a given site, else the full (S, M) array.
    """
    g = path.gu_int if species == 1 else path.gv_int
    M = path.M
    qv = (float(M) ** 2 / path.N) * (2.0 * g + np.roll(g, -1, axis=1) + np.roll(g, 1, axis=1))
    if site is None:
        return qv
    return float(qv[-1, site % M])


_LOG_MAGIC = b"SKTE"
_LOG_VERSION = 1
_HEADER = struct.Struct("<4sHIQdddd")
_RECORD_DTYPE = np.dtype([("t", "<f8"), ("species", "u1"), ("site", "<i4"), ("dir", "i1")])


def write_event_log(path: PathRecord, fileobj):
    """Binary dump: header (version, params) + one 14-byte record per event.

    Record layout, little-endian: time f64, species u8, site i32 (0-based),
    direction i8.
    """
    if path.events is None:
        raise ValueError("path was simulated without collect_events")
    ev = path.events
    fileobj.write(_HEADER.pack(
        _LOG_MAGIC, _LOG_VERSION, path.M, path.N,
        path.params.d1, path.params.d2, path.params.a12, path.params.a21,
    ))
    fileobj.write(struct.pack("<Q", len(ev)))
    rec = np.zeros(len(ev), dtype=_RECORD_DTYPE)
    rec["t"] = ev.times
    rec["species"] = ev.species
    rec["site"] = ev.sites
    rec["dir"] = ev.directions
    fileobj.write(rec.tobytes())


def read_event_log(fileobj):
    """Parse a dump produced by write_event_log: (header dict, EventLog)."""
    raw = fileobj.read(_HEADER.size)
    magic, version, M, N, d1, d2, a12, a21 = _HEADER.unpack(raw)
    if magic != _LOG_MAGIC or version != _LOG_VERSION:
        raise ValueError("not a recognized event log")
    (count,) = struct.unpack("<Q", fileobj.read(8))
    rec = np.frombuffer(fileobj.read(count * _RECORD_DTYPE.itemsize), dtype=_RECORD_DTYPE)
    header = {"M": M, "N": N, "d1": d1, "d2": d2, "a12": a12, "a21": a21}
    log = EventLog(rec["t"].copy(), rec["species"].copy(), rec["site"].copy(),
                   rec["dir"].astype(np.int8))
    return header, log
