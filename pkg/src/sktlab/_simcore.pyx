# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loop for the two-species lattice walk.

Operation-for-operation mirror of _simpy.run_path: same Fenwick layout, same
Kahan compensation, same RNG block consumption, so both backends produce
bitwise-identical paths from the same seed.  Built with -ffp-contract=off to
forbid FMA contraction that would perturb the float stream.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF BLOCK = 16384
DEF REBUILD_EVERY = 1048576


cdef void _fen_build(double* fen, double* w, Py_ssize_t n) noexcept:
    cdef Py_ssize_t i, j
    for i in range(n + 1):
        fen[i] = 0.0
    for i in range(1, n + 1):
        fen[i] += w[i - 1]
        j = i + (i & -i)
        if j <= n:
            fen[j] += fen[i]


cdef inline void _fen_add(double* fen, Py_ssize_t n, Py_ssize_t i1, double delta) noexcept:
    while i1 <= n:
        fen[i1] += delta
        i1 += i1 & -i1


cdef inline Py_ssize_t _fen_find(double* fen, Py_ssize_t n, Py_ssize_t top_bit, double r) noexcept:
    cdef Py_ssize_t idx = 0, bit = top_bit, nxt
    while bit:
        nxt = idx + bit
        if nxt <= n and fen[nxt] <= r:
            idx = nxt
            r -= fen[nxt]
        bit >>= 1
    return idx


cdef void _record(Py_ssize_t si, double ts, Py_ssize_t M,
                  double* g1, double* g2, double* A1, double* A2,
                  double* C1, double* C2, double* F1, double* F2,
                  long long* nu, long long* nv,
                  long long* snap_nu, long long* snap_nv,
                  double* snap_gu, double* snap_gv) noexcept:
    cdef Py_ssize_t i
    cdef double dtt, y, s_
    for i in range(M):
        dtt = ts - F1[i]
        if dtt != 0.0:
            y = dtt * g1[i] - C1[i]
            s_ = A1[i] + y
            C1[i] = (s_ - A1[i]) - y
            A1[i] = s_
            F1[i] = ts
        dtt = ts - F2[i]
        if dtt != 0.0:
            y = dtt * g2[i] - C2[i]
            s_ = A2[i] + y
            C2[i] = (s_ - A2[i]) - y
            A2[i] = s_
            F2[i] = ts
    for i in range(M):
        snap_nu[si * M + i] = nu[i]
        snap_nv[si * M + i] = nv[i]
        snap_gu[si * M + i] = A1[i]
        snap_gv[si * M + i] = A2[i]


def run_path(n_u0, n_v0, Py_ssize_t M, long long N,
             double d1, double d2, double a12, double a21,
             snap_times, rng, bint collect_events=False):
    """Simulate on [0, snap_times[-1]]; see _simpy.run_path for the contract."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nu_arr = np.array(n_u0, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nv_arr = np.array(n_v0, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] times_arr = np.ascontiguousarray(snap_times, dtype=np.float64)
    cdef long long* nu = <long long*> nu_arr.data
    cdef long long* nv = <long long*> nv_arr.data
    cdef double* times = <double*> times_arr.data
    cdef Py_ssize_t S = times_arr.shape[0]

    cdef cnp.ndarray[cnp.int64_t, ndim=2] snap_nu_a = np.zeros((S, M), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] snap_nv_a = np.zeros((S, M), dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] snap_gu_a = np.zeros((S, M))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] snap_gv_a = np.zeros((S, M))
    cdef long long* snap_nu = <long long*> snap_nu_a.data
    cdef long long* snap_nv = <long long*> snap_nv_a.data
    cdef double* snap_gu = <double*> snap_gu_a.data
    cdef double* snap_gv = <double*> snap_gv_a.data

    cdef double scale = 2.0 * M * M * N
    cdef Py_ssize_t n = 2 * M

    # one backing buffer: g1 g2 A1 A2 C1 C2 F1 F2 (M each), w (n), fen (n+1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf = np.zeros(8 * M + n + n + 1)
    cdef double* g1 = <double*> buf.data
    cdef double* g2 = g1 + M
    cdef double* A1 = g2 + M
    cdef double* A2 = A1 + M
    cdef double* C1 = A2 + M
    cdef double* C2 = C1 + M
    cdef double* F1 = C2 + M
    cdef double* F2 = F1 + M
    cdef double* w = F2 + M
    cdef double* fen = w + n

    cdef Py_ssize_t i, j, j2, ch, si, sj, guard, bi
    cdef double total, e, u_sel, u_dir, dt, te, t, delta, new_w, dtt, y, s_
    cdef int theta, species
    cdef long long event_count = 0

    for i in range(M):
        g1[i] = (nu[i] / <double> N) * (d1 + a12 * (nv[i] / <double> N))
        g2[i] = (nv[i] / <double> N) * (d2 + a21 * (nu[i] / <double> N))
        w[i] = scale * g1[i]
        w[M + i] = scale * g2[i]
    _fen_build(fen, w, n)
    cdef Py_ssize_t top_bit = 1
    while top_bit * 2 <= n:
        top_bit <<= 1
    total = 0.0
    for i in range(n):
        total += w[i]

    ev_t, ev_sp, ev_site, ev_dir = [], [], [], []

    cdef cnp.ndarray[cnp.float64_t, ndim=1] exp_block_a = np.zeros(1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sel_block_a = np.zeros(1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dir_block_a = np.zeros(1)
    cdef double* exp_block = NULL
    cdef double* sel_block = NULL
    cdef double* dir_block = NULL
    bi = BLOCK

    t = 0.0
    si = 0
    while si < S:
        if total <= 0.0:
            for sj in range(si, S):
                _record(sj, times[sj], M, g1, g2, A1, A2, C1, C2, F1, F2,
                        nu, nv, snap_nu, snap_nv, snap_gu, snap_gv)
            si = S
            break
        if bi == BLOCK:
            exp_block_a = rng.standard_exponential(BLOCK)
            sel_block_a = rng.random(BLOCK)
            dir_block_a = rng.random(BLOCK)
            exp_block = <double*> exp_block_a.data
            sel_block = <double*> sel_block_a.data
            dir_block = <double*> dir_block_a.data
            bi = 0
        e = exp_block[bi]
        u_sel = sel_block[bi]
        u_dir = dir_block[bi]
        bi += 1

        dt = e / total
        te = t + dt
        while si < S and times[si] < te:
            _record(si, times[si], M, g1, g2, A1, A2, C1, C2, F1, F2,
                    nu, nv, snap_nu, snap_nv, snap_gu, snap_gv)
            si += 1
        if si >= S:
            break

        ch = _fen_find(fen, n, top_bit, u_sel * total)
        if ch >= n:
            ch = n - 1
        guard = 0
        while w[ch] <= 0.0 and guard < n:
            ch += 1
            if ch == n:
                ch = 0
            guard += 1
        if guard == n:
            total = 0.0
            continue

        theta = 1 if u_dir < 0.5 else -1
        if ch < M:
            species = 1
            j = ch
        else:
            species = 2
            j = ch - M
        j2 = j + theta
        if j2 == M:
            j2 = 0
        elif j2 < 0:
            j2 = M - 1

        # flush the four touched accumulators at the event time
        dtt = te - F1[j]
        if dtt != 0.0:
            y = dtt * g1[j] - C1[j]
            s_ = A1[j] + y
            C1[j] = (s_ - A1[j]) - y
            A1[j] = s_
            F1[j] = te
        dtt = te - F1[j2]
        if dtt != 0.0:
            y = dtt * g1[j2] - C1[j2]
            s_ = A1[j2] + y
            C1[j2] = (s_ - A1[j2]) - y
            A1[j2] = s_
            F1[j2] = te
        dtt = te - F2[j]
        if dtt != 0.0:
            y = dtt * g2[j] - C2[j]
            s_ = A2[j] + y
            C2[j] = (s_ - A2[j]) - y
            A2[j] = s_
            F2[j] = te
        dtt = te - F2[j2]
        if dtt != 0.0:
            y = dtt * g2[j2] - C2[j2]
            s_ = A2[j2] + y
            C2[j2] = (s_ - A2[j2]) - y
            A2[j2] = s_
            F2[j2] = te

        if species == 1:
            nu[j] -= 1
            nu[j2] += 1
            if nu[j] < 0:
                raise AssertionError(f"negative count at site {j}")
        else:
            nv[j] -= 1
            nv[j2] += 1
            if nv[j] < 0:
                raise AssertionError(f"negative count at site {j}")

        g1[j] = (nu[j] / <double> N) * (d1 + a12 * (nv[j] / <double> N))
        g2[j] = (nv[j] / <double> N) * (d2 + a21 * (nu[j] / <double> N))
        new_w = scale * g1[j]
        delta = new_w - w[j]
        w[j] = new_w
        _fen_add(fen, n, j + 1, delta)
        total += delta
        new_w = scale * g2[j]
        delta = new_w - w[M + j]
        w[M + j] = new_w
        _fen_add(fen, n, M + j + 1, delta)
        total += delta

        g1[j2] = (nu[j2] / <double> N) * (d1 + a12 * (nv[j2] / <double> N))
        g2[j2] = (nv[j2] / <double> N) * (d2 + a21 * (nu[j2] / <double> N))
        new_w = scale * g1[j2]
        delta = new_w - w[j2]
        w[j2] = new_w
        _fen_add(fen, n, j2 + 1, delta)
        total += delta
        new_w = scale * g2[j2]
        delta = new_w - w[M + j2]
        w[M + j2] = new_w
        _fen_add(fen, n, M + j2 + 1, delta)
        total += delta

        t = te
        event_count += 1
        if collect_events:
            ev_t.append(te)
            ev_sp.append(species)
            ev_site.append(j)
            ev_dir.append(theta)
        if event_count % REBUILD_EVERY == 0:
            _fen_build(fen, w, n)
            total = 0.0
            for i in range(n):
                total += w[i]

    leaves = np.zeros(n)
    for i in range(n):
        leaves[i] = w[i]
    return (
        snap_nu_a,
        snap_nv_a,
        snap_gu_a,
        snap_gv_a,
        int(event_count),
        leaves,
        np.asarray(ev_t),
        np.asarray(ev_sp, dtype=np.uint8),
        np.asarray(ev_site, dtype=np.int32),
        np.asarray(ev_dir, dtype=np.int8),
    )
