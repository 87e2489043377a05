"""Pure-Python event loop for the two-species lattice walk.

Reference implementation of the simulation kernel.  The compiled extension
(_simcore) mirrors this file operation-for-operation: identical Fenwick-tree
layout, identical Kahan compensation, identical RNG block consumption (one
exponential and two uniforms per event, drawn in blocks of BLOCK), so both
backends produce bitwise-identical paths from the same seed.
"""

from __future__ import annotations

import numpy as np

BLOCK = 1 << 14
REBUILD_EVERY = 1 << 20


def _fen_build(w):
    n = len(w)
    fen = [0.0] * (n + 1)
    for i in range(1, n + 1):
        fen[i] += w[i - 1]
        j = i + (i & -i)
        if j <= n:
            fen[j] += fen[i]
    return fen


def _fen_add(fen, n, i1, delta):
    while i1 <= n:
        fen[i1] += delta
        i1 += i1 & -i1


def _fen_find(fen, n, top_bit, r):
    """Index of the first leaf whose cumulative weight exceeds r (0-based)."""
    idx = 0
    bit = top_bit
    while bit:
        nxt = idx + bit
        if nxt <= n and fen[nxt] <= r:
            idx = nxt
            r -= fen[nxt]
        bit >>= 1
    return idx


def run_path(n_u0, n_v0, M, N, d1, d2, a12, a21, snap_times, rng, collect_events=False):
    """Simulate on [0, snap_times[-1]], recording counts and load integrals.

    Returns (snap_nu, snap_nv, snap_gu, snap_gv, event_count, leaf_weights,
    ev_times, ev_species, ev_sites, ev_dirs).
    """
    nu = [int(x) for x in n_u0]
    nv = [int(x) for x in n_v0]
    S = len(snap_times)
    snap_nu = np.zeros((S, M), dtype=np.int64)
    snap_nv = np.zeros((S, M), dtype=np.int64)
    snap_gu = np.zeros((S, M))
    snap_gv = np.zeros((S, M))

    scale = 2.0 * M * M * N
    g1 = [0.0] * M
    g2 = [0.0] * M
    for i in range(M):
        g1[i] = (nu[i] / N) * (d1 + a12 * (nv[i] / N))
        g2[i] = (nv[i] / N) * (d2 + a21 * (nu[i] / N))

    n = 2 * M
    w = [0.0] * n
    for i in range(M):
        w[i] = scale * g1[i]
        w[M + i] = scale * g2[i]
    fen = _fen_build(w)
    top_bit = 1 << (n.bit_length() - 1)
    total = 0.0
    for i in range(n):
        total += w[i]

    # lazy per-site load integrals with Kahan compensation
    A1 = [0.0] * M
    A2 = [0.0] * M
    C1 = [0.0] * M
    C2 = [0.0] * M
    F1 = [0.0] * M
    F2 = [0.0] * M

    ev_t, ev_sp, ev_site, ev_dir = [], [], [], []

    def flush1(i, t):
        dtt = t - F1[i]
        if dtt != 0.0:
            y = dtt * g1[i] - C1[i]
            s = A1[i] + y
            C1[i] = (s - A1[i]) - y
            A1[i] = s
            F1[i] = t

    def flush2(i, t):
        dtt = t - F2[i]
        if dtt != 0.0:
            y = dtt * g2[i] - C2[i]
            s = A2[i] + y
            C2[i] = (s - A2[i]) - y
            A2[i] = s
            F2[i] = t

    def record(si, ts):
        for i in range(M):
            flush1(i, ts)
            flush2(i, ts)
        snap_nu[si] = nu
        snap_nv[si] = nv
        snap_gu[si] = A1
        snap_gv[si] = A2

    def set_weight(ch, new):
        nonlocal total
        delta = new - w[ch]
        w[ch] = new
        _fen_add(fen, n, ch + 1, delta)
        total += delta

    t = 0.0
    si = 0
    event_count = 0
    exp_block = sel_block = dir_block = None
    bi = BLOCK

    while si < S:
        if total <= 0.0:
            for sj in range(si, S):
                record(sj, snap_times[sj])
            si = S
            break
        if bi == BLOCK:
            exp_block = rng.standard_exponential(BLOCK)
            sel_block = rng.random(BLOCK)
            dir_block = rng.random(BLOCK)
            bi = 0
        e = exp_block[bi]
        u_sel = sel_block[bi]
        u_dir = dir_block[bi]
        bi += 1

        dt = e / total
        te = t + dt
        while si < S and snap_times[si] < te:
            record(si, snap_times[si])
            si += 1
        if si >= S:
            break

        ch = _fen_find(fen, n, top_bit, u_sel * total)
        if ch >= n:
            ch = n - 1
        guard = 0
        while w[ch] <= 0.0 and guard < n:
            ch = (ch + 1) % n
            guard += 1
        if guard == n:
            total = 0.0  # spurious positive total from float residue; freeze
            continue

        theta = 1 if u_dir < 0.5 else -1
        if ch < M:
            species, j = 1, ch
        else:
            species, j = 2, ch - M
        j2 = (j + theta) % M

        flush1(j, te)
        flush1(j2, te)
        flush2(j, te)
        flush2(j2, te)

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

        for i in (j, j2):
            g1[i] = (nu[i] / N) * (d1 + a12 * (nv[i] / N))
            g2[i] = (nv[i] / N) * (d2 + a21 * (nu[i] / N))
            set_weight(i, scale * g1[i])
            set_weight(M + i, scale * g2[i])

        t = te
        event_count += 1
        if collect_events:
            ev_t.append(te)
            ev_sp.append(species)
            ev_site.append(j)
            ev_dir.append(theta)
        if event_count % REBUILD_EVERY == 0:
            fen = _fen_build(w)
            total = 0.0
            for i in range(n):
                total += w[i]

    return (
        snap_nu,
        snap_nv,
        snap_gu,
        snap_gv,
        event_count,
        np.asarray(w),
        np.asarray(ev_t),
        np.asarray(ev_sp, dtype=np.uint8),
        np.asarray(ev_site, dtype=np.int32),
        np.asarray(ev_dir, dtype=np.int8),
    )
