import io
import math

import numpy as np
import pytest

from sktlab.grid import PeriodicLaplacian, mean_of
from sktlab.kernel import BACKEND
from sktlab.params import ModelParams
from sktlab.walkers import (
    CountsState,
    FrozenStateError,
    PathRecord,
    RateTree,
    channel_weights,
    extract_martingale,
    init_from_density,
    predicted_qv,
    read_event_log,
    simulate_path,
    step,
    write_event_log,
)


def _rng(seed=0):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def test_init_constant_profile():
    st = init_from_density(lambda x: 1.0, lambda x: 1.0, N=10, M=6)
    np.testing.assert_array_equal(st.n_u, np.full(6, 10))
    np.testing.assert_array_equal(st.n_v, np.full(6, 10))


def test_init_linear_profile():
    st = init_from_density(lambda x: x, lambda x: 0.0, N=100, M=4)
    np.testing.assert_array_equal(st.n_u, [25, 50, 75, 100])


def test_init_rounding_bound():
    rng = np.random.default_rng(0)
    prof = 1.0 + 0.5 * rng.random(16)
    st = init_from_density(prof, prof, N=1000)
    assert np.abs(st.U - prof).max() <= 0.5 / 1000 + 1e-15


def test_init_rejects_negative():
    with pytest.raises(ValueError):
        init_from_density(lambda x: -0.1, lambda x: 0.0, N=10, M=4)


def test_counts_state_validation():
    with pytest.raises(ValueError):
        CountsState(10, np.array([1, -1, 0]), np.zeros(3, dtype=int))


def test_channel_weight_formula():
    # eta_{1,1} = 2*16*10*0.3*(1 + 0.5*0.2) = 105.6
    st = CountsState(10, np.array([3, 0, 0, 0]), np.array([2, 0, 0, 0]))
    p = ModelParams(d1=1.0, d2=0.0, a12=0.5, a21=0.0)
    w = channel_weights(st, p)
    assert w[0] == pytest.approx(105.6, rel=1e-14)
    assert np.all(w[1:] == 0.0)
    tree = RateTree(st, p)
    assert tree.total == pytest.approx(105.6, rel=1e-14)


def test_single_walker_rate_and_direction_split():
    st = CountsState(1, np.array([1, 0, 0, 0]), np.zeros(4, dtype=int))
    p = ModelParams(d1=1.0, d2=1.0, a12=0.0, a21=0.0)
    tree = RateTree(st, p)
    assert tree.total == pytest.approx(2 * 16 * 1 * 1.0)
    rng = _rng(7)
    lefts = 0
    for _ in range(10_000):
        ev = step(st, tree, p, rng)
        assert ev.species == 1
        lefts += ev.direction == -1
        assert tree.total == pytest.approx(32.0)
    assert abs(lefts / 10_000 - 0.5) <= 0.02


def test_rate_tree_incremental_matches_rebuild():
    rng = np.random.default_rng(41)
    st = CountsState(20, rng.integers(0, 40, 8), rng.integers(0, 40, 8))
    p = ModelParams(1.0, 0.7, 0.3, 0.2)
    tree = RateTree(st, p)
    for _ in range(5000):
        ch = int(rng.integers(0, 16))
        tree.set_weight(ch, float(rng.uniform(0, 1e5)))
    total_incremental = tree.total
    fen_incremental = list(tree.fen)
    tree.rebuild()
    assert tree.total == pytest.approx(total_incremental, rel=1e-9)
    np.testing.assert_allclose(tree.fen, fen_incremental, rtol=1e-9)


def test_step_frozen_state():
    st = CountsState(5, np.full(4, 3), np.full(4, 2))
    p = ModelParams(0.0, 0.0, 0.0, 0.0)
    tree = RateTree(st, p)
    with pytest.raises(FrozenStateError):
        step(st, tree, p, _rng(1))


def test_simulate_frozen_path():
    st = CountsState(5, np.full(4, 3), np.full(4, 2))
    p = ModelParams(0.0, 0.0, 0.0, 0.0)
    path = simulate_path(st, p, np.linspace(0, 1.0, 5), seed=3)
    assert path.event_count == 0
    assert np.all(path.n_u == 3)
    assert np.all(path.gu_int == 0.0)


def test_simulate_reproducible_and_replica_independent():
    st = CountsState(50, np.full(8, 50), np.full(8, 50))
    p = ModelParams(1.0, 1.0, 0.1, 0.1)
    sched = np.linspace(0, 0.05, 9)
    a = simulate_path(st.copy(), p, sched, seed=(9, 0))
    b = simulate_path(st.copy(), p, sched, seed=(9, 0))
    c = simulate_path(st.copy(), p, sched, seed=(9, 1))
    assert np.array_equal(a.n_u, b.n_u) and np.array_equal(a.gu_int, b.gu_int)
    assert not np.array_equal(a.n_u, c.n_u)


def test_backends_bitwise_identical():
    try:
        from sktlab.kernel import get_kernel

        get_kernel("compiled")
    except RuntimeError:
        pytest.skip("compiled kernel not built")
    st = CountsState(80, np.full(6, 80), np.full(6, 40))
    p = ModelParams(1.0, 0.5, 0.3, 0.2)
    sched = np.linspace(0, 0.03, 13)
    a = simulate_path(st.copy(), p, sched, seed=(4, 4), backend="python")
    b = simulate_path(st.copy(), p, sched, seed=(4, 4), backend="compiled")
    assert a.event_count == b.event_count
    assert np.array_equal(a.n_u, b.n_u) and np.array_equal(a.n_v, b.n_v)
    assert np.array_equal(a.gu_int, b.gu_int) and np.array_equal(a.gv_int, b.gv_int)
    assert np.array_equal(a.leaf_weights, b.leaf_weights)


def test_mass_conservation_and_tree_audit_long_run():
    # ~2e5 events; the full 1e6-event audit runs in the acceptance suite
    st = CountsState(500, np.full(8, 500), np.full(8, 500))
    p = ModelParams(1.0, 1.0, 0.2, 0.2)
    path = simulate_path(st, p, np.linspace(0, 0.1, 5), seed=11)
    assert path.event_count > 100_000
    assert np.all(path.n_u.sum(axis=1) == 8 * 500)
    assert np.all(path.n_v.sum(axis=1) == 8 * 500)
    final = CountsState(500, path.n_u[-1], path.n_v[-1])
    fresh = channel_weights(final, p)
    np.testing.assert_allclose(path.leaf_weights, fresh, rtol=1e-9)


def test_event_count_poisson_band():
    # a12 = a21 = 0 keeps the total rate exactly constant: count ~ Poisson(R T)
    st = CountsState(200, np.full(8, 200), np.full(8, 200))
    p = ModelParams(1.0, 0.5, 0.0, 0.0)
    rate = 2 * 64 * (8 * 200 * 1.0 + 8 * 200 * 0.5)
    T = 0.02
    path = simulate_path(st, p, np.array([0.0, T]), seed=21)
    mean = rate * T
    assert abs(path.event_count - mean) <= 3.0 * math.sqrt(mean)


def test_martingale_zero_cases():
    st = CountsState(20, np.full(4, 20), np.full(4, 10))
    p = ModelParams(1.0, 1.0, 0.5, 0.5)
    path = simulate_path(st, p, np.linspace(0, 0.05, 9), seed=5)
    m = extract_martingale(path)
    np.testing.assert_array_equal(m[0], np.zeros(4))
    frozen = simulate_path(st, ModelParams(0, 0, 0, 0), np.linspace(0, 0.05, 9), seed=5)
    np.testing.assert_allclose(extract_martingale(frozen), 0.0, atol=1e-15)


def test_martingale_mean_free_componentwise():
    st = CountsState(50, np.full(4, 50), np.full(4, 50))
    p = ModelParams(1.0, 1.0, 0.1, 0.1)
    lap = PeriodicLaplacian(4)
    path = simulate_path(st, p, np.linspace(0, 0.1, 9), seed=31)
    m = extract_martingale(path, 1, lap)
    for row in m:
        assert abs(mean_of(row)) <= 1e-12 * max(1.0, np.abs(row).max())


def test_martingale_replica_mean_within_band():
    st = CountsState(50, np.full(4, 50), np.full(4, 50))
    p = ModelParams(1.0, 1.0, 0.1, 0.1)
    sched = np.array([0.0, 0.1])
    R = 100
    finals = np.array([
        extract_martingale(simulate_path(st.copy(), p, sched, seed=(77, r)))[-1]
        for r in range(R)
    ])
    se = finals.std(axis=0, ddof=1) / math.sqrt(R)
    assert np.all(np.abs(finals.mean(axis=0)) <= 4.0 * se)


def test_predicted_qv_trivial_and_synthetic():
    st = CountsState(20, np.full(4, 20), np.full(4, 10))
    frozen = simulate_path(st, ModelParams(0, 0, 0, 0), np.linspace(0, 0.1, 3), seed=1)
    assert predicted_qv(frozen, site=0) == 0.0
    # synthetic constant-load record: G = d1 * c * t per site, so the QV is
    # exactly (M^2/N) * 4 c d1 t and grows linearly in t
    c, d1, T, M, N = 0.3, 1.0, 0.25, 4, 50
    times = np.array([0.0, T / 2, T])
    g = np.asarray([np.full(M, d1 * c * t) for t in times])
    rec = PathRecord(
        params=ModelParams(d1, 1, 0, 0), N=N, times=times,
        n_u=np.full((3, M), int(c * N)), n_v=np.zeros((3, M), dtype=int),
        gu_int=g, gv_int=np.zeros_like(g), event_count=0,
        leaf_weights=np.zeros(2 * M),
    )
    want = (M**2 / N) * 4.0 * c * d1 * T
    assert predicted_qv(rec, site=2) == pytest.approx(want, rel=1e-14)
    qv = predicted_qv(rec)
    np.testing.assert_allclose(qv[1], qv[2] / 2.0, rtol=1e-14)
    np.testing.assert_allclose(qv[:, 0], (M**2 / N) * 4.0 * c * d1 * times, rtol=1e-14)


def test_variance_matches_predicted_qv():
    # Ito isometry: Var(M_i(T)) ~ replica mean of the predicted QV
    st = CountsState(50, np.full(4, 50), np.full(4, 50))
    p = ModelParams(1.0, 1.0, 0.1, 0.1)
    sched = np.array([0.0, 0.1])
    R = 150
    sq, qv = [], []
    for r in range(R):
        path = simulate_path(st.copy(), p, sched, seed=(123, r))
        sq.append(extract_martingale(path)[-1] ** 2)
        qv.append(predicted_qv(path)[-1])
    d = np.asarray(sq) - np.asarray(qv)
    z = d.mean(axis=0) / (d.std(axis=0, ddof=1) / math.sqrt(R))
    assert np.all(np.abs(z) <= 3.0)


def test_single_walker_law_matches_matrix_exponential():
    # occupancy law vs the continuous-time walk generator (rate M^2 per side)
    from scipy.linalg import expm

    M, T, R = 4, 0.02, 100_000
    lap = PeriodicLaplacian(M)
    P = expm(T * lap.dense_matrix())[0]
    p = ModelParams(1.0, 1.0, 0.0, 0.0)
    sched = np.array([0.0, T])
    counts = np.zeros(M)
    st0 = CountsState(1, np.array([1, 0, 0, 0]), np.zeros(M, dtype=int))
    for r in range(R):
        path = simulate_path(st0.copy(), p, sched, seed=(55, r))
        counts[np.argmax(path.n_u[-1])] += 1
    tv = 0.5 * np.abs(counts / R - P).sum()
    assert tv <= 0.02


def test_event_log_round_trip(tmp_path):
    st = CountsState(30, np.full(4, 30), np.full(4, 30))
    p = ModelParams(1.0, 0.7, 0.2, 0.4)
    path = simulate_path(st, p, np.linspace(0, 0.02, 5), seed=13, collect_events=True)
    assert path.events is not None and len(path.events) == path.event_count
    buf = io.BytesIO()
    write_event_log(path, buf)
    buf.seek(0)
    header, log = read_event_log(buf)
    assert header == {"M": 4, "N": 30, "d1": 1.0, "d2": 0.7, "a12": 0.2, "a21": 0.4}
    np.testing.assert_array_equal(log.times, path.events.times)
    np.testing.assert_array_equal(log.species, path.events.species)
    np.testing.assert_array_equal(log.sites, path.events.sites)
    np.testing.assert_array_equal(log.directions, path.events.directions)
    assert np.all(np.diff(log.times) > 0)
    assert set(np.unique(log.species)) <= {1, 2}
    assert set(np.unique(log.directions)) <= {-1, 1}


def test_schedule_validation():
    st = CountsState(5, np.full(4, 5), np.full(4, 5))
    with pytest.raises(ValueError):
        simulate_path(st, ModelParams(1, 1, 0, 0), [0.5, 1.0], seed=0)


def test_backend_marker():
    assert BACKEND in ("compiled", "python")
