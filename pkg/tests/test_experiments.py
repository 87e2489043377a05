import json
import math
import os

import numpy as np
import pytest

from sktlab.cli import main
from sktlab.experiments import (
    CertificateFailure,
    ConfigError,
    ReferenceUnresolved,
    StudyConfig,
    build_gap_decomposition,
    certify_gap_instance,
    loglog_slope,
    run_deterministic_order,
    run_duality_suite,
    run_gap_vs_N,
    run_qv_study,
    run_rough_estimate,
    run_stability_sweep,
)
from sktlab.grid import PeriodicLaplacian
from sktlab.params import ModelParams
from sktlab.results import CSV_COLUMNS, StudyResult, StudyRow, emit_results
from sktlab.semidiscrete import IntegratorConfig, integrate
from sktlab.walkers import CountsState, extract_martingale, simulate_path


def test_config_validation():
    with pytest.raises(ConfigError):
        StudyConfig(study="gap-vs-n", M_values=(2,))
    with pytest.raises(ConfigError):
        StudyConfig(study="gap-vs-n", replicas=0)
    with pytest.raises(ConfigError):
        StudyConfig(study="gap-vs-n", N_values=(0,))


def test_loglog_slope_exact_power_law():
    xs = np.array([10.0, 100.0, 1000.0])
    slope, err = loglog_slope(xs, 5.0 * xs**-1.5)
    assert slope == pytest.approx(-1.5, abs=1e-12)
    assert err == pytest.approx(0.0, abs=1e-10)


def test_emit_empty_result_header_only(tmp_path):
    res = StudyResult(study="gap-vs-n", config={}, rows=[], slope=None,
                      slope_err=None, seed=0)
    (path,) = emit_results(res, "csv", tmp_path)
    lines = path.read_text().splitlines()
    assert lines == [",".join(CSV_COLUMNS)]


def test_json_round_trip_byte_identical(tmp_path):
    cfg = StudyConfig(study="gap-vs-n", M_values=(4,), N_values=(50, 100),
                      replicas=4, T=0.01, snapshots=5, seed=3)
    res = run_gap_vs_N(cfg).zeroed_runtime()
    text = res.to_json()
    again = StudyResult.from_json(text).to_json()
    assert again == text


def test_golden_determinism_and_thread_independence(tmp_path):
    kw = dict(M_values=(4,), N_values=(50, 100), replicas=6, T=0.01,
              snapshots=5, seed=7)
    a = run_gap_vs_N(StudyConfig(study="gap-vs-n", **kw))
    b = run_gap_vs_N(StudyConfig(study="gap-vs-n", **kw))
    assert a.zeroed_runtime().to_csv() == b.zeroed_runtime().to_csv()
    assert a.zeroed_runtime().to_json() == b.zeroed_runtime().to_json()
    c = run_gap_vs_N(StudyConfig(study="gap-vs-n", threads=2, **kw))
    assert c.zeroed_runtime().to_csv() == a.zeroed_runtime().to_csv()


def test_gap_study_records_diagnostics():
    cfg = StudyConfig(study="gap-vs-n", M_values=(4,), N_values=(8, 64),
                      replicas=4, T=0.01, snapshots=5, seed=1)
    res = run_gap_vs_N(cfg)
    for row in res.rows:
        assert "smallness_margin" in row.extra
        assert "scale_ratio" in row.extra
        assert row.extra["scale_ratio"] == row.N / 16
    assert res.rows[0].extra["scale_floor_ok"] is False  # N=8 < 4*16
    assert res.metadata["backend"] in ("compiled", "python")


def test_gap_study_rejects_inadmissible_target():
    cfg = StudyConfig(study="gap-vs-n", a12=2.0, a21=2.0, target=(1.0, 1.0),
                      M_values=(4,), N_values=(50,), replicas=2, T=0.01, snapshots=5)
    with pytest.raises(ConfigError):
        run_gap_vs_N(cfg)  # bound = 0.25 < product 1


def test_zero_rate_parameters_give_zero_gap():
    cfg = StudyConfig(study="gap-vs-n", d1=0.0, d2=0.0, a12=0.0, a21=0.0,
                      M_values=(4,), N_values=(50,), replicas=3, T=0.01,
                      snapshots=5, seed=2)
    res = run_gap_vs_N(cfg)
    assert res.rows[0].mean_sq_gap == 0.0


def test_rough_study_quick():
    cfg = StudyConfig(study="rough", M_values=(4,), N_values=(100, 1000),
                      replicas=12, T=0.05, snapshots=9, seed=4)
    res = run_rough_estimate(cfg)
    assert res.passed
    assert res.slope <= -0.5


def test_qv_study_quick():
    cfg = StudyConfig(study="qv", M_values=(4,), N_values=(50,),
                      replicas=100, T=0.1, snapshots=5, seed=6)
    res = run_qv_study(cfg)
    assert res.passed
    assert res.rows[0].extra["frac_sites_z_le_3"] >= 0.95


def test_duality_suite_quick():
    cfg = StudyConfig(study="duality", n_regular=8, n_singular=4, seed=9)
    res = run_duality_suite(cfg)
    assert res.passed
    kinds = [r.extra["kind"] for r in res.rows]
    assert kinds.count("regular") == 8 and kinds.count("singular") == 4
    assert all(r.extra["stable"] for r in res.rows if r.extra["kind"] == "singular")


def test_det_order_quick_and_unresolved_reference():
    cfg = StudyConfig(study="det-order", M_values=(8, 16), M_ref=256,
                      T=0.02, snapshots=17, eps=0.05, seed=0)
    res = run_deterministic_order(cfg)
    assert res.slope == pytest.approx(-4.0, abs=0.5)
    bad = StudyConfig(study="det-order", M_values=(8, 32), M_ref=64,
                      T=0.02, snapshots=17, eps=0.05, seed=0)
    with pytest.raises(ReferenceUnresolved):
        run_deterministic_order(bad)


def test_stability_sweep_quick():
    cfg = StudyConfig(study="stability", M_values=(8, 16), eps_values=(1e-1, 1e-3),
                      T=0.05, snapshots=17, seed=0)
    res = run_stability_sweep(cfg)
    assert res.passed
    assert res.metadata["margin_factor"] >= 10
    assert res.metadata["ratio_spread"] <= 2.0


def test_gap_decomposition_fields_and_identity():
    # bookkeeping identity: Z - Z0 - [(target flow) - L gu_int] + mart == 0
    p = ModelParams(1.0, 1.0, 0.1, 0.1)
    M, N, T = 8, 300, 0.05
    x = np.arange(1, M + 1) / M
    prof_u = 1.0 + 0.1 * np.cos(2 * np.pi * x)
    st = CountsState(N, np.rint(N * prof_u).astype(np.int64), np.full(M, N))
    sched = np.linspace(0.0, T, 17)
    path = simulate_path(st, p, sched, seed=(31, 0))
    ode = integrate(st.n_u / N, st.n_v / N, p, IntegratorConfig(snapshots=sched))
    dec = build_gap_decomposition(path, ode.u, ode.v, p)
    assert dec.env_u.min() >= p.d1
    assert dec.lambda_T == pytest.approx(T + T**2 * p.mu1(float(path.V[0].mean())) + 1.0)
    lap = PeriodicLaplacian(M)
    drift = path.drift_integrals(1, lap)
    for s in range(len(sched)):
        integral_term = (ode.u[s] - ode.u[0]) - drift[s]
        resid = dec.Z[s] - dec.Z[0] - integral_term + dec.mart_u[s]
        assert np.abs(resid).max() <= 1e-8


def test_certify_gap_instance_nonnegative_slack():
    # end-to-end combined certificate over 20 seeded runs
    p = ModelParams(1.0, 1.0, 0.1, 0.1)
    M, N = 8, 500
    sched = np.linspace(0.0, 0.05, 33)
    tu = np.ones((33, M))
    tv = np.ones((33, M))
    for s in range(20):
        st = CountsState(N, np.full(M, N), np.full(M, N))
        path = simulate_path(st, p, sched, seed=(900, s))
        rep = certify_gap_instance(path, tu, tv, p, a=1.0)
        assert rep.slack >= 0.0
        assert rep.ratio is not None and rep.ratio < 2.0


def test_cli_runs_and_writes(tmp_path):
    cfg = {"M_values": [4], "N_values": [50, 100], "replicas": 4, "T": 0.01,
           "snapshots": 5}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "results"
    code = main(["gap-vs-n", "--config", str(cfg_path), "--seed", "5",
                 "--out", str(out), "--format", "both"])
    assert code == 0
    csv_text = (out / "gap-vs-n.csv").read_text()
    assert csv_text.splitlines()[0] == ",".join(CSV_COLUMNS)
    data = json.loads((out / "gap-vs-n.json").read_text())
    assert data["seed"] == 5
    assert data["metadata"]["threads"] == 1


def test_cli_config_errors():
    assert main(["gap-vs-n", "--config", "/nonexistent.json"]) == 2
    # unknown key
    import tempfile

    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        fh.write('{"bogus_key": 1}')
        name = fh.name
    try:
        assert main(["gap-vs-n", "--config", name]) == 2
    finally:
        os.unlink(name)


def test_cli_env_thread_override(tmp_path, monkeypatch):
    monkeypatch.setenv("SKTLAB_THREADS", "3")
    cfg = {"M_values": [4], "N_values": [50], "replicas": 2, "T": 0.005,
           "snapshots": 3}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "o"
    code = main(["gap-vs-n", "--config", str(cfg_path), "--out", str(out),
                 "--format", "json"])
    assert code == 0
    data = json.loads((out / "gap-vs-n.json").read_text())
    assert data["metadata"]["threads"] == 3
    assert data["metadata"]["threads_env_override"] == "3"
