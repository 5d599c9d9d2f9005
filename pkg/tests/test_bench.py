"""Benchmark harness: seeding, CSV contracts, grids, selftest, and the CLI."""

import json
import time

import numpy as np
import pytest

from hankel_scs import bench, cli, signal_model

TINY_PHASE = dict(
    n=31, r_values=(1, 2), p_values=(0.5, 0.9), trials=2,
    solver_overrides=dict(max_iters=150),
)


# ---------------------------------------------------------------------------
# Seed derivation and model generators
# ---------------------------------------------------------------------------

def test_trial_seeds_stable_and_distinct():
    a = bench.trial_seed_sequence(0, 4, 5000, 7)
    b = bench.trial_seed_sequence(0, 4, 5000, 7)
    c = bench.trial_seed_sequence(0, 4, 5000, 8)
    d = bench.trial_seed_sequence(1, 4, 5000, 7)
    assert np.array_equal(a.generate_state(4), b.generate_state(4))
    assert not np.array_equal(a.generate_state(4), c.generate_state(4))
    assert not np.array_equal(a.generate_state(4), d.generate_state(4))
    assert bench.solver_seed(a) == bench.solver_seed(b)


def test_stratified_model_separation_and_amplitudes():
    for r in (3, 16, 150):
        model = bench.stratified_model(2046, r, np.random.default_rng(r))
        f = np.sort(model.freqs)
        gaps = np.diff(np.concatenate([f, [f[0] + 1.0]]))
        assert gaps.min() >= 0.2 / r - 1e-12  # includes wrap-around
        mags = np.abs(model.amps)
        assert np.all((mags >= 2.0) & (mags < 1.0 + 10**0.5))
        assert np.all(model.dampings == 0)


# ---------------------------------------------------------------------------
# CSV formatting and IO
# ---------------------------------------------------------------------------

def test_fmt_cells():
    assert bench._fmt(None) == ""
    assert bench._fmt(True) == "true"
    assert bench._fmt(False) == "false"
    assert bench._fmt(7) == "7"
    assert bench._fmt(0.125) == "0.125"
    assert bench._fmt(float("inf")) == "inf"
    assert bench._fmt(float("nan")) == "nan"
    assert bench._fmt("shgd") == "shgd"


def test_write_csv_roundtrip_and_meta_sidecar(tmp_path):
    spec = bench.ExperimentSpec(kind="noise", n=31, r=2, trials=1)
    result = bench.GridResult(
        columns=("a", "b"), rows=[dict(a=1, b=None), dict(a=2, b=0.5)],
        meta=bench.build_meta(spec),
    )
    path = tmp_path / "out.csv"
    bench.write_csv(path, result)
    text = path.read_text()
    assert text.startswith("# generated ")
    cols, rows = bench.read_csv_rows(path)
    assert cols == ("a", "b")
    assert rows == [{"a": "1", "b": ""}, {"a": "2", "b": "0.5"}]
    meta = json.loads((tmp_path / "out.csv.meta.json").read_text())
    assert meta["spec"]["kind"] == "noise"
    assert meta["git_hash"]
    assert "numpy" in meta


# ---------------------------------------------------------------------------
# Phase grid
# ---------------------------------------------------------------------------

def test_phase_grid_shape_and_easy_corner():
    spec = bench.ExperimentSpec(kind="phase", trials=3, n=63,
                                r_values=(1,), p_values=(0.94,))
    res = bench.run_phase(spec)
    assert res.columns == ("r", "p", "m", "successes", "trials",
                           "mean_iters", "mean_ms")
    assert len(res.rows) == 1
    row = res.rows[0]
    assert row["m"] == round(0.94 * 63)
    assert row["successes"] == 3  # rank-1, nearly full sampling: all recover
    assert row["mean_iters"] > 0


def test_phase_impossible_corner_reports_zero_without_aborting():
    spec = bench.ExperimentSpec(
        kind="phase", trials=2, n=127, r_values=(35,), p_values=(0.05,),
        solver_overrides=dict(max_iters=50),
    )
    res = bench.run_phase(spec)
    row = res.rows[0]
    assert row["m"] == 6  # far below any recoverable regime
    assert row["successes"] == 0
    assert row["trials"] == 2


def test_phase_grid_row_order_and_determinism():
    spec = bench.ExperimentSpec(kind="phase", **TINY_PHASE)
    a = bench.run_phase(spec)
    b = bench.run_phase(bench.ExperimentSpec(kind="phase", **TINY_PHASE))
    keys = [(row["r"], row["p"]) for row in a.rows]
    assert keys == [(1, 0.5), (1, 0.9), (2, 0.5), (2, 0.9)]

    def stable(rows):
        return [{k: v for k, v in row.items() if k != "mean_ms"} for row in rows]

    assert stable(a.rows) == stable(b.rows)


def test_phase_parallel_matches_serial():
    serial = bench.run_phase(bench.ExperimentSpec(kind="phase", **TINY_PHASE))
    parallel = bench.run_phase(
        bench.ExperimentSpec(kind="phase", threads=3, **TINY_PHASE))

    def stable(rows):
        return [{k: v for k, v in row.items() if k != "mean_ms"} for row in rows]

    assert stable(serial.rows) == stable(parallel.rows)


def test_success_boundary_table():
    rows = [
        dict(r=1, p=0.1, successes=20, trials=20),
        dict(r=1, p=0.2, successes=18, trials=20),
        dict(r=2, p=0.1, successes=3, trials=20),
    ]
    table = bench.success_boundary(rows)
    assert table[1][0.1] == 1.0
    assert table[1][0.2] == pytest.approx(0.9)
    assert table[2][0.1] == pytest.approx(0.15)


# ---------------------------------------------------------------------------
# Noise sweep: fully deterministic CSV bytes
# ---------------------------------------------------------------------------

def test_noise_csv_byte_identical_modulo_timestamp(tmp_path):
    kwargs = dict(kind="noise", n=31, r=2, sigma_values=(1e-2,),
                  m_values=(15, 25), trials=2,
                  solver_overrides=dict(max_iters=150))
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    bench.write_csv(p1, bench.run_noise(bench.ExperimentSpec(**kwargs)))
    time.sleep(0.01)
    bench.write_csv(p2, bench.run_noise(bench.ExperimentSpec(**kwargs)))

    def body(path):
        return [ln for ln in path.read_text().splitlines()
                if not ln.startswith("#")]

    assert body(p1) == body(p2)
    cols, rows = bench.read_csv_rows(p1)
    assert cols == ("sigma_e", "snr_db", "m", "mean_rmse")
    assert [row["m"] for row in rows] == ["15", "25"]
    assert float(rows[0]["snr_db"]) == pytest.approx(40.0)  # -20 log10(1e-2)


def test_noise_more_samples_no_worse():
    spec = bench.ExperimentSpec(
        kind="noise", n=63, r=3, sigma_values=(1e-2,), m_values=(30, 55),
        trials=3, solver_overrides=dict(max_iters=250),
    )
    res = bench.run_noise(spec)
    rmse = {row["m"]: row["mean_rmse"] for row in res.rows}
    assert rmse[55] < rmse[30]


# ---------------------------------------------------------------------------
# Timing
# ---------------------------------------------------------------------------

def test_timing_smoke_and_csv_contract(tmp_path):
    spec = bench.ExperimentSpec(
        kind="timing", n=254, r=8, m=140, trials=1, reps=1,
        targets=(1e-1, 1e-3),
    )
    res = bench.run_timing(spec)
    assert res.columns == ("solver", "target", "mean_ms", "mean_iters",
                           "ratio", "flag")
    assert [(row["solver"], row["target"]) for row in res.rows] == [
        ("shgd", 1e-1), ("pgd", 1e-1), ("shgd", 1e-3), ("pgd", 1e-3)]
    for row in res.rows:
        assert row["flag"] is None
        assert row["mean_ms"] > 0
        if row["solver"] == "shgd":
            assert row["ratio"] > 0
        else:
            assert row["ratio"] is None
    fpi = res.meta["fft_passes_per_iter"]
    assert fpi["shgd"] > 0 and fpi["pgd"] > 0
    path = tmp_path / "timing.csv"
    bench.write_csv(path, res)
    cols, rows = bench.read_csv_rows(path)
    assert cols == ("solver", "target", "mean_ms", "mean_iters", "ratio", "flag")
    assert rows[1]["ratio"] == ""  # pgd rows leave the ratio cell empty


def test_flop_model_ratio_within_analytic_bounds():
    out = bench.measure_flop_model(2046, 150)
    assert out["C"] > 0
    assert 0.25 < out["ratio"] < 2.0 / 3.0


def test_scaling_cost_grows_with_length():
    spec = bench.ExperimentSpec(kind="timing", variant="scaling", trials=1)
    res = bench.run_timing(spec)
    assert res.columns == ("n", "r", "m", "iters", "per_iter_ms")
    ns = [row["n"] for row in res.rows]
    assert ns == [2**j - 2 for j in bench.SCALING_EXPONENTS]
    per_iter = [row["per_iter_ms"] for row in res.rows]
    assert all(b > a for a, b in zip(per_iter, per_iter[1:]))


# ---------------------------------------------------------------------------
# Selftest
# ---------------------------------------------------------------------------

def test_adjoint_residual_negative_control():
    rng = np.random.default_rng(3)
    clean = bench._adjoint_residual(41, rng)
    assert clean < 1e-12
    w = np.asarray(bench.__dict__["hankel_ops"].skew_diag_weights(41)).copy()
    w[3] *= 1.7
    assert bench._adjoint_residual(41, rng, weights=w) > 1e-6


def test_selftest_passes_quickly(capsys):
    t0 = time.perf_counter()
    ok = bench.run_selftest()
    elapsed = time.perf_counter() - t0
    out = capsys.readouterr().out
    lines = [ln for ln in out.splitlines() if ln]
    assert ok is True
    assert elapsed < 120.0
    assert lines[-1] == "selftest: all checks passed"
    checks = lines[:-1]
    assert len(checks) == len(bench._selftest_checks())
    assert all(ln.startswith("PASS  ") for ln in checks)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_gen_recover_roundtrip(tmp_path, capsys):
    sig = tmp_path / "sig.ssig.json"
    out = tmp_path / "res.json"
    code = cli.main([
        "gen", "--n", "63", "--rank", "3", "--m", "40", "--seed", "5",
        "--min-sep", "0.03", "--out", str(sig),
    ])
    assert code == 0
    assert sig.exists() and (tmp_path / "sig.ssig.json.model.json").exists()

    code = cli.main([
        "recover", "--input", str(sig), "--rank", "3", "--out", str(out),
    ])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["termination"] in ("tol_reached", "max_iters")
    model = signal_model.load_smodel(tmp_path / "sig.ssig.json.model.json")
    x = signal_model.synthesize(model)
    x_hat = np.array([re + 1j * im for re, im in doc["x_hat"]])
    assert np.linalg.norm(x_hat - x) / np.linalg.norm(x) <= 1e-3
    assert "recover" not in capsys.readouterr().err


def test_cli_recover_pgd_solver(tmp_path):
    sig = tmp_path / "sig.ssig.json"
    out = tmp_path / "res.json"
    assert cli.main(["gen", "--n", "62", "--rank", "2", "--m", "40",
                     "--seed", "1", "--min-sep", "0.05",
                     "--out", str(sig)]) == 0
    assert cli.main(["recover", "--input", str(sig), "--rank", "2",
                     "--solver", "pgd", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert all("balancing_gap" in rec for rec in doc["history"])


def test_cli_usage_errors(tmp_path):
    # missing input file is caught, not raised
    assert cli.main(["recover", "--input", str(tmp_path / "nope.json"),
                     "--rank", "2"]) == 1
    # malformed --step value fails argument parsing
    with pytest.raises(SystemExit) as exc:
        cli.main(["recover", "--input", "x", "--rank", "2",
                  "--step", "fixed:abc"])
    assert exc.value.code == 1
    # unknown solver name fails choice validation
    with pytest.raises(SystemExit) as exc:
        cli.main(["recover", "--input", "x", "--rank", "2",
                  "--solver", "bogus"])
    assert exc.value.code == 1


def test_cli_config_validation(tmp_path):
    sig = tmp_path / "sig.ssig.json"
    assert cli.main(["gen", "--n", "31", "--rank", "2", "--m", "20",
                     "--seed", "0", "--out", str(sig)]) == 0
    base = ["recover", "--input", str(sig), "--rank", "2",
            "--out", str(tmp_path / "r.json")]
    assert cli.main(base + ["--config", '{"bogus_key": 1}']) == 1
    assert cli.main(base + ["--config", '[1, 2]']) == 1
    assert cli.main(base + ["--config", str(tmp_path / "missing.cfg")]) == 1

    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"max_iters": 5, "rel_change_tol": 1e-300}')
    assert cli.main(base + ["--config", str(cfg)]) == 0
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["iters"] == 5 and doc["termination"] == "max_iters"


def test_cli_solver_failure_exit_code(tmp_path):
    sig = tmp_path / "sig.ssig.json"
    assert cli.main(["gen", "--n", "63", "--rank", "2", "--m", "40",
                     "--seed", "2", "--out", str(sig)]) == 0
    code = cli.main([
        "recover", "--input", str(sig), "--rank", "2",
        "--step", "fixed:500", "--config", '{"projection": false}',
        "--out", str(tmp_path / "r.json"),
    ])
    assert code == 2


def test_cli_phase_csv(tmp_path):
    out = tmp_path / "phase.csv"
    config = json.dumps(dict(
        n=31, r_values=[1], p_values=[0.6, 0.9], trials=2,
        solver_overrides=dict(max_iters=150),
    ))
    assert cli.main(["phase", "--config", config, "--out", str(out)]) == 0
    cols, rows = bench.read_csv_rows(out)
    assert cols == ("r", "p", "m", "successes", "trials",
                    "mean_iters", "mean_ms")
    assert len(rows) == 2
    assert (out.parent / "phase.csv.meta.json").exists()


def test_cli_noise_csv(tmp_path):
    out = tmp_path / "noise.csv"
    config = json.dumps(dict(
        n=31, r=2, sigma_values=[1e-2], m_values=[20], trials=1,
        solver_overrides=dict(max_iters=100),
    ))
    assert cli.main(["noise", "--config", config, "--out", str(out)]) == 0
    cols, _ = bench.read_csv_rows(out)
    assert cols == ("sigma_e", "snr_db", "m", "mean_rmse")


def test_cli_rejects_bad_solver_overrides(tmp_path):
    config = json.dumps(dict(solver_overrides=dict(bogus=1)))
    assert cli.main(["phase", "--config", config,
                     "--out", str(tmp_path / "x.csv")]) == 1


def test_cli_threads_env_override(tmp_path, monkeypatch):
    config = json.dumps(dict(
        n=31, r_values=[1], p_values=[0.9], trials=1,
        solver_overrides=dict(max_iters=100),
    ))
    monkeypatch.setenv("HANKEL_SCS_THREADS", "abc")
    assert cli.main(["phase", "--config", config,
                     "--out", str(tmp_path / "x.csv")]) == 1
    monkeypatch.setenv("HANKEL_SCS_THREADS", "2")
    assert cli.main(["phase", "--config", config,
                     "--out", str(tmp_path / "x.csv")]) == 0


def test_cli_selftest_exit_codes(tmp_path, monkeypatch):
    def fake_selftest(stream=None):
        print("PASS  stub", file=stream or __import__("sys").stdout)
        return True

    monkeypatch.setattr(bench, "run_selftest", fake_selftest)
    log = tmp_path / "selftest.log"
    assert cli.main(["selftest", "--out", str(log)]) == 0
    assert "PASS  stub" in log.read_text()

    monkeypatch.setattr(bench, "run_selftest", lambda stream=None: False)
    assert cli.main(["selftest"]) == 3
