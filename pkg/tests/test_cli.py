import json

from abclab.cli import main

from conftest import CONFIG_DIR


def cfg_path(name):
    return str(CONFIG_DIR / f"{name}.json")


def test_verify_abc1d(tmp_path, capsys):
    out = tmp_path / "verify.json"
    code = main(["verify", "--config", cfg_path("abc-1d"), "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["passed"] is True
    assert set(report["items"]) >= {
        "abb0-b2-block", "identity-ld", "resolvent-a0-formula", "block-dirichlet",
        "pencil-two-routes", "factorization", "factorization-shifted",
        "lm-product", "resolvent-acal-formula"}


def test_verify_special_includes_case_checks(tmp_path):
    out = tmp_path / "verify.json"
    code = main(["verify", "--config", cfg_path("special-case"), "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert "special-case-resolvent" in report["items"]
    assert "spectral-separation" in report["items"]


def test_verify_neutral_checks(tmp_path):
    out = tmp_path / "verify.json"
    code = main(["verify", "--config", cfg_path("timoshenko-strip"),
                 "--out", str(out), "--checks", "neutral-form-symmetry,neutral-ladder"])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["items"]["neutral-form-symmetry"]["value"] < 1e-10


def test_verify_unknown_check_is_usage_error(tmp_path):
    code = main(["verify", "--config", cfg_path("abc-1d"), "--checks", "nonsense"])
    assert code == 2


def test_spectrum_both_matches(tmp_path, capsys):
    out = tmp_path / "spec.csv"
    code = main(["spectrum", "--config", cfg_path("abc-1d"), "--method", "both",
                 "--out", str(out)])
    assert code == 0
    assert out.exists() and (tmp_path / "spec.csv.pairs.csv").exists()
    header = out.read_text().splitlines()[0]
    assert header == "re,im,classification,residual,gamma_member"


def test_spectrum_special_on_wrong_config_exits_2(tmp_path):
    out = tmp_path / "spec.csv"
    code = main(["spectrum", "--config", cfg_path("abc-1d"), "--method", "special",
                 "--out", str(out)])
    assert code == 2


def test_spectrum_direct_includes_zero_mode(tmp_path):
    # unsprung boundary with plain feedback: zero eigenvalue present
    doc = json.loads((CONFIG_DIR / "special-case.json").read_text())
    doc["flags"]["b1_mode"] = "zero"
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    out = tmp_path / "spec.csv"
    code = main(["spectrum", "--config", str(p), "--method", "direct", "--out", str(out)])
    assert code == 0
    assert "zero-mode" in out.read_text()


def test_simulate_energy_contract(tmp_path):
    doc = json.loads((CONFIG_DIR / "abc-1d.json").read_text())
    doc["coefficients"]["d"] = "0"
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    out = tmp_path / "sim.csv"
    code = main(["simulate", "--config", str(p), "--t-final", "2.0",
                 "--dt", "0.05", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,energy,integral_residual,state_norm,u_l2_norm"
    energies = [float(row.split(",")[1]) for row in lines[1:]]
    assert abs(energies[-1] - energies[0]) < 1e-8 * energies[0]


def test_simulate_deterministic_outputs(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (out1, out2):
        code = main(["simulate", "--config", cfg_path("abc-1d"), "--t-final", "1.0",
                     "--dt", "0.1", "--out", str(out), "--seed", "123"])
        assert code == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_compare_robin(tmp_path):
    out = tmp_path / "robin.csv"
    code = main(["compare-robin", "--config", cfg_path("abc-1d"), "--out", str(out)])
    assert code == 0
    summary = json.loads((tmp_path / "robin.csv.summary.json").read_text())
    assert summary["ratio_factor_ok"] is True
    assert summary["limit_within_20pct"] is True


def test_essential_proxy_interval(tmp_path):
    out = tmp_path / "ess.json"
    code = main(["essential-proxy", "--config", cfg_path("abc-1d"),
                 "--resolutions", "32,64", "--out", str(out)])
    assert code == 0
    data = json.loads(out.read_text())
    assert "compact_resolvent" in data
    assert data["essential_proxy"]["counts"] is None


def test_essential_proxy_strip(tmp_path):
    doc = {
        "geometry": {"kind": "strip", "nx": 8, "ny": 8},
        "coefficients": {"c": 1.0, "rho": "0.2", "m": "1", "d": "1", "k": "0"},
        "flags": {"b3_zero": True},
    }
    p = tmp_path / "strip.json"
    p.write_text(json.dumps(doc))
    out = tmp_path / "ess.json"
    code = main(["essential-proxy", "--config", str(p),
                 "--resolutions", "8,16", "--out", str(out)])
    assert code == 0
    data = json.loads(out.read_text())
    counts = [r["count"] for r in data["essential_proxy"]["refinements"]]
    assert counts == sorted(counts)


def test_io_error_exit_code(tmp_path):
    code = main(["simulate", "--config", cfg_path("abc-1d"), "--t-final", "0.2",
                 "--dt", "0.1", "--out", str(tmp_path / "nodir" / "x.csv")])
    assert code == 4


def test_bad_config_exit_code(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"bogus": 1}')
    code = main(["verify", "--config", str(p)])
    assert code == 2


def test_simulate_rk4_warns_on_coarse_grid(tmp_path, recwarn):
    out = tmp_path / "sim.csv"
    code = main(["simulate", "--config", cfg_path("abc-1d"), "--t-final", "0.5",
                 "--dt", "0.25", "--method", "rk4", "--out", str(out)])
    assert code == 0
    assert any("stability bound" in str(w.message) for w in recwarn.list)


def test_spectrum_certification_failure_exits_1(tmp_path):
    out = tmp_path / "spec.csv"
    code = main(["spectrum", "--config", cfg_path("abc-1d"), "--method", "both",
                 "--out", str(out), "--tol", "1e-20"])
    assert code == 1


def test_spectrum_pencil_covers_multiple_eigenvalues(tmp_path):
    # the special-case boundary branch is a multiplicity-n_b eigenvalue;
    # deduplicated roots must still cover every admissible seed
    out = tmp_path / "spec.csv"
    code = main(["spectrum", "--config", cfg_path("special-case"),
                 "--method", "pencil", "--out", str(out)])
    assert code == 0
