import json

import pytest

from nekhoroshev_lab.cli import main

from conftest import DEMOS


@pytest.fixture(autouse=True)
def run_root(tmp_path, monkeypatch):
    monkeypatch.setenv("NEKHOROSHEV_LAB_RUNS", str(tmp_path / "runs"))
    return tmp_path / "runs"


def only_run(root, command):
    runs = [p for p in root.iterdir() if p.name.endswith(command)]
    assert len(runs) == 1
    return runs[0]


def test_approx_golden(capsys):
    assert main(["approx", "--v", "1,0.618034", "--Q", "20"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["T"] == "13" and out["omega"]["numerator"] == ["13", "8"]


def test_approx_exact(capsys):
    assert main(["approx", "--v", "1,1/2", "--Q", "4"]) == 0
    assert json.loads(capsys.readouterr().out)["error"] == "0"


def test_approx_zero_vector(capsys):
    assert main(["approx", "--v", "0,0", "--Q", "5"]) == 2
    assert "zero vector" in capsys.readouterr().err


def test_approx_parse_error():
    with pytest.raises(SystemExit) as exc:
        main(["approx", "--v", "1,x", "--Q", "5"])
    assert exc.value.code == 2


def test_approx_file(tmp_path, capsys):
    p = tmp_path / "v.json"
    p.write_text('{"v": [1, 0.5], "Q": 4}')
    assert main(["approx", "--file", str(p)]) == 0


def test_sdm_saddle_refuted(run_root, capsys):
    code = main(["sdm", "--h", str(DEMOS / "saddle.json"), "--gamma", "0.1", "--tau", "11",
                 "--Lmax", "3", "--grid", "16", "--random-points", "100"])
    assert code == 1
    out = capsys.readouterr().out
    assert "refuted" in out and "subspace 1,1" in out
    run = only_run(run_root, "sdm")
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["seed"] == 0 and manifest["command"] == "sdm"
    assert (run / "sdm.csv").exists() and (run / "hamiltonian.json").exists()


def test_sdm_convex_passes(run_root, tmp_path):
    h = tmp_path / "convex.json"
    h.write_text('{"n": 2, "terms": [{"k": [0, 0], "alpha": [2, 0], "re": 0.5, "im": 0},'
                 ' {"k": [0, 0], "alpha": [0, 2], "re": 0.5, "im": 0}]}')
    assert main(["sdm", "--h", str(h), "--grid", "8", "--random-points", "10"]) == 0


def test_sdm_prevalence(run_root):
    code = main(["sdm", "--h", str(DEMOS / "saddle.json"), "--grid", "8", "--random-points", "0",
                 "--Lmax", "2", "--prevalence", "0.5,0.25", "--samples", "1000"])
    assert code == 1
    run = only_run(run_root, "sdm")
    assert (run / "prevalence.csv").read_text().startswith("gamma,bad_fraction")


def test_exponents(capsys, run_root):
    assert main(["exponents", "--n", "2", "--tau", "2"]) == 0
    out = capsys.readouterr().out
    assert "a = b = 1/432" in out
    run = only_run(run_root, "exponents")
    assert json.loads((run / "ledger.json").read_text())["plan"]["b"] == "1/432"


def test_exponents_gamma_half(capsys):
    assert main(["exponents", "--gamma", "0.5", "--log10-eps", "-200"]) == 0
    assert "binding: ix'" in capsys.readouterr().out


def test_scaling_slope(run_root, capsys):
    code = main(["scaling", "--h", str(DEMOS / "saddle_pert.json"), "--eps", "1e-2,1e-3,1e-4",
                 "--delta", "0.1"])
    assert code == 0
    run = only_run(run_root, "scaling")
    slope = json.loads((run / "scaling.json").read_text())["slope"]
    assert slope == pytest.approx(-1.0, abs=0.05)
    lines = (run / "scaling.csv").read_text().splitlines()
    assert lines[0] == "eps,t_star,censored,max_drift" and len(lines) == 4


def test_drift_long_and_rerun(run_root, capsys):
    args = ["drift", "--h", str(DEMOS / "saddle_pert.json"), "--eps", "1e-2", "--horizon", "5",
            "--stride", "10", "--long", "--Q", "10"]
    assert main(args) == 0
    run = only_run(run_root, "drift")
    assert (run / "trace.csv").read_text().startswith("t,variable,value")
    capsys.readouterr()
    assert main(["rerun", str(run)]) == 0
    assert "trace.csv: identical" in capsys.readouterr().out
    assert len([p for p in run_root.iterdir() if p.name.endswith("drift")]) == 2


def test_nf_and_rerun(run_root, capsys):
    h = DEMOS / "convex_pert.json"
    assert main(["nf", "--h", str(h), "--eps", "1e-12", "--m", "2"]) == 0
    run = only_run(run_root, "nf")
    summary = json.loads((run / "summary.json").read_text())
    assert summary["status"] == "ok" and summary["max_contraction"] < 1
    assert main(["rerun", str(run)]) == 0


def test_nf_rejected(run_root):
    h = DEMOS / "convex_pert.json"
    assert main(["nf", "--h", str(h), "--eps", "0.5", "--m", "1", "--s", "0.9", "--r", "0.1"]) == 1


def test_config_file(tmp_path, run_root, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[drift]\neps = 1e-2\nhorizon = 2\nstride = 50\nQ = 10\n")
    assert main(["drift", "--h", str(DEMOS / "saddle_pert.json"), "--config", str(cfg),
                 "--horizon", "3"]) == 0
    run = only_run(run_root, "drift")
    params = json.loads((run / "manifest.json").read_text())["params"]
    assert params["eps"] == 0.01 and params["horizon"] == 3.0 and params["Q"] == 10.0


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[drift]\nbogus = 1\n")
    assert main(["drift", "--h", str(DEMOS / "saddle_pert.json"), "--config", str(cfg)]) == 2


def test_missing_hamiltonian(capsys):
    assert main(["drift", "--h", "does-not-exist.json"]) == 2
    assert main(["drift"]) == 2


def test_rerun_missing_manifest(tmp_path):
    assert main(["rerun", str(tmp_path)]) == 2
