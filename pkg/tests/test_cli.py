import json

import pytest

from holonorm.cli import RunConfig, main
from holonorm.spectrum import LyapunovSpectrum, resonant_indices

from conftest import fixture_path


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_resonance_report(capsys):
    code, out, _ = run(capsys, "resonance", fixture_path("spectrum_resonant.json"))
    assert code == 0
    rep = json.loads(out)
    assert rep["resonant"] == {"1": [[0, 2]], "2": []}
    assert rep["constraints"]["valid"] is True


def test_resonance_single_exponent(capsys):
    code, out, _ = run(capsys, "resonance", fixture_path("spectrum_single.json"))
    assert code == 0
    assert all(v == [] for v in json.loads(out)["resonant"].values())


def test_resonance_round_trip(capsys, tmp_path):
    code, out, _ = run(capsys, "resonance", fixture_path("spectrum_resonant.json"))
    rep = json.loads(out)
    spec = LyapunovSpectrum.from_dict(rep["spectrum"])
    again = {str(j): [list(a) for a in resonant_indices(spec, j)] for j in range(1, spec.l + 1)}
    assert again == rep["resonant"]
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(rep["spectrum"]))
    code2, out2, _ = run(capsys, "resonance", str(path))
    rep2 = json.loads(out2)
    for key in ("spectrum", "resonant", "gap", "gamma", "epsilon", "constraints"):
        assert rep2[key] == rep[key]


def test_malformed_input(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert run(capsys, "resonance", str(bad))[0] == 2
    assert run(capsys, "resonance", str(tmp_path / "missing.json"))[0] == 2
    assert run(capsys, "frobnicate", str(bad))[0] == 2
    bad.write_text(json.dumps({"exponents": [0.5, 1.0], "multiplicities": [1, 1]}))
    assert run(capsys, "resonance", str(bad))[0] == 2


def test_normalize_koenigs(capsys, tmp_path):
    code, out, _ = run(capsys, "normalize", fixture_path("koenigs_chain.json"), "--gamma", "0",
                       "--epsilon", "0.001", "--out", str(tmp_path))
    assert code == 0
    summary = json.loads(out)
    (alpha, (re, im)), = summary["phi_0_quadratic_first_component"]
    assert alpha == [2] and re == pytest.approx(0.4, abs=1e-12) and im == 0
    assert (tmp_path / "normalize.json").exists()
    assert (tmp_path / "normalize.csv").read_text().startswith("# holonorm")


def test_normalize_resonant_refused(capsys):
    code, _, err = run(capsys, "normalize", fixture_path("resonant_chain.json"), "--gamma", "0")
    assert code == 4
    assert "solve_homological" in err


def test_normalize_linear_chain(capsys):
    code, out, _ = run(capsys, "normalize", fixture_path("linear_chain.json"), "--gamma", "0")
    assert code == 0
    assert json.loads(out)["max_residual"] == 0
    code, out, _ = run(capsys, "normalize", fixture_path("linear_chain.json"))
    assert code == 0
    assert json.loads(out)["max_residual"] <= 1e-15


def test_csv_is_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(capsys, "normalize", fixture_path("koenigs_chain.json"), "--gamma", "0", "--epsilon",
                   "0.001", "--seed", "3", "--out", str(d))[0] == 0
    assert (a / "normalize.csv").read_bytes() == (b / "normalize.csv").read_bytes()
    head = (a / "normalize.csv").read_text().splitlines()[:3]
    assert head[0].startswith("# holonorm ") and head[1].startswith("# config_hash ") and head[2] == "# seed 3"


def test_config_hash_tracks_settings():
    base = RunConfig("normalize", "x.json", seed=1, input_sha256="ab")
    assert base.hash() == RunConfig("normalize", "y.json", seed=1, out="o", input_sha256="ab").hash()
    assert base.hash() != RunConfig("normalize", "x.json", seed=2, input_sha256="ab").hash()
    assert base.hash() != RunConfig("normalize", "x.json", seed=1, input_sha256="cd").hash()


def test_theorem_a_critical_seed(capsys):
    code, _, err = run(capsys, "theorem-a", fixture_path("z2_critical.json"))
    assert code == 5
    assert "critical" in err


def test_theorem_a_torus(capsys, tmp_path):
    code, out, _ = run(capsys, "theorem-a", fixture_path("torus.json"), "--out", str(tmp_path))
    assert code == 0, out
    rep = json.loads((tmp_path / "theorem_a.json").read_text())
    assert rep["pass"]
    assert rep["theorem_a"]["multiplicities"] == [2]
    lines = (tmp_path / "theorem_a.csv").read_text().splitlines()
    assert lines[3] == "n,lip_low,lip_high,bound_low,bound_high,residual,pass"


def test_repelling_z2_short(capsys, tmp_path):
    spec = tmp_path / "z2.json"
    spec.write_text(json.dumps({"k": 1, "d": 2, "components": [
        [{"alpha": [2, 0], "re": 1.0, "im": 0.0}], [{"alpha": [0, 2], "re": 1.0, "im": 0.0}]]}))
    code, out, _ = run(capsys, "repelling", str(spec), "--window", "4", "--samples", "200")
    assert code == 0
    rows = [l.split(",") for l in out.splitlines() if not l.startswith("#")]
    assert rows[0] == ["n", "count", "S_n", "lambda_hat", "gap"]
    assert [int(r[1]) for r in rows[1:]] == [2, 4, 8, 16]
    assert any("lower periods" in l for l in out.splitlines() if l.startswith("#"))


def test_repelling_rejects_k2(capsys):
    assert run(capsys, "repelling", fixture_path("torus.json"))[0] == 3


def test_bad_options(capsys):
    assert run(capsys, "normalize", fixture_path("koenigs_chain.json"), "--epsilon", "-1")[0] == 2
