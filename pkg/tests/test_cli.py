import json
from importlib import resources

import pytest

from asymtorus.cli import GOLDEN_RATIO_CONJ, RunConfig, main, parse_profile, parse_theta


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_helpers():
    assert parse_theta("1/5") == 0.2
    assert parse_theta("golden") == GOLDEN_RATIO_CONJ
    assert parse_profile("eps=0.3") == [[1, 0, 0.3, 0.0], [-1, 0, 0.3, 0.0]]
    assert parse_profile("eps2=0.1")[0][:2] == [0, 1]
    assert parse_profile("1,1,0.1,0;-1,-1,0.1,0") == [[1, 1, 0.1, 0.0], [-1, -1, 0.1, 0.0]]


def test_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"theta": 0.25, "cutoff": 8}))
    cfg = RunConfig.load(str(path))
    assert cfg.theta == 0.25 and cfg.cutoff == 8 and cfg.k_floor == 0.1
    path.write_text(json.dumps({"thetta": 0.25}))
    with pytest.raises(ValueError):
        RunConfig.load(str(path))


def test_bad_config_exit_code(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    code, _, err = run(capsys, "--config", str(path), "classical")
    assert code == 2 and "bad config" in err


def test_verify_b2_passes(capsys):
    code, out, _ = run(capsys, "verify-b2")
    assert code == 0
    assert out.count("match") == 4


def test_verify_b2_negative_control(tmp_path, capsys):
    # one coefficient changed in a copy of a golden file
    lines = resources.files("asymtorus.golden").joinpath("b2_even_A.tex").read_text().splitlines()
    assert lines[1].startswith("+ 4 ")
    lines[1] = "+ 5 " + lines[1][4:]
    (tmp_path / "b2_even_A.tex").write_text("\n".join(lines) + "\n")
    code, out, _ = run(capsys, "verify-b2", "--golden-dir", str(tmp_path))
    assert code == 1
    assert "plain even part: 47 words, MISMATCH" in out
    assert "first differing word: golden 5 k b_0^2" in out and "computed coefficient 4" in out
    assert "chiral even part: 12 words, match" in out


def test_curvature_and_gauss_bonnet(capsys, tmp_path):
    code, out, _ = run(capsys, "--output", str(tmp_path), "curvature", "--markdown")
    assert code == 0 and "| F11 |" in out
    data = json.loads((tmp_path / "curvature_plain.json").read_text())
    assert data["channel"] == "plain" and len(data["entries"]) == 6
    code, out, _ = run(capsys, "curvature", "--chiral")
    assert code == 0 and "normalization: -1·i" in out
    code, out, _ = run(capsys, "gauss-bonnet")
    assert code == 0 and "Gauss-Bonnet: holds" in out


def test_classical(capsys):
    code, out, _ = run(capsys, "classical")
    assert code == 0 and "consistent" in out


def test_symbols_json(capsys):
    code, out, _ = run(capsys, "symbols", "--format", "json")
    assert code == 0
    assert set(json.loads(out)) >= {"a2", "b2", "b2_even"}


def test_spectrum(capsys, tmp_path):
    code, out, _ = run(capsys, "--output", str(tmp_path), "spectrum", "--N", "6")
    assert code == 0
    assert json.loads(out)["size"] == 2 * 13 ** 2
    assert (tmp_path / "spectrum.csv").read_text().startswith("index,eigenvalue")


def test_heat_output_is_reproducible(capsys, tmp_path):
    texts = []
    for sub in ("a", "b"):
        code, out, _ = run(capsys, "--output", str(tmp_path / sub), "heat", "--N", "12",
                           "--t-max", "0.05")
        texts.append(((tmp_path / sub / "heat_fit.json").read_bytes(),
                      (tmp_path / sub / "heat_samples.csv").read_bytes()))
        assert json.loads(out)["dim_ker"] == 2
    assert texts[0] == texts[1]


def test_positivity_error_exit(capsys):
    code, _, err = run(capsys, "spectrum", "--N", "4", "--k-profile", "eps=0.8")
    assert code == 2 and "error" in err


def test_section4_reports_checks(capsys):
    code, out, _ = run(capsys, "section4", "--trials", "2")
    data = json.loads(out)
    assert data["checks"]["twobein_symbolic_zero"] and data["checks"]["twobein_numeric_zero"]
    # for the default U1-only profile the Rosenberg value vanishes identically
    assert not data["checks"]["rosenberg_nonzero"] and code == 1


def test_oracle_small(capsys):
    code, out, _ = run(capsys, "oracle", "--points", "1", "--trials", "3")
    data = json.loads(out)
    assert code == 0 and data["seconds"] is None
    assert data["quadrature"]["descriptors"] > 40
