import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qppstab import corpus
from qppstab.cli import main
from qppstab.io import dump_system, system_to_dict


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, json.loads(out)


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, (s, pd) in corpus.bundled().items():
        paths[name] = tmp_path / f"{name}.json"
        dump_system(paths[name], s, pd)
    return paths


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_validate_volterra(capsys, files):
    code, doc = run(capsys, "validate", "--input", files["volterra2d"])
    assert code == 0 and doc["valid"]
    r = doc["residuals"]
    assert r["lambda_residual"] == r["A_residual"] == r["skew_defect"] == 0.0
    assert doc["tolerances"]["poisson_tol"] == 1e-9


def test_validate_non_skew(capsys, tmp_path, volterra):
    doc = system_to_dict(*volterra)
    doc["poisson"]["K"] = [[0.0, 1.0], [1.0, 0.0]]
    code, out = run(capsys, "validate", "--input", write(tmp_path, "bad.json", doc))
    assert code == 1 and not out["valid"]
    assert out["residuals"]["skew_defect"] > 0


def test_validate_rank_deficient(capsys, tmp_path):
    doc = {"n": 2, "m": 2, "lambda": [0, 0], "A": [[0, 0], [0, 0]], "B": [[1, 2], [2, 4]]}
    code, out = run(capsys, "validate", "--input", write(tmp_path, "rd.json", doc))
    assert code == 1 and out["theorem1_eligible"] is False


def test_validate_recovers_without_poisson(capsys, tmp_path, example2):
    code, out = run(capsys, "validate", "--input", write(tmp_path, "e2.json", system_to_dict(example2[0])))
    assert code == 0 and out["valid"] and out["recovery"]["success"]


def test_validate_malformed(capsys, tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n "n": 2,\n "m": 2,\n "lambda": [1, 2],,\n}')
    code = main(["validate", "--input", str(p)])
    doc = json.loads(capsys.readouterr().out)
    assert code == 2 and doc["error"] == "input" and doc["line"] == 4


def test_validate_bad_field(capsys, tmp_path, volterra):
    doc = system_to_dict(*volterra)
    doc["A"] = [[0.0, "x"], [1.0, 0.0]]
    code, out = run(capsys, "validate", "--input", write(tmp_path, "f.json", doc))
    assert code == 2 and out["field"] == "A[0]"


def test_missing_file(capsys, tmp_path):
    code, out = run(capsys, "analyze", "--input", tmp_path / "nope.json")
    assert code == 2 and out["error"] == "io"


def test_analyze_nutku(capsys, files):
    code, out = run(capsys, "analyze", "--input", files["nutku3d"])
    assert code == 0 and out["verdict"] == "StableByTheorem2" and out["d_sign"] == "positive"
    fam = out["fixed_point_family"]
    assert fam["dimension"] == 1
    np.testing.assert_allclose(fam["base"], [0.0, 2.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(fam["directions"], [[1.0, 1.0, 1.0]], atol=1e-12)
    np.testing.assert_allclose(out["casimirs"], [[1.0, 1.0, 1.0]], atol=1e-12)
    assert out["lyapunov"] is None


def test_analyze_example3(capsys, files):
    code, out = run(capsys, "analyze", "--input", files["example3"])
    assert code == 0 and out["verdict"] == "StableByTheorem2"
    (x0,) = out["fixed_points"]
    expected = ((-0.5 + math.sqrt(4.25)) / 2) ** 2
    np.testing.assert_allclose(x0, [expected, expected], rtol=1e-12)
    assert out["lyapunov"] is not None
    assert all(h < 0 for h in out["hessian_diag"])
    assert [s["type"] for s in out["transform"]] == ["embed", "qmt"]


def test_analyze_volterra_fills_lyapunov(capsys, files):
    code, out = run(capsys, "analyze", "--input", files["volterra2d"])
    assert out["hessian_diag"] == [-1.0, -1.0]
    assert out["lyapunov"]["logcoeffs"] == [1.0, 1.0]
    assert out["tolerances"]["rank_rtol"] == 1e-10


def test_analyze_dissipative(capsys, tmp_path):
    doc = {"n": 2, "m": 2, "lambda": [1, 1], "A": [[-1, 0], [0, -1]], "B": [[1, 0], [0, 1]]}
    code, out = run(capsys, "analyze", "--input", write(tmp_path, "d.json", doc))
    assert code == 0 and out["verdict"] == "Inconclusive"
    assert out["symmetrized_form"]["classification"] == "negative definite"
    assert out["decomposition"]["source"] is None


def test_analyze_recovers(capsys, tmp_path, nutku):
    code, out = run(capsys, "analyze", "--input", write(tmp_path, "n.json", system_to_dict(nutku[0])))
    assert out["decomposition"]["source"] == "recovered"
    assert out["verdict"] == "StableByTheorem2"


def test_analyze_output_file(capsys, files, tmp_path):
    target = tmp_path / "report.json"
    assert main(["analyze", "--input", str(files["volterra2d"]), "--output", str(target)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(target.read_text())["verdict"] == "StableByTheorem2"


def test_lyapunov_nutku(capsys, files):
    code, out = run(capsys, "lyapunov", "--input", files["nutku3d"], "--point", "1,3,2")
    assert code == 0
    assert out["kappa"] == pytest.approx([-1.0], abs=1e-12)
    assert out["family_parameter"] == pytest.approx([1.0], abs=1e-12)
    assert out["gradient_norm"] <= 1e-10
    np.testing.assert_allclose(out["hessian_diag_lv"], [1.0, 1 / 3, 0.5], rtol=1e-14)
    np.testing.assert_allclose(out["lyapunov"]["logcoeffs"], [-1.0, -3.0, -2.0], atol=1e-12)


def test_lyapunov_by_family_parameter(capsys, files):
    code, out = run(capsys, "lyapunov", "--input", files["nutku3d"], "--kappa", "1")
    assert code == 0
    np.testing.assert_allclose(out["point"], [1.0, 3.0, 2.0], atol=1e-12)


def test_lyapunov_family_parameter_outside_orthant(capsys, files):
    code, out = run(capsys, "lyapunov", "--input", files["nutku3d"], "--kappa", "-1")
    assert code == 3 and out["error"] == "refusal"


def test_lyapunov_volterra(capsys, files):
    code, out = run(capsys, "lyapunov", "--input", files["volterra2d"], "--point", "1,1")
    assert code == 0 and out["casimir_correction"] == [0.0, 0.0]
    assert out["lyapunov"] == out["hamiltonian"]


def test_lyapunov_refusal(capsys, files):
    code, out = run(capsys, "lyapunov", "--input", files["volterra2d"], "--point", "2,2")
    assert code == 3 and "not a fixed point" in out["message"]


def test_lyapunov_needs_point(files):
    with pytest.raises(SystemExit) as exc:
        main(["lyapunov", "--input", str(files["volterra2d"])])
    assert exc.value.code == 2


def test_bad_tolerance(files):
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--input", str(files["volterra2d"]), "--tol", "-1"])
    assert exc.value.code == 2


def test_simulate_csv(capsys, files, tmp_path):
    target = tmp_path / "t.csv"
    code, out = run(capsys, "simulate", "--input", files["volterra2d"], "--point", "1.01,1",
                    "--t-end", "30", "--fixed-point", "1,1", "--output", target)
    assert code == 0 and not out["diverged"]
    assert out["drift"]["H"]["relative"] <= 1e-8
    assert out["oscillation"]["period"] == pytest.approx(2 * math.pi, rel=1e-3)
    assert out["small_oscillation_theory"]["omega"] == 1.0
    lines = target.read_text().splitlines()
    assert lines[0] == "t,x1,x2,drift_H,drift_H_C"
    assert len(lines) == out["samples"] + 1


def test_simulate_casimir_columns(capsys, files):
    code = main(["simulate", "--input", str(files["nutku3d"]), "--point", "1,3.5,2.5",
                 "--t-end", "5", "--format", "csv"])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out.splitlines()[0] == "t,x1,x2,x3,drift_H,drift_C1"
    summary = json.loads(captured.err)
    assert summary["drift"]["C1"]["absolute"] <= 1e-7


def test_simulate_divergence(capsys, tmp_path):
    doc = {"n": 1, "m": 1, "lambda": [0], "A": [[1]], "B": [[1]]}
    target = tmp_path / "div.csv"
    code, out = run(capsys, "simulate", "--input", write(tmp_path, "x.json", doc), "--point", "1",
                    "--t-end", "3", "--output", target)
    assert code == 1 and out["diverged"]
    rows = target.read_text().splitlines()
    assert len(rows) == out["samples"] + 1 and out["final_time"] < 1.01


def test_examples_round_trip(capsys, tmp_path):
    outdir = tmp_path / "ex"
    code, out = run(capsys, "examples", "--output", outdir)
    assert code == 0 and out["all_passed"]
    assert sorted(p.name for p in outdir.iterdir()) == [
        "example2.json", "example3.json", "nutku3d.json", "report.json", "volterra2d.json"]
    report = json.loads((outdir / "report.json").read_text())
    names = [c["name"] for c in report["checks"]]
    assert any("interior-point condition" in n for n in names)
    assert any("zero symmetrized form" in n for n in names)
    for name in ("volterra2d", "example2", "example3", "nutku3d"):
        code, doc = run(capsys, "validate", "--input", outdir / f"{name}.json")
        assert code == 0 and doc["valid"], name


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "qppstab", "validate", "--input", str(files["volterra2d"])],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["valid"] is True
