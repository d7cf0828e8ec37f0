import io
import json

import pytest

from kamtorus import CoordinateWindow, FourierField
from kamtorus.cli import RunManifest, atomic_write, main, thread_limit, UsageError


def run(argv, env=None, monkeypatch=None):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_resonant_check_exits_1():
    code, out, _ = run(["check-nonresonance", "--omega", "1,1", "--spec", "ratio:poly:1:0.333",
                        "--kmax", "10"])
    data = json.loads(out)
    assert code == 1 and data["worst_k"] == [1, -1] and data["pass"] is False
    assert len(data["manifest"]) == 64


def test_golden_check_passes(tmp_path):
    path = tmp_path / "rep.json"
    code, _, _ = run(["check-nonresonance", "--omega", "1,phi", "--spec", "ratio:id:0.3333333333333333",
                      "--kmax", "50", "--out", str(path)])
    data = json.loads(path.read_text())
    manifest = json.loads((tmp_path / "rep.json.manifest.json").read_text())
    assert code == 0 and data["pass"]
    assert data["manifest"] == manifest["digest"]


def test_unknown_flag_exits_2():
    code, _, err = run(["verify-lemmas", "--bogus"])
    assert code == 2 and "usage error" in err
    assert run([])[0] == 2
    assert run(["no-such-command"])[0] == 2


def test_bad_scheme_exits_2():
    code, _, err = run(["scheme-report", "--scheme", "gevrey_3_1:eta=1", "--omega", "1,phi"])
    assert code == 2 and "eta_p" in err


def test_verify_lemmas_small(tmp_path):
    path = tmp_path / "lemmas.json"
    code, _, _ = run(["verify-lemmas", "--seed", "3", "--cases", "5", "--out", str(path)])
    data = json.loads(path.read_text())
    assert code == 0 and data["pass"] and set(data["lemmas"]) >= {"neumann", "residual"}
    assert all("worst_slack" in v for v in data["lemmas"].values())


def test_scheme_report_json():
    code, out, _ = run(["scheme-report", "--scheme", "dio_4_1_i:beta=1,b=2", "--omega", "1,phi",
                        "--horizon", "6"])
    data = json.loads(out)
    assert code == 0
    assert data["series_condition_I"]["verdict"] == "bounded-so-far"
    assert len(data["rho_weight_check"]["rho"]) == 6


def _perturbation(path):
    P = FourierField.from_terms(CoordinateWindow.first(2), {(1, -1): 1e-4, (-1, 1): 1e-4}, d=2, real=True)
    P.save(path)


def test_run_kam_smallness_exit_3(tmp_path):
    _perturbation(tmp_path / "P.json")
    code, _, err = run(["run-kam", "--omega", "1,phi", "--perturbation", str(tmp_path / "P.json"),
                        "--scheme", "dio_4_1_i:beta=1", "--nu-max", "2",
                        "--trace", str(tmp_path / "t.csv"), "--out", str(tmp_path / "r.json")])
    assert code == 3 and "SmallnessError" in err


def test_run_kam_outputs_embed_digest(tmp_path):
    _perturbation(tmp_path / "P.json")
    code, _, _ = run(["run-kam", "--omega", "1,phi", "--perturbation", str(tmp_path / "P.json"),
                      "--scheme", "dio_4_1_i:beta=1", "--nu-max", "2", "--allow-violations",
                      "--trace", str(tmp_path / "t.csv"), "--out", str(tmp_path / "r.json")])
    assert code == 0
    digest = json.loads((tmp_path / "r.json.manifest.json").read_text())["digest"]
    assert (tmp_path / "t.csv").read_text().startswith(f"# manifest: {digest}\n")
    result = json.loads((tmp_path / "r.json").read_text())
    assert result["manifest"] == digest and result["final_defect"] <= 1e-10
    psi = json.loads((tmp_path / result["psi_hat"]).read_text())
    assert psi["manifest"] == digest
    FourierField.load(tmp_path / result["psi_hat"])


def test_missing_perturbation_exits_2(tmp_path):
    code, _, _ = run(["run-kam", "--omega", "1,phi", "--perturbation", str(tmp_path / "none.json"),
                      "--scheme", "dio_4_1_i:beta=1", "--trace", str(tmp_path / "t.csv"),
                      "--out", str(tmp_path / "r.json")])
    assert code == 2


def test_thread_limit_validation(monkeypatch):
    assert thread_limit({"KAM_THREADS": "4"}) == 4
    assert thread_limit({}) >= 1
    for bad in ("0", "-2", "many"):
        with pytest.raises(UsageError):
            thread_limit({"KAM_THREADS": bad})
    monkeypatch.setenv("KAM_THREADS", "zero")
    assert run(["verify-lemmas", "--cases", "1"])[0] == 2


def test_manifest_digest_ignores_output_paths():
    a = RunManifest("x", {"p": 1}, outputs={"out": "a.json"})
    b = RunManifest("x", {"p": 1}, outputs={"out": "b/c.json"})
    assert a.digest == b.digest
    assert a.digest != RunManifest("x", {"p": 2}).digest


def test_atomic_write_leaves_no_temp(tmp_path):
    atomic_write(tmp_path / "sub" / "f.txt", "hello\n")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]
