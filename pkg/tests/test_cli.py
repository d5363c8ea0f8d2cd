import hashlib
import json
import os
import subprocess
import sys
import time
from pathlib import Path

from plateinv import cli
from plateinv import constants as C

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def load(name):
    return json.loads((CONFIGS / name).read_text())


def dump(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload, indent=2))
    return str(p)


def digests(folder):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(Path(folder).iterdir())}


def test_minimal_run_writes_measurements(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", str(CONFIGS / "minimal.json"), "--out", str(out)]) == 0
    lines = (out / "measurements.csv").read_text().splitlines()
    assert lines[0].startswith("# config_sha256: ")
    assert lines[1] == "kappa,node_index,x,y,z,re_u,im_u,re_lap_u,im_lap_u"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["stages"] == ["forward"]
    assert len(summary["forward"]["kappas"]) == 8


def test_run_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["run", str(CONFIGS / "minimal.json"), "--out", str(out)]) == 0
    assert digests(a) == digests(b)


def test_negative_radius_rejected(tmp_path, capsys):
    cfg = load("minimal.json")
    cfg["geometry"]["R"] = -1.0
    out = tmp_path / "o"
    assert cli.main(["run", dump(tmp_path, cfg), "--out", str(out)]) == 2
    assert not out.exists()
    assert "R" in capsys.readouterr().err


def test_unknown_key_reported_with_line(tmp_path, capsys):
    text = (CONFIGS / "minimal.json").read_text().replace(
        '"sweep": {"count": 8}', '"sweep": {"count": 8, "bogus": 1}')
    p = tmp_path / "cfg.json"
    p.write_text(text)
    line = next(i for i, s in enumerate(text.splitlines(), 1) if "bogus" in s)
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "bogus" in err and f":{line}:" in err


def test_invalid_json_reported(tmp_path, capsys):
    p = tmp_path / "cfg.json"
    p.write_text("{\n  \"geometry\": \n}")
    assert cli.main(["verify", str(p)]) == 2
    assert "cfg.json:3:" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["run", str(tmp_path / "nope.json")]) == 2


def test_empty_pipeline_verify(tmp_path, capsys):
    cfg = load("minimal.json")
    cfg["pipeline"] = []
    assert cli.main(["verify", dump(tmp_path, cfg)]) == 0
    assert "no checks selected" in capsys.readouterr().out


def test_verify_default_passes(capsys):
    t0 = time.perf_counter()
    assert cli.main(["verify", str(CONFIGS / "verify_default.json")]) == 0
    assert time.perf_counter() - t0 < 300
    out = capsys.readouterr().out
    for name in ("neumann_vs_dense", "expansion_order", "moment_extraction", "continuation"):
        assert any(name in l and l.endswith("PASS") for l in out.splitlines())


def test_sign_mutation_caught(monkeypatch, capsys):
    monkeypatch.setattr(C, "N0_POTENTIAL", -C.N0_POTENTIAL)
    assert cli.main(["verify", str(CONFIGS / "verify_default.json")]) == 4
    rows = [l for l in capsys.readouterr().out.splitlines() if l.startswith("moment_extraction")]
    assert rows and rows[0].endswith("FAIL")


def test_stages_rerun_from_artifacts(tmp_path):
    cfg = load("verify_default.json")
    cfg["pipeline"] = ["forward"]
    out = tmp_path / "o"
    assert cli.main(["run", dump(tmp_path, cfg, "fwd.json"), "--out", str(out)]) == 0
    for later in (["fit"], ["extract"], ["continue"]):
        cfg["pipeline"] = later
        assert cli.main(["run", dump(tmp_path, cfg, "later.json"), "--out", str(out)]) == 0
    for name in ("expansion_fitted.csv", "moments_rho_g.csv", "moments_rho_f.csv",
                 "continuation_result.csv"):
        assert (out / name).exists()
    s = json.loads((out / "summary.json").read_text())
    assert s["continue"]["relative_error_u"] <= 1e-4


def test_later_stage_without_inputs(tmp_path, capsys):
    cfg = load("minimal.json")
    cfg["pipeline"] = ["fit"]
    assert cli.main(["run", dump(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 3
    assert "missing input artifact" in capsys.readouterr().err


def test_stage_order_enforced(tmp_path):
    cfg = load("minimal.json")
    cfg["pipeline"] = ["fit", "forward"]
    assert cli.main(["run", dump(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2


def test_closed_loop_summary(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", str(CONFIGS / "closed_loop_invariant.json"), "--out", str(out)]) == 0
    rec = json.loads((out / "summary.json").read_text())["reconstruct"]
    assert rec["density"]["products_source"] == "reconstructed"
    assert abs(rec["density"]["recovered"] - 2.0) <= 0.05 * 2.0
    for t in ("rho_g", "rho_f"):
        assert rec[f"profile_{t}"]["relative_l2_error"] <= 5e-2


def test_threads_option(tmp_path, monkeypatch):
    for var in cli._THREAD_VARS:
        monkeypatch.delenv(var, raising=False)
    assert cli.main(["run", str(CONFIGS / "minimal.json"), "--out", str(tmp_path / "o"),
                     "--threads", "1"]) == 0
    assert all(os.environ[v] == "1" for v in cli._THREAD_VARS)
    assert cli.main(["run", str(CONFIGS / "minimal.json"), "--threads", "0"]) == 2


def test_console_entry_point(tmp_path):
    cfg = load("minimal.json")
    cfg["pipeline"] = []
    res = subprocess.run([sys.executable, "-m", "plateinv.cli", "verify", dump(tmp_path, cfg)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "no checks selected" in res.stdout
