import json
from importlib import resources

import pytest

from cgolab.cli import ConfigError, load_config, main, preset_names


def _preset(name):
    return json.loads(resources.files("cgolab.presets").joinpath(f"{name}.json").read_text())


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_presets_listed(capsys):
    assert main(["presets"]) == 0
    listed = capsys.readouterr().out.split()
    assert set(listed) == set(preset_names())
    assert {"recover_bump_q", "reconstruct_box", "decay_smooth_q"} <= set(listed)


def test_usage_errors(tmp_path):
    assert main(["frobnicate"]) == 2
    assert main(["recover", "--config", "no_such_preset", "--out", str(tmp_path / "x")]) == 2


def test_invalid_json_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "grid": {"N": 32,}\n}\n')
    assert main(["recover", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "2:" in err and "^" in err
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_short_decay_sweep_refused(tmp_path):
    cfg = _preset("decay_smooth_q")
    cfg["grid"]["N"] = 16
    cfg["h_sweep"] = {"start": 3, "count": 4}
    out = tmp_path / "decay"
    assert main(["cgo-decay", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 2
    assert "config" in _manifest(out)["error"]


def test_unknown_estimate_check(tmp_path):
    cfg = _preset("estimates_quick")
    cfg["checks"] = ["trilinear", "not_a_check"]
    assert main(["verify-estimates", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "e")]) == 2


def test_recover_passes_and_is_deterministic(tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["recover", "--config", "recover_bump_q", "--out", str(out), "--seed", "3"]) == 0
    m1, m2 = (_manifest(o) for o in outs)
    assert m1["seed"] == 3 and m1["passed"] and m1["checks"] == {"frame0:q": True}
    assert m1["files"] == m2["files"]
    assert m1["config_hash"] == m2["config_hash"]
    assert m1["c_phase"] is not None
    assert (outs[0] / "config.json").exists()


def test_failed_check_exit_code(tmp_path):
    cfg = _preset("recover_bump_q")
    cfg["recover"]["tolerance"] = 1e-14
    out = tmp_path / "tight"
    assert main(["recover", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 1
    assert not all(_manifest(out)["checks"].values())


def test_verify_estimates_subset(tmp_path):
    cfg = _preset("estimates_quick")
    cfg["checks"] = ["jacobian", "trilinear"]
    out = tmp_path / "est"
    assert main(["verify-estimates", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    man = _manifest(out)
    assert set(man["checks"]) == {"jacobian", "trilinear"}
    assert man["backend"] in ("compiled", "python")
