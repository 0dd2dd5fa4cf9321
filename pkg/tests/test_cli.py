import csv
import json
import math

import numpy as np
import pytest

from mdihu.cli import ConfigError, config_from_dict, main, parse_angle, parse_config, run_descriptors

TABLE1 = {
    "case": "THREE_WELL",
    "angles": [0, "pi/12", "pi/8", "pi/6", "pi/4"],
    "cfl": ["small", "large"],
    "schemes": ["PPU_1D", "IHU_1D", "MULTID_PPU", "MULTID_IHU"],
}


def test_empty_file_gives_defaults(tmp_path):
    f = tmp_path / "empty.json"
    f.write_text("")
    cfg = parse_config(f)
    assert cfg.case == "THREE_WELL"
    assert cfg.angles == [0.0]
    assert [s.scheme for s in cfg.schemes] == ["MULTID_IHU"]


def test_angle_out_of_range_rejected():
    with pytest.raises(ConfigError, match="angle"):
        config_from_dict({"angle": 2 * math.pi})


def test_table1_sweep_gives_40_descriptors():
    descs = run_descriptors(config_from_dict(TABLE1))
    assert len(descs) == 40
    assert len({d.name for d in descs}) == 40


def test_unknown_keys_and_bad_json(tmp_path):
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"schemas": ["PPU_1D"]})
    with pytest.raises(ConfigError, match="newton"):
        config_from_dict({"newton": {"tolerance": 1}})
    f = tmp_path / "bad.json"
    f.write_text('{\n "case": "THREE_WELL",\n}')
    with pytest.raises(ConfigError, match=":3:"):
        parse_config(f)


def test_parse_angle_forms():
    assert parse_angle("pi/8") == pytest.approx(math.pi / 8)
    assert parse_angle("3pi/16") == pytest.approx(3 * math.pi / 16)
    assert parse_angle(0.25) == 0.25
    with pytest.raises(ConfigError):
        parse_angle("north")


def _tiny(tmp_path, **extra):
    doc = {"case": "THREE_WELL", "resolution": 11, "t_end": 0.01, **extra}
    f = tmp_path / "c.json"
    f.write_text(json.dumps(doc))
    return f


def test_run_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(_tiny(tmp_path, output={"vtk": True})), "--out", str(out)]) == 0
    (run,) = [d for d in out.iterdir() if d.is_dir()]
    sat = np.loadtxt(run / "saturation_final.csv", delimiter=",", skiprows=1)
    assert sat.shape == (11, 11)
    meta = json.loads((run / "saturation_final.json").read_text())
    assert meta["layout"].startswith("ny rows")
    assert (run / "saturation_final.vtk").read_text().startswith("# vtk")
    log = list(csv.DictReader(open(run / "newton_log.csv")))
    assert int(log[0]["step"]) == 1
    wc = list(csv.reader(open(run / "water_cut.csv")))
    assert wc[0][:2] == ["t_days", "pvi"] and len(wc) == len(log) + 1
    diag = json.loads((run / "diagnostics.json").read_text())
    assert diag["newton_iterations"] == sum(int(r["iterations"]) for r in log)
    assert diag["mass_balance_rel"] < 1e-8
    assert not (run / "FAILED").exists()


def test_sweep_summary_and_env_out(tmp_path, monkeypatch):
    out = tmp_path / "envout"
    monkeypatch.setenv("MDIHU_OUT", str(out))
    cfg = _tiny(tmp_path, angles=[0, "pi/4"], schemes=["PPU_1D", "MULTID_IHU"])
    assert main(["sweep", "--config", str(cfg), "--threads", "2"]) == 0
    rows = list(csv.DictReader(open(out / "summary.csv")))
    assert len(rows) == 4
    assert "MultiD-IHU" in (out / "summary_table.txt").read_text()
    orient = list(csv.DictReader(open(out / "orientation.csv")))
    assert len(orient) == 2


def test_failed_run_is_marked(tmp_path):
    out = tmp_path / "out"
    cfg = _tiny(tmp_path, newton={"max_iters": 1, "min_dt_fraction": 0.3})
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 1
    (run,) = [d for d in out.iterdir() if d.is_dir()]
    assert (run / "FAILED").exists()


def test_config_error_exit_code(tmp_path, capsys):
    f = tmp_path / "c.json"
    f.write_text('{"case": "NOPE"}')
    assert main(["run", "--config", str(f), "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_verify_subcommand(tmp_path):
    assert main(["verify", "--samples", "500", "--seed", "1", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "verify.csv")))
    assert all(r["pass"] == "1" for r in rows)


def test_dump_case(tmp_path):
    cfg = _tiny(tmp_path, case="HETEROGENEOUS")
    assert main(["dump-case", "--config", str(cfg), "--out", str(tmp_path / "d")]) == 0
    (d,) = list((tmp_path / "d").iterdir())
    info = json.loads((d / "case.json").read_text())
    assert info["nx"] == 11 and info["dirichlet_cells"]
    perm = np.loadtxt(d / "perm_mD.csv", delimiter=",", skiprows=1)
    assert perm.shape == (11, 11)
