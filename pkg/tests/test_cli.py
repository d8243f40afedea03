import csv

import pytest

from qmarket.cli import SERIES_COLUMNS, SUMMARY_COLUMNS, load_config, ConfigError, main


def _read(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_run_single_defaults(tmp_path):
    assert main(["run", "--scenario", "Ia/P1", "--out", str(tmp_path)]) == 0
    rows = _read(tmp_path / "Ia_P1.csv")
    assert tuple(rows[0]) == SERIES_COLUMNS
    assert len(rows) == 6002
    summary = _read(tmp_path / "summary.csv")
    assert tuple(summary[0]) == SUMMARY_COLUMNS and len(summary) == 2


def test_run_all_summary(tmp_path):
    assert main(["run", "--scenario", "all", "--no-series", "--out", str(tmp_path)]) == 0
    assert len(_read(tmp_path / "summary.csv")) == 97
    assert not (tmp_path / "Ia_P1.csv").exists()


def test_run_zero_lambda(tmp_path):
    assert main(["run", "--scenario", "Id", "--lambda", "0", "--out", str(tmp_path)]) == 0
    for sched in ("P1", "P2", "P3", "P4"):
        for row in _read(tmp_path / f"Id_{sched}.csv")[1:]:
            assert row[2:6] == ["0", "0", "0", "0"]


def test_summary_matches_series_extrema(tmp_path):
    assert main(["run", "--scenario", "IVc", "--lambda", "0.1", "--downsample", "37", "--out", str(tmp_path)]) == 0
    summary = {(r[0], r[1]): r for r in _read(tmp_path / "summary.csv")[1:]}
    for (label, sched), row in summary.items():
        series = [r[5] for r in _read(tmp_path / f"{label}_{sched}.csv")[1:]]
        vals = [float(x) for x in series]
        assert row[2] == series[vals.index(min(vals))]
        assert row[3] == series[vals.index(max(vals))]


def test_downsample_keeps_ends(tmp_path):
    assert main(["run", "--scenario", "Va/P2", "--downsample", "1000", "--out", str(tmp_path)]) == 0
    rows = _read(tmp_path / "Va_P2.csv")[1:]
    assert rows[0][0] == "0" and rows[-1][0] == "6"
    assert len(rows) <= 9


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("QMARKET_OUT", str(tmp_path / "env"))
    assert main(["run", "--scenario", "Ia/P3"]) == 0
    assert (tmp_path / "env" / "Ia_P3.csv").exists()


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(
        "scenarios: [IIa]\nschedules: [custom]\nlambda: 0.2\nstep: 0.01\n"
        "breakpoints: [[0, 1], [3, 2], [6, 2]]\nout: %s\n" % (tmp_path / "from_file")
    )
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "flag")]) == 0
    rows = _read(tmp_path / "flag" / "IIa_custom.csv")
    assert len(rows) == 602
    assert not (tmp_path / "from_file").exists()


def test_calibrate_flag(tmp_path, capsys):
    assert main(["run", "--scenario", "Ia/P1", "--lambda", "calibrate", "--out", str(tmp_path)]) == 0
    assert "lambda = 0.1006" in capsys.readouterr().out
    assert _read(tmp_path / "summary.csv")[1][3] == "4"


def test_bad_config_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("scenarios: [Ia]\nstep: -1\n")
    assert main(["run", "--config", str(cfg)]) != 0
    assert f"{cfg}:2:" in capsys.readouterr().err
    cfg.write_text("scenarios: [Ia]\n\nwidth: 3\n")
    assert main(["run", "--config", str(cfg)]) != 0
    assert f"{cfg}:3: unknown key" in capsys.readouterr().err
    cfg.write_text("scenarios: [Ia\nstep: 1\n")
    with pytest.raises(ConfigError, match=r"bad.yaml:\d+:"):
        load_config(str(cfg))


def test_bad_scenario(tmp_path, capsys):
    assert main(["run", "--scenario", "VIIa", "--out", str(tmp_path)]) == 2
    assert "VIIa" in capsys.readouterr().err


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--scenario", "Ia/P1", "--out", str(blocker / "sub")]) == 3


def test_deterministic_output(tmp_path):
    for d in ("one", "two"):
        assert main(["run", "--scenario", "all", "--lambda", "0.1", "--step", "0.005", "--out", str(tmp_path / d)]) == 0
    names = sorted(p.name for p in (tmp_path / "one").iterdir())
    assert len(names) == 97
    for name in names:
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_verify_oracle_default(capsys):
    assert main(["verify-oracle"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "closed (-4, -36) fock (-4, -36)" in out


def test_verify_oracle_boundary(capsys):
    code = main(["verify-oracle", "--omega-case", "0,4,3,2,1", "--omega-cutoffs", "C=3"])
    assert code != 0
    assert "truncation boundary" in capsys.readouterr().err


def test_verify_oracle_dimension_cap(capsys):
    assert main(["verify-oracle", "--cutoffs", "c=30,C=30"]) != 0
    err = capsys.readouterr().err
    assert "exceeds cap" in err and "c<=30" in err


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    assert "VI" in out and "(20, 10, 5, 1)" in out.replace(".0", "")
