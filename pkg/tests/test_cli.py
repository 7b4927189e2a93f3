import csv
import json

import pytest

from tankcool import cli
from tankcool.model import bundled_config


def _rows(path):
    with open(path, encoding="utf-8") as fh:
        body = [line for line in fh if not line.startswith("#")]
    return list(csv.reader(body))


def _header(path):
    with open(path, encoding="utf-8") as fh:
        return dict(line[2:].rstrip("\n").split(": ", 1) for line in fh if line.startswith("# "))


def test_no_arguments_is_a_usage_error(capsys):
    assert cli.main([]) == cli.EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_unknown_config_is_a_usage_error(tmp_path):
    assert cli.main(["coupling", "--config", "no_such_thing", "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_bad_grid_is_a_usage_error(tmp_path):
    assert cli.main(["impedance", "--config", "arkr_at", "--out", str(tmp_path), "--grid", "1:2"]) == cli.EXIT_USAGE


def test_invalid_config_exits_3(tmp_path):
    bad = bundled_config("h2be_endcap").replace("count = 100", "count = -4")
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(bad)
    assert cli.main(["coupling", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_coupling_output(tmp_path):
    assert cli.main(["coupling", "--config", "h2be_endcap", "--out", str(tmp_path)]) == 0
    rows = dict(_rows(tmp_path / "coupling.csv")[1:])
    assert float(rows["exchange_time_s"]) == pytest.approx(57.57, rel=1e-3)
    assert float(rows["rabi_frequency_Hz"]) == pytest.approx(8.685e-3, rel=1e-3)
    head = _header(tmp_path / "coupling.csv")
    assert head["subcommand"] == "coupling" and head["seed"] == "1" and len(head["config_sha256"]) == 64


def test_manifest_lists_outputs(tmp_path):
    assert cli.main(["impedance", "--config", "arkr_at", "--out", str(tmp_path), "--grid=-10:10:21"]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["subcommand"] == "impedance"
    assert [p.rsplit("/", 1)[-1] for p in man["outputs"]] == ["impedance.csv"]
    assert man["tool_version"] and man["config_digest"] == _header(tmp_path / "impedance.csv")["config_sha256"]
    assert len(_rows(tmp_path / "impedance.csv")) == 1 + 21


def test_out_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["coupling", "--config", "h2be_endcap"]) == 0
    assert (tmp_path / "env" / "coupling.csv").is_file()


def test_seeded_reruns_are_byte_identical(tmp_path):
    args = ["exchange", "--config", "h2be_tank", "--ensemble", "8", "--every", "50", "--seed", "5"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "exchange.csv").read_bytes()
    assert a == (tmp_path / "b" / "exchange.csv").read_bytes()
    assert cli.main(["exchange", "--config", "h2be_tank", "--ensemble", "8", "--every", "50", "--seed", "6",
                     "--out", str(tmp_path / "c")]) == 0
    assert a != (tmp_path / "c" / "exchange.csv").read_bytes()


def test_exchange_row_count(tmp_path):
    assert cli.main(["exchange", "--config", "h2be_endcap", "--out", str(tmp_path), "--every", "10"]) == 0
    rows = _rows(tmp_path / "exchange.csv")
    # 400 s at 0.1 s, one row per 10 steps plus the start
    assert rows[0] == ["t_s", "E1_J", "E2_J", "T1_K", "T2_K"]
    assert len(rows) == 1 + 401


def test_intermittent_and_analytics(tmp_path):
    assert cli.main(["cool-intermittent", "--config", "h2be_tank", "--out", str(tmp_path), "--ensemble", "20",
                     "--tau-c", "0.4", "--cycles", "5"]) == 0
    assert len(_rows(tmp_path / "cool_intermittent.csv")) == 1 + 6
    assert cli.main(["cool-analytics", "--config", "h2be_tank", "--out", str(tmp_path), "--axis", "mismatch",
                     "--grid=-1:1:3"]) == 0
    rows = _rows(tmp_path / "cool_analytics.csv")
    assert rows[0][:3] == ["dnu_Hz", "Teq_K", "tau_eff_s"]
    assert float(rows[3][1]) == pytest.approx(0.048, rel=0.2)


def test_intermittent_precondition_exits_3(tmp_path):
    code = cli.main(["cool-intermittent", "--config", "h2be_tank", "--out", str(tmp_path), "--tau-c", "5",
                     "--cycles", "2"])
    assert code == 3


def test_spectrum_then_fit(tmp_path):
    out = str(tmp_path)
    assert cli.main(["spectrum", "--config", "arkr_at", "--out", out, "--grid=-3:3:31", "--grid", "146.5:152.5:151"]) == 0
    assert len(_rows(tmp_path / "spectrum.csv")) == 1 + 31 * 151
    assert cli.main(["fit", "--config", "arkr_at", "--out", out, "--in", str(tmp_path / "spectrum.csv"),
                     "--ceff-model", "exact"]) == 0
    res = json.loads((tmp_path / "fit.json").read_text())
    assert res["effective_capacitance"] == pytest.approx(1.96679e-14, rel=1e-6)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["subcommand"] == "fit"


def test_fit_missing_input_is_a_usage_error(tmp_path):
    assert cli.main(["fit", "--config", "arkr_at", "--out", str(tmp_path), "--in", str(tmp_path / "nope.csv")]) == 2


def test_sweep_small_grid(tmp_path):
    assert cli.main(["sweep", "--config", "h2be_endcap", "--out", str(tmp_path), "--grid", "0.01:0.02:2",
                     "--grid", "0:0:1"]) == 0
    rows = _rows(tmp_path / "sweep.csv")
    assert rows[0] == ["gamma_L_Hz", "dnu_Hz", "tau_cool_s", "converged"]
    assert len(rows) == 1 + 2
