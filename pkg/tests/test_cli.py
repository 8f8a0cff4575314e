"""Command-line surface: reports, sweeps, calibration files, exit codes."""

from __future__ import annotations

import configparser
import re

import pytest

from rfharvest.cli import SWEEP_CSV_HEADER, main
from rfharvest.errors import LedgerError


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# -- budget -----------------------------------------------------------------

def test_budget_prints_reference_rows(capsys):
    code, out, _ = _run(capsys, ["budget"])
    assert code == 0
    assert "== Power budget ==" in out
    assert re.search(r"monitor_active\s+1\.80\s+0\.00001\s+10\.0\s+0\.00018", out)
    assert re.search(r"controller_active\s+1\.80\s+0\.00001\s+8\.0\s+0\.00014", out)
    assert re.search(r"sensor\s+3\.30\s+0\.00055\s+5\.0\s+0\.00908", out)
    assert re.search(r"zigbee\s+3\.30\s+0\.03500\s+2\.7\s+0\.31185", out)
    assert re.search(r"total\s+0\.32\s*$", out, re.MULTILINE)


def test_budget_scales_with_profile_override(tmp_path, capsys):
    scn = _write(tmp_path, "long_tx.scenario",
                 "[management]\nprofile.zigbee.t_s = 5.4\n")
    code, out, _ = _run(capsys, ["budget", scn])
    assert code == 0
    assert re.search(r"zigbee\s+3\.30\s+0\.03500\s+5\.4\s+0\.62370", out)
    assert re.search(r"total\s+0\.63\s*$", out, re.MULTILINE)


def test_budget_lists_assumptions_but_not_explicit_keys(tmp_path, capsys):
    scn = _write(tmp_path, "explicit.scenario",
                 "[storage]\ncap2_c_f = 2.0\n")
    code, out, _ = _run(capsys, ["budget", scn])
    assert code == 0
    assert "== Assumptions (values not set explicitly) ==" in out
    assert "storage.cap2_c_f" not in out
    assert "storage.cap1_c_f = 1.5" in out
    assert "frontend.stages = 25 (from preset)" in out


def test_budget_out_file_matches_stdout(tmp_path, capsys):
    out_path = tmp_path / "budget.txt"
    code, out, _ = _run(capsys, ["budget", "--out", str(out_path)])
    assert code == 0
    assert out_path.read_text() == out


# -- run --------------------------------------------------------------------

def test_run_shipped_ideal_scenario_tenth_scale(capsys):
    # 0.032 J at a constant 1.9953e-7 W: exactly a tenth of the full
    # accumulation study, so it finishes in well under a second.
    code, out, _ = _run(capsys, ["run", "paper_ideal", "--until-joules", "0.032"])
    assert code == 0
    assert "scenario: builtin:paper_ideal" in out
    assert "stop reason: stored" in out
    assert "simulated time: 160380.0 s (1.86 days)" in out
    assert "time to first transmission: none" in out
    assert "go threshold: n/a (loads disabled)" in out
    # the shipped notes keep the inconsistent commonly quoted figure visible
    assert "== Notes ==" in out
    assert "11.7" in out
    assert "18.56" in out


def test_run_completes_a_duty_cycle(tmp_path, capsys):
    scn = _write(tmp_path, "hot.scenario", (
        "[source]\ntype = constant\nlevel_dbm = -20.0\n\n"
        "[frontend]\ngamma_sq = 0.0\n\n"
        "[storage]\ncap1_c_f = 0.1\ncap2_c_f = 0.05\n\n"
        "[management]\nwake_period_s = 300.0\ngo_threshold_v = 2.0\n\n"
        "[engine]\nt_end_s = 1000.0\n"
    ))
    code, out, _ = _run(capsys, ["run", scn, "--until-tx", "1"])
    assert code == 0
    assert "stop reason: transmissions" in out
    assert "transmissions: 1    aborted cycles: 0" in out
    assert "time to first transmission: 443.0 s" in out
    assert "go threshold: 2.0000 V" in out
    assert "WARNING" not in out


def test_run_seeded_rerun_is_byte_identical(tmp_path, capsys):
    scn = _write(tmp_path, "amb.scenario", (
        "[management]\nloads_enabled = false\n\n"
        "[engine]\nt_end_s = 1800.0\n"
    ))
    t1, t2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    code1, out1, _ = _run(capsys, ["run", scn, "--seed", "7", "--trace", str(t1)])
    code2, out2, _ = _run(capsys, ["run", scn, "--seed", "7", "--trace", str(t2)])
    assert code1 == 0 and code2 == 0
    assert out1 == out2
    assert t1.read_bytes() == t2.read_bytes()
    header = t1.read_text().splitlines()[0]
    assert header == ("t_s,p_avail_dbm,v_cap1,v_cap2,state,"
                      "e_harvested_j,e_consumed_j,e_leaked_j")

    _, out3, _ = _run(capsys, ["run", scn, "--seed", "8"])
    assert out3 != out1


def test_run_warns_when_monitor_outdraws_harvest(tmp_path, capsys):
    # -45 dBm leaves the carrier peak under the rectifier conduction drop:
    # nothing harvests while the powered monitor keeps drawing.
    scn = _write(tmp_path, "deficit.scenario", (
        "[source]\ntype = constant\nlevel_dbm = -45.0\n\n"
        "[storage]\ncap2_v0 = 2.0\n\n"
        "[engine]\nt_end_s = 600.0\n"
    ))
    code, out, _ = _run(capsys, ["run", scn])
    assert code == 0
    assert "mean harvested power: 0 W" in out
    assert ("WARNING: monitor quiescent draw meets or exceeds mean harvested "
            "power") in out


def test_run_missing_scenario_file_exits_with_usage_error(capsys):
    code, out, err = _run(capsys, ["run", "/nope/missing.scenario"])
    assert code == 2
    assert out == ""
    assert "error: scenario file not found: '/nope/missing.scenario'" in err


def test_run_rejects_conflicting_scenario_arguments(tmp_path, capsys):
    a = _write(tmp_path, "a.scenario", "[engine]\nt_end_s = 10.0\n")
    b = _write(tmp_path, "b.scenario", "[engine]\nt_end_s = 20.0\n")
    code, _, err = _run(capsys, ["run", a, "--scenario", b])
    assert code == 2
    assert "scenario given twice with different values" in err


def test_run_maps_ledger_error_to_consistency_exit(capsys, monkeypatch):
    def boom(scenario, trace_path=None):
        raise LedgerError("energy balance off by 1 J")

    monkeypatch.setattr("rfharvest.cli.run_scenario", boom)
    code, out, err = _run(capsys, ["run", "paper_ideal"])
    assert code == 3
    assert out == ""
    assert "consistency error: energy balance off by 1 J" in err


# -- sweep ------------------------------------------------------------------

def test_sweep_writes_one_csv_row_per_value(tmp_path, capsys):
    scn = _write(tmp_path, "sw.scenario", (
        "[source]\ntype = constant\nlevel_dbm = -37.0\n\n"
        "[management]\nloads_enabled = false\n\n"
        "[engine]\nt_end_s = 300.0\n"
    ))
    code, out, _ = _run(
        capsys, ["sweep", scn, "--sweep", "source.level_dbm=-40,-35,-30"]
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == SWEEP_CSV_HEADER
    assert lines[0] == ("value,time_to_first_tx_s,transmissions,final_v2,"
                        "e_harvested_j,v_oc_v")
    rows = [line.split(",") for line in lines[1:]]
    assert [r[0] for r in rows] == ["-40", "-35", "-30"]
    assert all(r[1] == "" and r[2] == "0" for r in rows)  # loads disabled
    harvested = [float(r[4]) for r in rows]
    v_oc = [float(r[5]) for r in rows]
    assert harvested == sorted(harvested) and harvested[0] < harvested[-1]
    assert v_oc == sorted(v_oc) and v_oc[0] < v_oc[-1]


def test_sweep_with_no_values_emits_header_only(tmp_path, capsys):
    scn = _write(tmp_path, "sw.scenario", (
        "[source]\ntype = constant\nlevel_dbm = -37.0\n\n"
        "[engine]\nt_end_s = 10.0\n"
    ))
    code, out, _ = _run(capsys, ["sweep", scn, "--sweep", "source.level_dbm="])
    assert code == 0
    assert out == SWEEP_CSV_HEADER + "\n"


def test_sweep_unknown_key_exits_with_usage_error(tmp_path, capsys):
    scn = _write(tmp_path, "sw.scenario", "[engine]\nt_end_s = 10.0\n")
    code, _, err = _run(capsys, ["sweep", scn, "--sweep", "storage.nope=1"])
    assert code == 2
    assert "error: unknown key 'storage.nope'" in err


# -- calibrate ---------------------------------------------------------------

def test_calibrate_preset_writes_three_parameter_sets(tmp_path, capsys):
    out_path = tmp_path / "fp.ini"
    code, out, _ = _run(capsys, ["calibrate", "--preset", "paper",
                                 "--out", str(out_path)])
    assert code == 0
    assert f"wrote 3 parameter set(s) to {out_path}" in out

    residuals = re.findall(r"residual ([+-]\d+\.\d+) dB", out)
    assert len(residuals) == 3
    assert all(abs(float(r)) <= 0.1 for r in residuals)

    ini = configparser.ConfigParser()
    ini.read(out_path)
    assert set(ini.sections()) == {
        "schottky_100MHz", "zerovt_100MHz", "zerovt_900MHz"
    }
    for name in ini.sections():
        sec = ini[name]
        assert float(sec["v_drop"]) > 0.0
        assert sec["alpha"] == "0.7"
        assert sec["r_in_ohm"] == "5000.0"
    assert ini["schottky_100MHz"]["device"] == "schottky"
    assert ini["schottky_100MHz"]["stages"] == "20"
    assert ini["schottky_100MHz"]["tank_q"] == "1.0"
    assert ini["zerovt_100MHz"]["stages"] == "25"
    assert ini["zerovt_900MHz"]["carrier_hz"] == "900000000.0"


def test_calibrate_single_custom_target(tmp_path, capsys):
    out_path = tmp_path / "one.ini"
    code, out, _ = _run(capsys, ["calibrate", "--target",
                                 "schottky:12:250e6:-22", "--out", str(out_path)])
    assert code == 0
    assert "schottky_12st_250MHz: target -22.00 dBm" in out
    residuals = re.findall(r"residual ([+-]\d+\.\d+) dB", out)
    assert len(residuals) == 1 and abs(float(residuals[0])) <= 0.1

    ini = configparser.ConfigParser()
    ini.read(out_path)
    assert ini.sections() == ["schottky_12st_250MHz"]
    assert ini["schottky_12st_250MHz"]["stages"] == "12"


def test_calibrate_contradictory_targets_fail_loudly(tmp_path, capsys):
    code, _, err = _run(capsys, [
        "calibrate",
        "--target", "schottky:20:100e6:-18",
        "--target", "schottky:20:100e6:-30",
        "--out", str(tmp_path / "bad.ini"),
    ])
    assert code == 2
    assert "contradictory or infeasible" in err


def test_calibrate_rejects_malformed_target(tmp_path, capsys):
    code, _, err = _run(capsys, ["calibrate", "--target", "schottky:20",
                                 "--out", str(tmp_path / "x.ini")])
    assert code == 2
    assert "must be DEVICE:STAGES:CARRIER_HZ:DBM[:TANK_Q]" in err


def test_calibrate_without_targets_is_an_error(tmp_path, capsys):
    code, _, err = _run(capsys, ["calibrate", "--out", str(tmp_path / "x.ini")])
    assert code == 2
    assert "nothing to calibrate" in err
