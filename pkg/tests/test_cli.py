import importlib.util
import json

import pytest

from fdris.cli import main
from fdris.harness import CSV_HEADER
from helpers import monotone_nondecreasing

TINY = {
    "num_cells": 2,
    "users_per_cell_dl": 1,
    "users_per_cell_ul": 1,
    "bs_tx_antennas": 2,
    "bs_rx_antennas": 2,
    "ue_tx_antennas": 2,
    "ue_rx_antennas": 2,
    "ris_elements": 4,
    "streams_dl": 1,
    "streams_ul": 1,
}


@pytest.fixture
def tiny_cfg(tmp_path):
    path = tmp_path / "tiny.json"
    from fdris.config import default_config
    data = default_config().to_dict()
    data.update(TINY)
    path.write_text(json.dumps(data))
    return path


def fast_args(cfg_path, out_dir, *extra):
    return ["--config", str(cfg_path), "--output", str(out_dir),
            "--outer-max-iter", "6", "--outer-tol", "1e-3",
            "--phase-max-iter", "30", *extra]


# -- solve -----------------------------------------------------------------------

def test_solve_writes_self_describing_report(tiny_cfg, tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["solve", *fast_args(tiny_cfg, out), "--seed", "1"])
    assert rc == 0
    doc = json.loads((out / "solve_report.json").read_text())
    assert doc["effective_config"]["ris_elements"] == 4
    assert doc["overrides"] == {}
    assert doc["solver"]["phase_algorithm"] == "sca"
    rep = doc["report"]
    assert rep["seed"] == 1
    assert monotone_nondecreasing(rep["obj_trace"], rel_slack=1e-8)
    assert rep["sum_rate_bps_hz"] == pytest.approx(
        rep["ul_rate_bps_hz"] + rep["dl_rate_bps_hz"])
    text = capsys.readouterr().out
    assert "sum rate" in text
    assert "bit/s/Hz" in text


def test_solve_overrides_are_applied_and_echoed(tiny_cfg, tmp_path):
    out = tmp_path / "run"
    rc = main(["solve", *fast_args(tiny_cfg, out),
               "--set", "ris_elements=8",
               "--set", "bs_positions.1.0=500"])
    assert rc == 0
    doc = json.loads((out / "solve_report.json").read_text())
    assert doc["effective_config"]["ris_elements"] == 8
    assert doc["effective_config"]["bs_positions"][1][0] == 500
    assert doc["overrides"] == {"ris_elements": 8, "bs_positions.1.0": 500}
    assert len(doc["report"]["theta"]) == 8


def test_solve_same_seed_reproduces_results(tiny_cfg, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["solve", *fast_args(tiny_cfg, out), "--seed", "7"]) == 0
        outs.append(json.loads((out / "solve_report.json").read_text()))
    a, b = outs
    assert a["report"]["obj_trace"] == b["report"]["obj_trace"]
    assert a["report"]["theta"] == b["report"]["theta"]


@pytest.mark.parametrize("bad", [
    ["--set", "no_such_field=3"],
    ["--set", "ris_elements"],          # missing '='
    ["--set", "streams_dl=99"],         # rejected by validation
])
def test_solve_config_errors_exit_1(tiny_cfg, tmp_path, capsys, bad):
    rc = main(["solve", *fast_args(tiny_cfg, tmp_path / "x"), *bad])
    assert rc == 1
    assert "config error" in capsys.readouterr().err


def test_missing_or_broken_config_file_exits_1(tmp_path, capsys):
    rc = main(["solve", "--config", str(tmp_path / "nope.json"),
               "--output", str(tmp_path)])
    assert rc == 1
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    rc = main(["solve", "--config", str(broken), "--output", str(tmp_path)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "config error" in err


# -- sweep -----------------------------------------------------------------------

def sweep_args(cfg_path, out_dir, *extra):
    return ["sweep", *fast_args(cfg_path, out_dir),
            "--param", "ris_elements", "--values", "2,4",
            "--realizations", "1",
            "--schemes", "fd_opt_sca,fd_no_ris", *extra]


def test_sweep_writes_csv_traces_and_meta(tiny_cfg, tmp_path, capsys):
    out = tmp_path / "sw"
    rc = main(sweep_args(tiny_cfg, out))
    assert rc == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 2 * 1 * 2
    traces = json.loads((out / "sweep_traces.json").read_text())
    assert len(traces) == 4
    meta = json.loads((out / "sweep_meta.json").read_text())
    assert meta["param"] == "ris_elements"
    assert meta["schemes"] == ["fd_opt_sca", "fd_no_ris"]
    assert meta["effective_config"]["num_cells"] == 2
    text = capsys.readouterr().out
    assert "fd_opt_sca" in text
    assert "+/-" in text


def test_sweep_reruns_identically_modulo_timing(tiny_cfg, tmp_path):
    csvs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(sweep_args(tiny_cfg, out)) == 0
        csvs.append((out / "sweep.csv").read_text().splitlines())

    def strip_wall(lines):
        return [ln.rsplit(",", 1)[0] for ln in lines]

    assert strip_wall(csvs[0]) == strip_wall(csvs[1])


def test_sweep_partial_failure_reports_but_succeeds(tiny_cfg, tmp_path, capsys):
    out = tmp_path / "sw"
    rc = main(["sweep", *fast_args(tiny_cfg, out),
               "--param", "alpha_r", "--values", "2.2,-1.0",
               "--realizations", "1", "--schemes", "fd_opt_sca"])
    assert rc == 0
    err = capsys.readouterr().err
    assert "alpha_r=-1.0" in err
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 3
    assert any("nan" in ln for ln in lines[1:])


def test_sweep_total_failure_exits_2(tiny_cfg, tmp_path, capsys):
    out = tmp_path / "sw"
    rc = main(["sweep", *fast_args(tiny_cfg, out),
               "--param", "alpha_r", "--values", "-1.0",
               "--realizations", "1", "--schemes", "fd_opt_sca"])
    assert rc == 2
    assert "every sweep cell failed" in capsys.readouterr().err


def test_sweep_rejects_unknown_scheme(tiny_cfg, tmp_path, capsys):
    rc = main(["sweep", *fast_args(tiny_cfg, tmp_path / "x"),
               "--param", "ris_elements", "--values", "2",
               "--schemes", "fd_warp_drive"])
    assert rc == 1
    assert "config error" in capsys.readouterr().err


def test_unknown_sweep_param_rejected_by_parser(tiny_cfg, tmp_path):
    with pytest.raises(SystemExit):
        main(["sweep", *fast_args(tiny_cfg, tmp_path / "x"),
              "--param", "bandwidth", "--values", "1"])


# -- validate ---------------------------------------------------------------------

def test_validate_command_passes(capsys):
    rc = main(["validate"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "checks passed" in out
    assert "FAIL" not in out


# -- figures ----------------------------------------------------------------------

def test_figures_flag(tiny_cfg, tmp_path, capsys):
    out = tmp_path / "fig"
    rc = main(["solve", *fast_args(tiny_cfg, out), "--figures"])
    if importlib.util.find_spec("risplot") is None:
        assert rc == 1
        assert "risplot" in capsys.readouterr().err
    else:
        assert rc == 0
        pngs = list(out.glob("*.png"))
        assert pngs


def test_sweep_figures_flag(tiny_cfg, tmp_path, capsys):
    out = tmp_path / "fig"
    rc = main(sweep_args(tiny_cfg, out, "--figures"))
    if importlib.util.find_spec("risplot") is None:
        assert rc == 1
        assert "risplot" in capsys.readouterr().err
    else:
        assert rc == 0
        pngs = list(out.glob("*.png"))
        assert pngs
