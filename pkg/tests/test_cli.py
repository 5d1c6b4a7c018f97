import csv
import json

import pytest

from csb.cli import main

MINI = """
name = "mini"
target = "rz"
p_damping = [0.003, 0.01]
overshoot_rad = -0.01
L_max = 20
K = 2
shots = 500
repetitions = 2
seed = 11
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "mini.cfg"
    p.write_text(MINI + f'output_dir = "{tmp_path / "out"}"\n')
    return p


def test_run_writes_three_files(cfg_path, tmp_path, capsys):
    assert main(["run", "--config", str(cfg_path)]) == 0
    out = tmp_path / "out"
    assert sorted(f.name for f in out.iterdir()) == ["infidelity.svg", "report.json", "signals.csv"]
    with open(out / "signals.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["experiment_id", "repetition", "spec_index", "L", "probability", "shots"]
    # K (L_max + 1) rows per repetition and sweep point
    assert len(rows) == 2 * 21 * 2 * 2
    report = json.loads((out / "report.json").read_text())
    assert report["budget"]["total_shots"] == 2 * 21 * 500 * 2 * 2
    assert report["config"]["seed"] == 11
    pt = report["points"][0]
    assert {"estimate", "oracle", "repetitions", "parameters"} <= set(pt)
    assert pt["repetitions"][0]["matches"]
    assert "<svg" in (out / "infidelity.svg").read_text()
    assert 'xscale' not in capsys.readouterr().err


def test_run_is_byte_identical(cfg_path, tmp_path):
    main(["run", "--config", str(cfg_path), "--output", str(tmp_path / "a")])
    main(["run", "--config", str(cfg_path), "--output", str(tmp_path / "b")])
    for name in ("signals.csv", "report.json", "infidelity.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_analyze_reproduces_report(cfg_path, tmp_path):
    main(["run", "--config", str(cfg_path)])
    out = tmp_path / "out"
    assert main(["analyze", "--signals", str(out)]) == 0
    analysis = json.loads((out / "analysis.json").read_text())
    report = json.loads((out / "report.json").read_text())
    for a, r in zip(analysis["points"], report["points"]):
        assert a["process_infidelity"] == pytest.approx(r["estimate"]["process_infidelity"], abs=1e-12)


def test_export_counts(cfg_path, tmp_path):
    assert main(["export", "--config", str(cfg_path), "--L-max", "2", "--output", str(tmp_path / "q")]) == 0
    files = sorted(p.name for p in (tmp_path / "q").iterdir())
    assert len(files) == 6 and files[0] == "spec0_L0_r0.qasm"


def test_export_rc_counts(tmp_path):
    p = tmp_path / "rc.cfg"
    p.write_text('target = "fsim"\nseed = 1\nK = 6\nrc = true\nn_r = 3\nL_max = 10\n')
    main(["export", "--config", str(p), "--L-max", "1", "--output", str(tmp_path / "q")])
    assert len(list((tmp_path / "q").iterdir())) == 3 * 6 * 2


def test_plot_subcommand(cfg_path, tmp_path):
    main(["run", "--config", str(cfg_path)])
    svg = tmp_path / "p.svg"
    assert main(["plot", "--report", str(tmp_path / "out" / "report.json"), "--output", str(svg)]) == 0
    assert svg.read_text().startswith("<?xml")


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text('target = "rz"\nshots = -1\n')
    assert main(["run", "--config", str(p)]) == 2
    err = capsys.readouterr().err
    assert "shots" in err and "seed" in err


def test_strict_exit_on_flags(tmp_path):
    p = tmp_path / "tof.cfg"
    p.write_text(
        f'target = "toffoli"\nseed = 1\nK = 4\nL_max = 12\nrepetitions = 1\np_damping = 0.01\noutput_dir = "{tmp_path / "o"}"\n'
    )
    assert main(["run", "--config", str(p), "--strict"]) == 3
    assert main(["run", "--config", str(p)]) == 0
