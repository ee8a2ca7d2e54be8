import csv
import hashlib

import pytest

from fireline.cli import main
from fireline.sim import CSV_HEADER


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_run_writes_results_and_trace(data_dir, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--config", str(data_dir / "house.yaml"), "--out", str(out)]) == 0
    lines = (out / "results.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER and len(lines) == 2
    assert (out / "trace.log").read_text().count("\titeration_end\t") >= 1
    assert not (out / "snapshots").exists()


def test_run_missing_world_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("world_file: nowhere.world\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "nowhere.world" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_run_bad_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("world_file: x.world\nnum_robots: zero\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert main(["run", "--config", str(tmp_path / "absent.yaml")]) == 2
    assert "absent.yaml" in capsys.readouterr().err


def test_runtime_error_exits_3(data_dir, tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise RuntimeError("simulated fault")

    monkeypatch.setattr("fireline.cli.run_experiment", boom)
    assert main(["run", "--config", str(data_dir / "house.yaml"), "--out", str(tmp_path / "o")]) == 3
    assert "simulated fault" in capsys.readouterr().err


def test_seed_reruns_are_byte_identical(data_dir, tmp_path):
    args = ["run", "--config", str(data_dir / "office.yaml"), "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("trace.log", "results.csv"):
        assert sha(tmp_path / "a" / name) == sha(tmp_path / "b" / name)


def test_sweep_single_cell(data_dir, tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", "--config", str(data_dir / "office.yaml"), "--robots", "1", "--ranges", "2",
                 "--out", str(out)]) == 0
    assert len((out / "results.csv").read_text().splitlines()) == 2
    assert sorted(p.name for p in (out / "traces").iterdir()) == ["robots1_range2.log"]


def test_sweep_summary_matches_rows(data_dir, tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", "--config", str(data_dir / "office.yaml"), "--robots", "1,2", "--ranges", "2,3",
                 "--out", str(out)]) == 0
    with open(out / "results.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    with open(out / "summary.csv") as fh:
        summary = list(csv.DictReader(fh))
    for entry in summary:
        mine = [r for r in rows if r["Number of Robots"] == entry["Number of Robots"]]
        pct = sum(float(r["Map Completion Percentage"]) for r in mine) / len(mine)
        its = sum(int(r["Number of Iterations"]) for r in mine) / len(mine)
        assert entry["Mean Map Completion Percentage"] == f"{pct:.4f}"
        assert entry["Mean Number of Iterations"] == f"{its:.4f}"


def test_bad_list_is_usage_error(data_dir):
    with pytest.raises(SystemExit):
        main(["sweep", "--config", str(data_dir / "office.yaml"), "--robots", "a,b"])


def test_render_missing_trace_exits_2(tmp_path):
    assert main(["render", "--trace", str(tmp_path / "none.log"), "--out", str(tmp_path / "r")]) == 2


def test_outputs_stay_in_out_dir(data_dir, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    out = tmp_path / "only"
    assert main(["run", "--config", str(data_dir / "office.yaml"), "--out", str(out), "--render"]) == 0
    assert main(["render", "--trace", str(out / "trace.log"), "--out", str(out / "img")]) == 0
    assert [p.name for p in tmp_path.iterdir()] == ["only"]
    # rerunning rewrites identical bytes
    before = {p: sha(p) for p in out.rglob("*") if p.is_file()}
    assert main(["run", "--config", str(data_dir / "office.yaml"), "--out", str(out), "--render"]) == 0
    assert main(["render", "--trace", str(out / "trace.log"), "--out", str(out / "img")]) == 0
    assert {p: sha(p) for p in out.rglob("*") if p.is_file()} == before
