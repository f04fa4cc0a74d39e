"""End-to-end command checks, run in process through main()."""

import json

import pytest

from eaglass import cli
from eaglass.disorder import load_snapshot


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# -- dispatch and exit codes -----------------------------------------------------


def test_missing_subcommand(capsys):
    code, _, err = run(capsys)
    assert code == 1
    assert "usage error" in err


def test_unknown_flag(capsys):
    code, _, err = run(capsys, "sample", "--bogus", "1")
    assert code == 1
    assert "usage error" in err


def test_missing_required_flag(capsys):
    code, _, err = run(capsys, "enumerate")
    assert code == 1
    assert "--max is required" in err


def test_internal_failure_exits_two(capsys, monkeypatch, tmp_path):
    def boom(*a, **k):
        raise RuntimeError("chain exploded")

    monkeypatch.setattr(cli, "sample_ea_pair", boom)
    code, _, err = run(capsys, "sample", "--side", "6", "--beta", "1.0",
                       "--out", str(tmp_path / "s.snap"))
    assert code == 2
    assert "internal error" in err and "chain exploded" in err


# -- sample ------------------------------------------------------------------------


def test_sample_reruns_bit_identical(capsys, tmp_path):
    a, b = tmp_path / "a.snap", tmp_path / "b.snap"
    argv = ["sample", "--side", "8", "--beta", "1.5", "--seed", "7",
            "--sweeps", "100"]
    assert cli.main(argv + ["--out", str(a)]) == 0
    assert cli.main(argv + ["--out", str(b)]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()
    w, spins, meta = load_snapshot(a)
    assert w.geometry.side == 8 and spins is not None
    assert meta["beta"] == 1.5


def test_sample_couplings_only(capsys, tmp_path):
    path = tmp_path / "w.snap"
    code, out, _ = run(capsys, "sample", "--side", "6", "--seed", "2",
                       "--out", str(path))
    assert code == 0 and "couplings-only" in out
    w, spins, _ = load_snapshot(path)
    assert spins is None and w.seed == 2


def test_sample_multi_chain_files(capsys, tmp_path):
    out = tmp_path / "c.snap"
    code, _, _ = run(capsys, "sample", "--side", "6", "--beta", "1.0",
                     "--sweeps", "50", "--chains", "2", "--out", str(out))
    assert code == 0
    c0, c1 = tmp_path / "c.chain0.snap", tmp_path / "c.chain1.snap"
    assert c0.exists() and c1.exists()
    assert c0.read_bytes() != c1.read_bytes()  # different spin seeds


# -- enumerate ---------------------------------------------------------------------


def test_enumerate_vertex_counts(capsys, tmp_path):
    code, out, _ = run(capsys, "enumerate", "--mode", "vertex", "--max", "3")
    assert code == 0
    lines = out.splitlines()
    assert lines[:3] == ["1,1", "2,4", "3,18"]
    assert "bounds_ok=True" in lines
    path = tmp_path / "animals.csv"
    code, out, _ = run(capsys, "enumerate", "--mode", "vertex", "--max", "4",
                       "--out", str(path))
    assert code == 0
    rows = path.read_text().splitlines()
    assert rows[1] == "n,count,lower_bound,upper_bound"
    assert rows[3].startswith("2,4,")


def test_enumerate_cycle_mode(capsys):
    code, out, _ = run(capsys, "enumerate", "--mode", "cycle", "--max", "6")
    assert code == 0
    assert out.splitlines()[:2] == ["4,4", "6,12"]


# -- analyze -----------------------------------------------------------------------


def snapshot(tmp_path, capsys, beta="2.0", side="8"):
    path = tmp_path / "run.snap"
    assert cli.main(["sample", "--side", side, "--beta", beta, "--seed", "5",
                     "--sweeps", "150", "--out", str(path)]) == 0
    capsys.readouterr()
    return path


def test_analyze_reports_and_histogram(capsys, tmp_path):
    snap = snapshot(tmp_path, capsys)
    hist = tmp_path / "hist.csv"
    code, out, _ = run(capsys, "analyze", "--in", str(snap), "--hist", str(hist))
    assert code == 0
    assert "parity_ok=True" in out
    assert "unsat_edges=" in out and "components=" in out
    assert hist.read_text().splitlines()[0] == "# format eaglass-cluster-histogram v1"


def test_analyze_needs_spins(capsys, tmp_path):
    path = tmp_path / "w.snap"
    assert cli.main(["sample", "--side", "6", "--out", str(path)]) == 0
    capsys.readouterr()
    code, _, err = run(capsys, "analyze", "--in", str(path))
    assert code == 1
    assert "no spin section" in err


def test_analyze_missing_file(capsys):
    code, _, err = run(capsys, "analyze", "--in", "/nonexistent/x.snap")
    assert code == 1
    assert "error" in err


# -- forest ------------------------------------------------------------------------


def test_forest_command(capsys, tmp_path):
    snap = snapshot(tmp_path, capsys)
    out = tmp_path / "forest.csv"
    code, text, _ = run(capsys, "forest", "--in", str(snap), "--out", str(out))
    assert code == 0
    assert "acyclic=True" in text and "partition_preserved=True" in text
    assert out.read_text().splitlines()[0] == "# format eaglass-dual-edges v1"


# -- flip-check --------------------------------------------------------------------


def test_flip_check_within_bounds(capsys, tmp_path):
    out = tmp_path / "bounds.csv"
    code, text, _ = run(capsys, "flip-check", "--side", "8", "--beta", "1.0",
                        "--cycles", "2", "--samples", "10000", "--seed", "3",
                        "--out", str(out))
    assert code == 0
    assert "all_within=True" in text
    assert out.read_text().startswith("# format eaglass-flip-bounds v1")


# -- pipeline ----------------------------------------------------------------------


def test_pipeline_command_rerun_identical(capsys, tmp_path):
    out_dir = tmp_path / "pipe"
    argv = ["pipeline", "--side", "8", "--beta", "2.0", "--sweeps", "150",
            "--window", "4", "--seed", "6", "--out-dir", str(out_dir)]
    code, text, _ = run(capsys, *argv)
    assert code == 0 and "regions=" in text
    blobs = {p.name: p.read_bytes() for p in out_dir.iterdir()}
    assert "manifest.json" in blobs
    code, _, _ = run(capsys, *argv)
    assert code == 0
    for name, blob in blobs.items():
        assert (out_dir / name).read_bytes() == blob


# -- config files ------------------------------------------------------------------


def test_config_supplies_defaults_flags_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"side": 6, "beta": 1.0, "sweeps": 80}))
    path = tmp_path / "s.snap"
    code, _, _ = run(capsys, "sample", "--config", str(cfg), "--beta", "0.5",
                     "--out", str(path))
    assert code == 0
    w, spins, meta = load_snapshot(path)
    assert w.geometry.side == 6          # from config
    assert meta["beta"] == 0.5           # flag wins over config


def test_unknown_config_key_warns(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sixe": 6}))
    code, _, err = run(capsys, "enumerate", "--config", str(cfg),
                       "--mode", "vertex", "--max", "2")
    assert code == 0
    assert "'sixe'" in err and "not used" in err


def test_broken_config_rejected(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "enumerate", "--config", str(bad), "--max", "2")
    assert code == 1
    lst = tmp_path / "list.json"
    lst.write_text("[1, 2]")
    code, _, err = run(capsys, "enumerate", "--config", str(lst), "--max", "2")
    assert code == 1
    assert "flat JSON object" in err


# -- verify ------------------------------------------------------------------------


def test_verify_quick_passes(capsys):
    code, out, _ = run(capsys, "verify", "--quick")
    assert code == 0
    lines = out.splitlines()
    assert all(line.startswith("pass ") for line in lines[:-1])
    total = lines[-1]
    assert total.startswith("passed ")
    n_pass, n_all = total.split()[1].split("/")
    assert n_pass == n_all
