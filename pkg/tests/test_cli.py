"""End-to-end command-line tests on miniature runs."""

import csv
import hashlib

import pytest

from cogradar.cli import episode_seed, main
from cogradar.numerics import splitmix64

SMALL = [
    "--set", "agent.actor_hidden=[16, 8]",
    "--set", "agent.critic_hidden=[16, 16]",
    "--set", "agent.batch_size=16",
    "--set", "training.buffer_capacity=4096",
    "--set", "training.warmup=10",
]


def run_train(out, seed=3, slots=50, extra=()):
    rv = main(["train", "--out", str(out), "--seed", str(seed),
               "--slots", str(slots)] + SMALL + list(extra))
    assert rv == 0
    return out


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def read_col(path, name):
    with open(path, newline="") as fh:
        return [row[name] for row in csv.DictReader(fh)]


def test_train_outputs(tmp_path):
    out = run_train(tmp_path / "run")
    for name in ("trace.csv", "summary.csv", "config.resolved", "checkpoint.npz"):
        assert (out / name).exists(), name
    assert len((out / "trace.csv").read_text().splitlines()) == 51
    resolved = (out / "config.resolved").read_text()
    assert "slots: 50" in resolved
    assert "theta_max: 0.9" in resolved
    assert "seed: 3" in resolved
    with open(out / "summary.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert rows[0]["policy"] == "cdrl"
    assert 0.0 <= float(rows[0]["violation_fraction"]) <= 1.0


def test_train_deterministic(tmp_path):
    a = run_train(tmp_path / "a")
    b = run_train(tmp_path / "b")
    assert sha(a / "trace.csv") == sha(b / "trace.csv")
    assert sha(a / "summary.csv") == sha(b / "summary.csv")


def test_resolved_snapshot_reproduces_run(tmp_path):
    a = run_train(tmp_path / "a")
    out = tmp_path / "b"
    rv = main(["train", "--config", str(a / "config.resolved"), "--out", str(out)])
    assert rv == 0
    assert sha(a / "trace.csv") == sha(out / "trace.csv")


def test_missing_config_exits_nonzero(tmp_path, capsys):
    rv = main(["train", "--config", str(tmp_path / "nope.yaml"),
               "--out", str(tmp_path / "o")])
    assert rv != 0
    assert "not found" in capsys.readouterr().err


def test_invalid_field_exits_nonzero(tmp_path, capsys):
    rv = main(["train", "--out", str(tmp_path / "o"), "--slots", "10",
               "--set", "dual.theta_max=1.5"])
    assert rv == 2
    assert "dual.theta_max" in capsys.readouterr().err


def test_eval_outputs_and_determinism(tmp_path):
    t = run_train(tmp_path / "t")
    outs = []
    for name in ("e1", "e2"):
        out = tmp_path / name
        rv = main(["eval", str(t / "checkpoint.npz"), "--out", str(out),
                   "--seed", "3", "--slots", "40"] + SMALL)
        assert rv == 0
        outs.append(out)
    assert len((outs[0] / "trace.csv").read_text().splitlines()) == 41
    assert sha(outs[0] / "trace.csv") == sha(outs[1] / "trace.csv")
    assert read_col(outs[0] / "summary.csv", "policy") == ["cdrl"]
    # evaluation traces carry no training columns
    header = (outs[0] / "trace.csv").read_text().splitlines()[0]
    assert "critic_loss" not in header


def test_eval_multiple_episodes(tmp_path):
    t = run_train(tmp_path / "t")
    out = tmp_path / "e"
    rv = main(["eval", str(t / "checkpoint.npz"), "--out", str(out),
               "--seed", "3", "--slots", "30", "--episodes", "2"] + SMALL)
    assert rv == 0
    assert (out / "trace.csv").exists()
    assert (out / "trace_ep1.csv").exists()
    seeds = read_col(out / "summary.csv", "seed")
    assert seeds == [str(episode_seed(3, 0)), str(episode_seed(3, 1))]
    assert episode_seed(3, 0) == 3
    assert episode_seed(3, 1) == splitmix64(3, 17)


def test_eval_missing_checkpoint(tmp_path, capsys):
    rv = main(["eval", str(tmp_path / "none.npz"), "--out", str(tmp_path / "o"),
               "--slots", "10"] + SMALL)
    assert rv == 2
    assert "checkpoint" in capsys.readouterr().err


def test_eval_shape_mismatch(tmp_path, capsys):
    t = run_train(tmp_path / "t")
    rv = main(["eval", str(t / "checkpoint.npz"), "--out", str(tmp_path / "o"),
               "--slots", "10"])  # default net widths, not the trained ones
    assert rv == 2
    assert "sizes" in capsys.readouterr().err


def test_baseline_usage_capped(tmp_path):
    out = tmp_path / "b"
    rv = main(["baseline", "--fraction", "0.9", "--out", str(out),
               "--seed", "3", "--slots", "60"])
    assert rv == 0
    usage = [float(u) for u in read_col(out / "trace.csv", "usage")]
    assert all(u <= 0.9 + 1e-12 for u in usage)
    assert read_col(out / "summary.csv", "policy") == ["fixed_90"]


def test_baseline_zero_fraction(tmp_path):
    out = tmp_path / "b0"
    rv = main(["baseline", "--fraction", "0", "--out", str(out),
               "--seed", "3", "--slots", "40"])
    assert rv == 0
    assert all(float(u) == 0.0 for u in read_col(out / "trace.csv", "usage"))


def test_baseline_fraction_out_of_range(tmp_path, capsys):
    rv = main(["baseline", "--fraction", "1.5", "--out", str(tmp_path / "o"),
               "--slots", "10"])
    assert rv == 2
    assert "fraction" in capsys.readouterr().err


def test_eval_and_baseline_share_truth(tmp_path):
    t = run_train(tmp_path / "t")
    e = tmp_path / "e"
    b = tmp_path / "b"
    assert main(["eval", str(t / "checkpoint.npz"), "--out", str(e),
                 "--seed", "11", "--slots", "50"] + SMALL) == 0
    assert main(["baseline", "--fraction", "0.5", "--out", str(b),
                 "--seed", "11", "--slots", "50"]) == 0
    assert read_col(e / "trace.csv", "n_targets") == read_col(b / "trace.csv", "n_targets")


def test_subcommand_required():
    with pytest.raises(SystemExit):
        main([])
