"""CLI surface: subcommands, override plumbing, exit codes, output files."""

import json

import pytest

from cavernrl.annotate.store import AnnotationStore
from cavernrl.cli import main
from cavernrl.metrics import read_metrics

TRAIN_FAST = [
    "--steps", "1024", "--seed", "0",
    "--set", "num_envs=16",
    "--set", "ppo.batch_size=512",
    "--set", "ppo.minibatch_size=128",
    "--set", "ppo.rollout_len=16",
    "--set", "metrics_interval=256",
    "--set", "save_checkpoint=false",
    "--set", "save_store=false",
]


def test_train_writes_run_files(tmp_path, capsys):
    rc = main(["train", "--task", "staircase3", "--reward", "retrieval",
               "--annotator", "mock", "--out", str(tmp_path),
               "--set", "run_name=smoke", *TRAIN_FAST])
    assert rc == 0
    out = capsys.readouterr().out
    assert "run complete" in out
    assert "store_size:" in out
    m = read_metrics(tmp_path / "smoke_metrics.csv")
    assert m["step"].size > 0
    assert (tmp_path / "smoke_summary.json").exists()
    assert (tmp_path / "smoke_config.txt").exists()


def test_train_reads_config_file_with_cli_precedence(tmp_path, capsys):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("seed = 5\nout_dir = /nonexistent/ignored\n")
    rc = main(["train", "--config", str(cfgfile), "--out", str(tmp_path),
               "--set", "run_name=fromfile", *TRAIN_FAST])
    assert rc == 0
    cfg_txt = (tmp_path / "fromfile_config.txt").read_text()
    assert "seed = 0" in cfg_txt  # --seed 0 from TRAIN_FAST beats the file
    assert f"out_dir = {tmp_path}" in cfg_txt


@pytest.mark.parametrize("argv", [
    ["train", "--task", "not-a-task"],
    ["train", "--reward", "telepathy"],
    ["train", "--annotator", "http"],  # http requires --url
    ["train", "--set", "nonsense_key=1"],
    ["train", "--set", "badformat"],
    ["train", "--subsample", "0"],
    ["train", "--config", "/nonexistent/file.cfg"],
])
def test_config_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_flag_exits_1(capsys):
    assert main(["train", "--frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand_exits_1(capsys):
    assert main(["transmogrify"]) == 1


def test_missing_subcommand_exits_1(capsys):
    assert main([]) == 1


def test_annotate_offline(tmp_path, capsys):
    caps = tmp_path / "caps.txt"
    caps.write_text("You kill the rat!\n\n12 gold pieces.\n"
                    "That door is closed.\nYou kill the rat!\n")
    out = tmp_path / "store.jsonl"
    rc = main(["annotate-offline", str(caps), "--out", str(out),
               "--annotator", "mock", "--batch-size", "2"])
    assert rc == 0
    assert "annotated 3 captions" in capsys.readouterr().out  # deduplicated
    store = AnnotationStore.load(out)
    assert store.lookup("You kill the rat!") == 1
    assert store.lookup("12 gold pieces.") == 1
    assert store.lookup("That door is closed.") == 0


def test_annotate_offline_goal_changes_labels(tmp_path):
    caps = tmp_path / "caps.txt"
    caps.write_text("You kill the rat!\n12 gold pieces.\n")
    out = tmp_path / "gold.jsonl"
    rc = main(["annotate-offline", str(caps), "--out", str(out),
               "--goal", "gold"])
    assert rc == 0
    store = AnnotationStore.load(out)
    assert store.lookup("You kill the rat!") == 0  # kills off-goal for gold
    assert store.lookup("12 gold pieces.") == 1


def test_annotate_offline_empty_file_exits_1(tmp_path, capsys):
    caps = tmp_path / "caps.txt"
    caps.write_text("\n\n")
    assert main(["annotate-offline", str(caps), "--out",
                 str(tmp_path / "s.jsonl")]) == 1


def test_annotate_offline_missing_file_exits_2(tmp_path):
    assert main(["annotate-offline", str(tmp_path / "nope.txt"),
                 "--out", str(tmp_path / "s.jsonl")]) == 2


def test_plot_subcommand(tmp_path, capsys):
    # build two tiny runs via the train command, then plot them as one group
    for seed in ("0", "1"):
        rc = main(["train", "--task", "staircase3", "--reward", "none",
                   "--annotator", "none", "--out", str(tmp_path),
                   "--set", f"run_name=s{seed}", *TRAIN_FAST,
                   "--seed", seed])
        assert rc == 0
    fig = tmp_path / "curves.png"
    rc = main(["plot",
               f"demo={tmp_path}/s0_metrics.csv,{tmp_path}/s1_metrics.csv",
               "--field", "entropy", "--out", str(fig)])
    assert rc == 0
    out = capsys.readouterr().out
    assert fig.exists()
    assert "demo" in out and "entropy" in out


def test_plot_bad_csv_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("not a metrics file\n")
    assert main(["plot", str(bad), "--out", str(tmp_path / "x.png")]) == 2


def test_measure_throughput_rejects_short_duration(tmp_path, capsys):
    rc = main(["measure-throughput", "--duration", "3",
               "--out", str(tmp_path), *TRAIN_FAST[:2]])
    assert rc == 1
    assert "30" in capsys.readouterr().err
