"""CLI surface tests: flags, defaults, exit codes, artifact files."""

import json

import pytest

from graphmill.cli import build_parser, main
from graphmill.sampling import read_dump


def run(argv):
    return main(argv)


@pytest.fixture()
def small_graph(tmp_path):
    path = tmp_path / "g.txt"
    code = run(["gen-graph", "--nodes", "400", "--edges", "1600",
                "--model", "powerlaw", "--rng-seed", "3",
                "--out", str(path)])
    assert code == 0
    return str(path)


def test_gen_graph_deterministic(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert run(["gen-graph", "--nodes", "120", "--edges", "500",
                "--rng-seed", "9", "--out", str(a)]) == 0
    assert run(["gen-graph", "--nodes", "120", "--edges", "500",
                "--rng-seed", "9", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_generate_dump_roundtrip(small_graph, tmp_path):
    dump = tmp_path / "subs.jsonl"
    code = run(["generate", "--graph", small_graph, "--num-seeds", "20",
                "--workers", "2", "--fanouts", "4,2",
                "--dump", str(dump), "--rng-seed", "5"])
    assert code == 0
    records = read_dump(str(dump))
    assert len(records) == 20
    code = run(["generate", "--graph", small_graph, "--num-seeds", "20",
                "--workers", "4", "--fanouts", "4,2",
                "--dump", str(tmp_path / "subs4.jsonl"), "--rng-seed", "5"])
    assert code == 0
    again = read_dump(str(tmp_path / "subs4.jsonl"))
    for seed in again:  # worker count changes nothing per seed
        assert again[seed] == records[seed]


def test_default_seed_fraction(small_graph, tmp_path, capsys):
    code = run(["generate", "--graph", small_graph, "--workers", "1",
                "--fanouts", "4,2", "--rng-seed", "5"])
    assert code == 0
    out = capsys.readouterr().out
    assert "generated 40 subgraphs" in out  # 10% of 400 nodes


def test_train_writes_metrics(small_graph, tmp_path):
    metrics = tmp_path / "m.json"
    code = run(["train", "--graph", small_graph, "--num-seeds", "12",
                "--workers", "3", "--fanouts", "4,2", "--epochs", "2",
                "--hidden", "6", "--feature-dim", "8",
                "--metrics", str(metrics), "--rng-seed", "5"])
    assert code == 0
    data = json.loads(metrics.read_text())
    assert set(data) == {"subgraphs_per_s", "nodes_per_s", "wall_s",
                         "totals", "per_worker", "epochs"}
    assert len(data["epochs"]) == 2
    assert data["totals"]["trained"] == 12 * 2


def test_verify_clean_and_corrupt(small_graph, capsys):
    base = ["verify", "--graph", small_graph, "--num-seeds", "16",
            "--workers", "2", "--worker-counts", "1,2",
            "--fanouts", "4,2", "--hidden", "6", "--feature-dim", "8",
            "--reduction-trials", "3", "--rng-seed", "5"]
    assert run(base) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 3

    # a corrupt seed outside the set is a usage error, inside it a mismatch
    assert run(base + ["--corrupt-seed", "999999"]) == 2
    hint = capsys.readouterr().err
    victim = hint.split("[")[1].split(",")[0]
    assert run(base + ["--corrupt-seed", victim]) == 1
    out = capsys.readouterr().out
    assert f"seed {victim}" in out


def test_bench_writes_csvs(small_graph, tmp_path, capsys):
    out_dir = tmp_path / "bench"
    code = run(["bench", "--graph", small_graph, "--num-seeds", "16",
                "--worker-counts", "1,2", "--fanouts", "4,2",
                "--reduction-workers", "4", "--out-dir", str(out_dir),
                "--rng-seed", "5"])
    assert code == 0
    for name in ("gen_scaling.csv", "reduction_sweep.csv", "kernels.csv"):
        assert (out_dir / name).exists(), name
    first = (out_dir / "gen_scaling.csv").read_text().splitlines()
    assert first[0] == "workers,subgraphs,nodes,wall_s,subgraphs_per_s,nodes_per_s,speedup"
    assert first[1].startswith("1,") and first[1].endswith("1.000")
    head = (out_dir / "reduction_sweep.csv").read_text().splitlines()[0]
    assert head == "workers,arity,messages,critical_path,wall_time_us"


def test_missing_graph_is_usage_error(tmp_path, capsys):
    code = run(["generate", "--graph", str(tmp_path / "nope.txt"),
                "--rng-seed", "1"])
    assert code == 2
    assert "does not exist" in capsys.readouterr().err


def test_bad_flag_value_exits_two():
    with pytest.raises(SystemExit) as err:
        run(["gen-graph", "--model", "smallworld", "--out", "x.txt"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        run(["train", "--fanouts", "forty,20"])
    assert err.value.code == 2


def test_config_error_exits_two(small_graph):
    code = run(["train", "--graph", small_graph, "--num-seeds", "8",
                "--workers", "2", "--epochs", "0", "--rng-seed", "1"])
    assert code == 2


def test_help_documents_every_default():
    parser = build_parser()
    for name, sub in parser._subparsers._group_actions[0].choices.items():
        text = sub.format_help()
        flags = [a for a in sub._actions
                 if a.option_strings and a.option_strings[0] != "--help"]
        for action in flags:
            assert action.option_strings[0] in text, (name, action.dest)
            if not action.required:
                assert "default" in (action.help or "") or "(default:" in text, (
                    name, action.dest)
        assert "(default:" in text, name


def test_subcommands_enumerated():
    parser = build_parser()
    help_text = parser.format_help()
    for sub in ("gen-graph", "generate", "train", "verify", "bench"):
        assert sub in help_text
