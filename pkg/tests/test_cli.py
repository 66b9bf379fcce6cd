"""Command-line interface: workflows, determinism, config files, exit codes."""

import json

import pytest

from tensorfm import auc, logloss, read_dataset, score_dataset
from tensorfm.cli import main
from tensorfm.params import load_bundle


@pytest.fixture()
def synth_files(tmp_path):
    prefix = str(tmp_path / "s")
    rc = main(
        [
            "synth", "--fields", "3", "--card", "6", "--order", "2",
            "--samples", "3000", "--seed", "5", "--out-prefix", prefix,
        ]
    )
    assert rc == 0
    return prefix


class TestSynth:
    def test_single_sample_gives_one_line_dataset(self, tmp_path):
        prefix = str(tmp_path / "one")
        rc = main(["synth", "--fields", "2", "--card", "3", "--order", "1", "--samples", "1",
                   "--seed", "0", "--out-prefix", prefix])
        assert rc == 0
        lines = (tmp_path / "one.train.txt").read_text().splitlines()
        assert len(lines) == 2  # header + the single instance
        assert lines[0].startswith("#schema")

    def test_hundred_field_dataset(self, tmp_path):
        prefix = str(tmp_path / "big")
        rc = main(["synth", "--fields", "4", "--card", "4", "--order", "4", "--noise", "96",
                   "--samples", "50", "--seed", "1", "--out-prefix", prefix])
        assert rc == 0
        header = (tmp_path / "big.train.txt").read_text().splitlines()[0]
        assert len(header.split(" ")[1].split(",")) == 100

    def test_splits_partition_the_samples(self, synth_files):
        sizes = [len(read_dataset(f"{synth_files}.{t}.txt")) for t in ("train", "valid", "test")]
        assert sum(sizes) == 3000
        assert sizes == [2100, 450, 450]


class TestTrainEval:
    def test_train_writes_model_and_log(self, synth_files, tmp_path, capsys):
        model = str(tmp_path / "m.txt")
        log = str(tmp_path / "log.csv")
        rc = main(["train", "--train", f"{synth_files}.train.txt", "--valid", f"{synth_files}.valid.txt",
                   "--model", "tensorfm", "--d", "2", "--rank", "2", "--lr", "0.1",
                   "--epochs", "2", "--out", model, "--log", log])
        assert rc == 0
        bundle = load_bundle(model)
        assert bundle.kind == "tensorfm"
        lines = (tmp_path / "log.csv").read_text().splitlines()
        assert lines[0].startswith("#")  # wall-clock columns flagged as nondeterministic
        assert lines[1] == "epoch,train_loss,valid_logloss,valid_auc,wall_seconds"
        assert len(lines) == 4

    def test_eval_matches_library_metrics(self, synth_files, tmp_path, capsys):
        model = str(tmp_path / "m.txt")
        main(["train", "--train", f"{synth_files}.train.txt", "--model", "fm",
              "--lr", "0.1", "--epochs", "2", "--out", model])
        capsys.readouterr()
        rc = main(["eval", "--model", model, "--data", f"{synth_files}.test.txt"])
        assert rc == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "test_logloss,test_auc"
        ll, auc_pct = (float(tok) for tok in out[1].split(","))
        test_set = read_dataset(f"{synth_files}.test.txt")
        scores = score_dataset(load_bundle(model), test_set)
        assert abs(ll - logloss(scores, test_set.labels)) < 1e-6
        assert abs(auc_pct - 100 * auc(scores, test_set.labels)) < 1e-3

    def test_zero_epochs_is_usage_error(self, synth_files, tmp_path):
        rc = main(["train", "--train", f"{synth_files}.train.txt", "--model", "lr",
                   "--epochs", "0", "--out", str(tmp_path / "m.txt")])
        assert rc == 2

    def test_epoch_log_deterministic_apart_from_wall_clock(self, synth_files, tmp_path):
        logs = []
        for tag in ("a", "b"):
            main(["train", "--train", f"{synth_files}.train.txt", "--valid", f"{synth_files}.valid.txt",
                  "--model", "fm", "--lr", "0.1", "--epochs", "2", "--seed", "3",
                  "--out", str(tmp_path / f"m{tag}.txt"), "--log", str(tmp_path / f"l{tag}.csv")])
            rows = (tmp_path / f"l{tag}.csv").read_text().splitlines()[2:]
            logs.append([",".join(row.split(",")[:-1]) for row in rows])  # drop wall_seconds
        assert logs[0] == logs[1]
        assert (tmp_path / "ma.txt").read_bytes() == (tmp_path / "mb.txt").read_bytes()


class TestGridCommand:
    def test_grid_report(self, synth_files, tmp_path):
        report = tmp_path / "grid.csv"
        rc = main(["grid", "--train", f"{synth_files}.train.txt", "--valid", f"{synth_files}.valid.txt",
                   "--model", "fm", "--grid-lr", "0.05,0.1", "--grid-l2", "0",
                   "--epochs", "2", "--out", str(tmp_path / "best.txt"), "--report", str(report)])
        assert rc == 0
        lines = report.read_text().splitlines()
        assert lines[0] == "learning_rate,l2,valid_auc,valid_logloss,status"
        assert len(lines) == 3


class TestBenchCommands:
    def test_flops_sweep_row_count(self, tmp_path, capsys):
        out = tmp_path / "flops.csv"
        rc = main(["bench-flops", "--sweep-n", "10:200:10", "--kinds", "lr,fm,fwfm,tensorfm",
                   "--d", "3", "--rank", "3", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "kind,n,k,d,r,flops"
        assert len(lines) == 1 + 4 * 20  # 20 sweep points per kind

    def test_latency_command(self, tmp_path, capsys):
        prefix = str(tmp_path / "lat")
        main(["synth", "--fields", "3", "--card", "4", "--order", "2", "--samples", "500",
              "--seed", "2", "--out-prefix", prefix])
        out = tmp_path / "lat.csv"
        rc = main(["bench-latency", "--data", f"{prefix}.train.txt", "--kinds",
                   "lr,tensorfm:2:2", "--repeats", "3", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[1] == "kind,ms_per_instance,std_ms,repeats"
        assert len(lines) == 4


class TestInterpretCommand:
    def test_emits_tables_and_summary(self, synth_files, tmp_path):
        model = str(tmp_path / "m.txt")
        main(["train", "--train", f"{synth_files}.train.txt", "--model", "tensorfm",
              "--d", "2", "--rank", "2", "--lr", "0.1", "--epochs", "2", "--out", model])
        rc = main(["interpret", "--model", model, "--data", f"{synth_files}.train.txt",
                   "--order", "2", "--topk", "1,3", "--out-prefix", str(tmp_path / "rep")])
        assert rc == 0
        table = (tmp_path / "rep.interactions.csv").read_text().splitlines()
        assert table[0] == "tuple,learned_strength,mutual_info"
        assert len(table) == 4  # 3 field pairs
        top = (tmp_path / "rep.top3.csv").read_text().splitlines()
        assert len(top) == 4
        summary = json.loads((tmp_path / "rep.summary.json").read_text())
        assert {"pearson", "overlap", "order", "n_tuples"} <= set(summary)

    def test_interpret_deterministic(self, synth_files, tmp_path):
        model = str(tmp_path / "m.txt")
        main(["train", "--train", f"{synth_files}.train.txt", "--model", "tensorfm",
              "--d", "2", "--rank", "2", "--lr", "0.1", "--epochs", "1", "--out", model])
        outputs = []
        for tag in ("a", "b"):
            main(["interpret", "--model", model, "--data", f"{synth_files}.train.txt",
                  "--order", "2", "--topk", "2", "--out-prefix", str(tmp_path / f"r{tag}")])
            outputs.append((tmp_path / f"r{tag}.interactions.csv").read_bytes())
        assert outputs[0] == outputs[1]


class TestConfigFile:
    def test_config_supplies_defaults_cli_wins(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("fields=2\ncard=4\norder=2\nsamples=100\nseed=9\n")
        prefix = str(tmp_path / "c")
        rc = main(["synth", "--config", str(cfg), "--samples", "50", "--out-prefix", prefix])
        assert rc == 0
        total = sum(len(read_dataset(f"{prefix}.{t}.txt")) for t in ("train", "valid", "test"))
        assert total == 50  # command line beat the config file
        header = (tmp_path / "c.train.txt").read_text().splitlines()[0]
        assert header == "#schema 4,4"  # config supplied the rest

    def test_unknown_config_key_is_usage_error(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("nonsense=1\n")
        rc = main(["synth", "--config", str(cfg), "--out-prefix", str(tmp_path / "x")])
        assert rc == 2


class TestExitCodes:
    def test_missing_file_is_data_error(self, tmp_path, capsys):
        assert main(["eval", "--model", str(tmp_path / "no.txt"), "--data", "also-no.txt"]) == 3

    def test_bad_flag_value_is_usage_error(self, synth_files, tmp_path):
        rc = main(["train", "--train", f"{synth_files}.train.txt", "--model", "tensorfm",
                   "--d", "2", "--rank", "99", "--out", str(tmp_path / "m.txt")])
        assert rc == 2

    def test_unknown_flag_rejected_by_parser(self):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--bogus", "1"])
        assert exc.value.code == 2

    def test_schema_mismatch_is_data_error(self, synth_files, tmp_path, capsys):
        model = str(tmp_path / "m.txt")
        main(["train", "--train", f"{synth_files}.train.txt", "--model", "lr",
              "--epochs", "1", "--out", model])
        other = str(tmp_path / "o")
        main(["synth", "--fields", "2", "--card", "9", "--order", "2", "--samples", "100",
              "--seed", "1", "--out-prefix", other])
        # mismatch surfaces as a clean nonzero exit, not a crash
        rc = main(["eval", "--model", model, "--data", f"{other}.test.txt"])
        assert rc in (2, 3)

    def test_help_lists_flags(self, capsys):
        for command in ("synth", "prep", "train", "eval", "grid", "bench-flops", "bench-latency", "interpret"):
            with pytest.raises(SystemExit) as exc:
                main([command, "--help"])
            assert exc.value.code == 0
            out = capsys.readouterr().out
            assert "--seed" in out and "--config" in out
