import pytest

from treespec import read_records_csv
from treespec.cli import main


def run_cli(*argv):
    return main(list(argv))


class TestRun:
    def test_synthetic_run_writes_reports(self, tmp_path):
        out = tmp_path / "results"
        code = run_cli(
            "run", "--synthetic", "--synthetic-docs", "12", "--out", str(out),
            "--prompts-per-domain", "2", "--max-new-tokens", "3",
        )
        assert code == 0
        records = read_records_csv(out / "records.csv")
        assert len(records) == 4 * 2 * 3 * 8
        assert (out / "summary.json").exists()
        assert (out / "tables.txt").exists()
        assert (out / "meta.json").exists()

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed = 7\nmax_new_tokens = 2\nprompts_per_domain = 1\n")
        out = tmp_path / "out"
        code = run_cli(
            "run", "--synthetic", "--synthetic-docs", "10",
            "--config", str(cfg), "--out", str(out), "--seed", "11",
        )
        assert code == 0
        meta = (out / "meta.json").read_text()
        assert '"seed": "11"' in meta
        assert '"max_new_tokens": "2"' in meta

    def test_unknown_config_key_exits_one(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("not_a_key = 1\n")
        out = tmp_path / "out"
        assert run_cli("run", "--synthetic", "--config", str(cfg), "--out", str(out)) == 1

    def test_unwritable_out_exits_two(self, tmp_path):
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a directory")
        code = run_cli(
            "run", "--synthetic", "--synthetic-docs", "10", "--out", str(blocker),
            "--prompts-per-domain", "1", "--max-new-tokens", "1",
        )
        assert code == 2

    def test_missing_data_dir_exits_two(self, tmp_path):
        assert run_cli("run", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "o")) == 2

    def test_data_dir_run(self, tmp_path):
        for domain, text in (("alpha", "a b c a b c a b"), ("beta", "x y x y x y")):
            d = tmp_path / "data" / domain
            d.mkdir(parents=True)
            (d / "doc.txt").write_text(text)
        out = tmp_path / "out"
        code = run_cli(
            "run", "--data", str(tmp_path / "data"), "--out", str(out),
            "--prompts-per-domain", "1", "--max-new-tokens", "2", "--prompt-truncation", "4",
        )
        assert code == 0
        records = read_records_csv(out / "records.csv")
        assert {r.domain for r in records} == {"alpha", "beta"}


class TestAnalyzeAndTables:
    @pytest.fixture()
    def record_file(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli(
            "run", "--synthetic", "--synthetic-docs", "10", "--out", str(out),
            "--prompts-per-domain", "1", "--max-new-tokens", "2",
        ) == 0
        return out / "records.csv"

    def test_analyze_matches_run_summary(self, record_file, tmp_path):
        out = tmp_path / "analysis"
        assert run_cli("analyze", "--records", str(record_file), "--out", str(out)) == 0
        original = record_file.parent / "summary.json"
        assert (out / "summary.json").read_bytes() == original.read_bytes()
        assert (out / "tables.txt").exists()

    def test_tables_to_stdout(self, record_file, capsys):
        assert run_cli("tables", "--records", str(record_file)) == 0
        captured = capsys.readouterr()
        assert "Per-domain node statistics" in captured.out
        assert "rank correlation" in captured.out

    def test_tables_to_file(self, record_file, tmp_path):
        out = tmp_path / "tables.txt"
        assert run_cli("tables", "--records", str(record_file), "--out", str(out)) == 0
        assert "Expected accepted length" in out.read_text()

    def test_analyze_missing_file_exits_two(self, tmp_path):
        assert run_cli("analyze", "--records", str(tmp_path / "no.csv"), "--out", str(tmp_path)) == 2

    def test_analyze_corrupt_file_exits_one(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("wrong,header\n")
        assert run_cli("analyze", "--records", str(bad), "--out", str(tmp_path / "o")) == 1


class TestSelftest:
    def test_selftest_passes(self, capsys):
        assert run_cli("selftest", "--seed", "42") == 0
        out = capsys.readouterr().out
        assert "PASS" in out
        assert "FAIL" not in out
