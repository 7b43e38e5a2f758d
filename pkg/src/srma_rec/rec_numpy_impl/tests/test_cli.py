"""Tests for the srma command line."""

from pathlib import Path

import pytest

from srma_rec.rec_api.types import RankingMetrics
from srma_rec.rec_numpy_impl.cli import EXIT_ERROR, format_table, main

FAST_CONFIG = """\
# tiny desk run
synth.users = 30
synth.items = 10
synth.length = 8
synth.seed = 4
data.kcore = 1
data.maxlen = 8
encoder.hidden = 8
encoder.layers = 1
train.epochs = 1
train.batch_size = 16
"""


@pytest.fixture
def config_file(tmp_path: Path) -> Path:
    path = tmp_path / "fast.conf"
    path.write_text(FAST_CONFIG, encoding="utf-8")
    return path


@pytest.fixture(autouse=True)
def clean_env(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("SRMA_DATA_DIR", raising=False)
    monkeypatch.chdir(tmp_path)


class TestFormatTable:
    """Test cases for format_table."""

    def test_fixed_order(self) -> None:
        """Test the header order and value formatting."""
        table = format_table(RankingMetrics(hr5=0.5, hr10=0.75, hr20=1.0, ndcg5=0.25, ndcg10=0.3, ndcg20=0.35))
        header, values = table.splitlines()

        assert header.split() == list(RankingMetrics.COLUMNS)
        assert values.split() == ["0.5000", "0.7500", "1.0000", "0.2500", "0.3000", "0.3500"]


class TestPipeline:
    """Synthesize, prepare, train and evaluate through the command line."""

    def test_end_to_end(self, tmp_path: Path, config_file: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test every stage succeeds and prints the metric table."""
        raw = tmp_path / "raw.tsv"
        prepared = tmp_path / "prepared"
        run = tmp_path / "run"
        conf = ["--config", str(config_file)]

        assert main(["synth", *conf, "--out", str(raw)]) == 0
        assert main(["prepare", *conf, "--input", str(raw), "--out", str(prepared)]) == 0
        assert main(["stats", *conf, "--data", str(prepared)]) == 0
        assert "users=30" in capsys.readouterr().out

        assert main(["train", *conf, "--data", str(prepared), "--out", str(run)]) == 0
        assert capsys.readouterr().out.splitlines()[0].split() == list(RankingMetrics.COLUMNS)
        assert (run / "config.effective").exists()
        assert (run / "best.ckpt").exists()

        code = main([
            "evaluate", *conf, "--data", str(prepared), "--checkpoint", str(run / "best.ckpt"), "--split", "valid",
        ])
        assert code == 0
        assert len(capsys.readouterr().out.splitlines()) == 2

    def test_data_dir_from_environment(
        self, tmp_path: Path, config_file: Path, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test SRMA_DATA_DIR stands in for --data."""
        raw = tmp_path / "raw.tsv"
        prepared = tmp_path / "prepared"
        main(["synth", "--config", str(config_file), "--out", str(raw)])
        main(["prepare", "--config", str(config_file), "--input", str(raw), "--out", str(prepared)])
        monkeypatch.setenv("SRMA_DATA_DIR", str(prepared))
        capsys.readouterr()

        assert main(["stats", "--config", str(config_file)]) == 0
        assert "items=" in capsys.readouterr().out


class TestErrors:
    """Failures surface as one error line and exit status 2."""

    def test_missing_data_dir(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test a missing dataset directory reports a ConfigError."""
        code = main(["train", "--out", str(tmp_path / "run")])
        err = capsys.readouterr().err.strip().splitlines()[-1]

        assert code == EXIT_ERROR
        assert err.startswith('error code=ConfigError message="No dataset directory')

    def test_bad_override(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test an invalid --set value reports a ConfigError."""
        code = main(["synth", "--set", "modelaug.M=9", "--out", "raw.tsv"])

        assert code == EXIT_ERROR
        assert "error code=ConfigError" in capsys.readouterr().err

    def test_malformed_input(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test a malformed interaction file reports a ParseError."""
        raw = tmp_path / "bad.tsv"
        raw.write_text("u1\ta\t1\nu1\tb\n", encoding="utf-8")
        code = main(["prepare", "--input", str(raw), "--out", str(tmp_path / "p")])

        assert code == EXIT_ERROR
        assert "error code=ParseError" in capsys.readouterr().err

    def test_pretrain_needs_complement(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test pre-training without a complement kind is rejected."""
        code = main(["pretrain", "--data", str(tmp_path), "--out", str(tmp_path / "c")])

        assert code == EXIT_ERROR
        assert "error code=ConfigError" in capsys.readouterr().err


@pytest.mark.slow
class TestGradcheckCommand:
    """Test cases for the gradcheck subcommand."""

    def test_passes(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test the full check prints a PASS line and exits 0."""
        assert main(["gradcheck"]) == 0
        assert capsys.readouterr().out.startswith("PASS max_rel_err=")


@pytest.mark.slow
class TestPipelineDeterminism:
    """Two complete runs from one seed write identical metrics."""

    def _run(self, root: Path, config_file: Path) -> bytes:
        conf = ["--config", str(config_file), "--set", "modelaug.complement=gru", "--set", "train.epochs=5"]
        raw = root / "raw.tsv"
        prepared = root / "prepared"
        complement = root / "complement"
        run = root / "run"
        assert main(["synth", *conf, "--out", str(raw)]) == 0
        assert main(["prepare", *conf, "--input", str(raw), "--out", str(prepared)]) == 0
        assert main(["pretrain", *conf, "--data", str(prepared), "--out", str(complement)]) == 0
        ckpt = ["--set", f"modelaug.complement_ckpt={complement / 'complement.ckpt'}"]
        assert main(["train", *conf, *ckpt, "--data", str(prepared), "--out", str(run)]) == 0
        assert main(["evaluate", *conf, "--data", str(prepared), "--checkpoint", str(run / "best.ckpt")]) == 0
        return (run / "metrics.jsonl").read_bytes()

    def test_metrics_are_byte_identical(self, tmp_path: Path, config_file: Path) -> None:
        """Test synth, prepare, pretrain, train and evaluate twice give the same metrics file."""
        first = self._run(tmp_path / "a", config_file)
        second = self._run(tmp_path / "b", config_file)

        assert len(first.splitlines()) == 5
        assert first == second
