import json

import pytest

from tonalvae.cli import main
from tonalvae.pipeline import Paths, read_csv

from conftest import CHORALES


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "corpus_dir": str(CHORALES), "encoding_id": "PianoRoll", "output_dir": str(tmp_path / "out"),
        "seed": 1, "train": {"epochs": 1, "batch_size": 64, "hidden_dim": 16, "latent_dim": 4},
    }))
    return path


def test_subcommands_in_sequence(config, tmp_path, capsys):
    out = Paths(tmp_path / "out")
    assert main(["--config", str(config), "ingest"]) == 0
    assert json.loads(out.split.read_text())["test"]
    assert main(["--config", str(config), "encode"]) == 0
    assert out.cache.exists()
    assert main(["--config", str(config), "train"]) == 0
    assert out.checkpoint.exists() and out.history.exists()
    assert main(["--config", str(config), "eval"]) == 0
    assert len(read_csv(out.metrics)) == 5
    for svg in out.plots.glob("*.svg"):
        svg.unlink()
    assert main(["--config", str(config), "plot"]) == 0
    assert len(list(out.plots.glob("*.svg"))) == 4
    assert "metrics ->" in capsys.readouterr().out


def test_run_with_overrides(config, tmp_path):
    other = tmp_path / "other"
    assert main(["--config", str(config), "--encoding", "PcDft", "--output-dir", str(other),
                 "--epochs", "0", "run", "--no-plots"]) == 0
    assert json.loads((other / "config.json").read_text())["encoding_id"] == "PcDft"
    assert not (other / "plots").exists()


def test_usage_errors(config):
    assert main(["nonsense"]) == 1
    assert main(["--config", str(config), "--encoding", "Midi", "run"]) == 1
    assert main(["--config", str(config), "--split-ratio", "1.5", "ingest"]) == 1
    assert main(["--config", "/no/such/file", "ingest"]) == 1


def test_help_is_success(capsys):
    assert main(["--help"]) == 0
    text = capsys.readouterr().out
    for cmd in ("ingest", "encode", "train", "eval", "plot"):
        assert cmd in text


def test_data_errors(config, tmp_path):
    assert main(["--config", str(config), "train"]) == 2  # no cache yet
    assert main(["--config", str(config), "--corpus-dir", str(tmp_path / "none"), "ingest"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["--config", str(bad), "ingest"]) == 2
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "x.mid").write_bytes(b"MThd junk")
    (corpus / "y.mid").write_bytes(b"MThd junk")
    assert main(["--config", str(config), "--corpus-dir", str(corpus), "ingest"]) == 2


def test_numeric_error(config, tmp_path, monkeypatch):
    from tonalvae import pipeline
    from tonalvae.errors import NonFinite

    def boom(*a, **k):
        raise NonFinite("epoch 0, batch 0: non-finite loss")

    monkeypatch.setattr(pipeline, "train_from_cache", boom)
    assert main(["--config", str(config), "run"]) == 3


def test_mismatched_checkpoint(config, tmp_path):
    assert main(["--config", str(config), "encode"]) == 0
    assert main(["--config", str(config), "train"]) == 0
    assert main(["--config", str(config), "--encoding", "Tonnetz", "eval"]) == 2
