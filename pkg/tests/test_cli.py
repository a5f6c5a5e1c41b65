"""End-to-end command-line behaviour: pipelines, exit codes, config layering."""

import json
import os

import numpy as np
import pytest

from augvoc.checkpoint import load_checkpoint
from augvoc.cli import EXIT_DIVERGED, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from augvoc.config import desk_profile
from augvoc.data import Corpus, read_wav, write_corpus
from augvoc.training import run_training


@pytest.fixture(scope="module")
def small_corpus_dir(corpus12, tmp_path_factory):
    path = tmp_path_factory.mktemp("cli_corpus")
    sub = Corpus(ids=corpus12.ids[:4], waves=corpus12.waves[:4],
                 sample_rate=corpus12.sample_rate)
    write_corpus(sub, str(path))
    return str(path)


@pytest.fixture(scope="module")
def trained(corpus_dir, tmp_path_factory):
    """One short run shared by the synth/eval command tests."""
    out = tmp_path_factory.mktemp("cli_train")
    cfg = desk_profile(data_dir=corpus_dir, out_dir=str(out / "run"),
                       max_iterations=4, batch_size=2, val_clips=2,
                       checkpoint_every=2, validate_every=2,
                       log_wall_time=False)
    return cfg, run_training(cfg)


def test_gen_data_writes_a_loadable_corpus(tmp_path, capsys):
    out = str(tmp_path / "corpus")
    rc = main(["gen-data", "--out", out, "--clips", "3", "--duration", "0.5"])
    assert rc == EXIT_OK
    assert "wrote 3 clips" in capsys.readouterr().out
    names = sorted(f for f in os.listdir(out) if f.endswith(".wav"))
    assert names == ["clip0000.wav", "clip0001.wav", "clip0002.wav"]


def test_gen_data_rejects_nonpositive_clips(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["gen-data", "--out", str(tmp_path / "x"), "--clips", "0"])
    assert exc.value.code == 2


def test_train_via_flags(corpus_dir, tmp_path, capsys):
    run_dir = str(tmp_path / "run")
    rc = main([
        "train", "--preset", "desk",
        "--data-dir", corpus_dir, "--out-dir", run_dir,
        "--max-iterations", "4", "--batch-size", "2", "--val-clips", "2",
        "--checkpoint-every", "2", "--validate-every", "2",
        "--log-wall-time", "false",
    ])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    assert "training: mode=baseline augmentation=none strategy=S2" in out
    assert "done: 4 steps" in out
    assert os.path.exists(os.path.join(run_dir, "checkpoint_000004.ckpt"))
    assert os.path.exists(os.path.join(run_dir, "config.resolved"))
    assert os.path.exists(os.path.join(run_dir, "train_log.jsonl"))


def test_train_bad_config_exits_usage(corpus_dir, tmp_path, capsys):
    rc = main([
        "train", "--preset", "desk", "--data-dir", corpus_dir,
        "--out-dir", str(tmp_path / "run"),
        "--segment-length", "1000",  # not a multiple of the hop
    ])
    assert rc == EXIT_USAGE
    assert "config error" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore::RuntimeWarning")  # overflow is the point
def test_train_divergence_exits_diverged(corpus_dir, tmp_path, capsys):
    rc = main([
        "train", "--preset", "desk",
        "--data-dir", corpus_dir, "--out-dir", str(tmp_path / "run"),
        "--max-iterations", "3", "--batch-size", "2", "--val-clips", "2",
        "--learning-rate", "1e200", "--log-wall-time", "false",
    ])
    assert rc == EXIT_DIVERGED
    assert "training diverged" in capsys.readouterr().err


def test_config_file_from_environment(corpus_dir, tmp_path, capsys, monkeypatch):
    cfg_path = tmp_path / "train.cfg"
    cfg_path.write_text(
        "# shared experiment settings\n"
        "preset = desk\n"
        "max_iterations = 2\n"
        "batch_size = 2\n"
        "val_clips = 2\n"
        "log_wall_time = false\n"
    )
    monkeypatch.setenv("AUGVOC_CONFIG", str(cfg_path))
    rc = main([
        "train", "--data-dir", corpus_dir, "--out-dir", str(tmp_path / "run"),
    ])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    assert "iterations=2 batch=2" in out


def test_train_help_lists_config_keys(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "--lambda-mel" in out
    assert "(default: 45.0)" in out
    assert "--upsample-factors" in out
    assert "(default: 8,8,4)" in out


def test_synth_copy_synthesis(trained, corpus_dir, tmp_path, capsys):
    _, summary = trained
    out_wav = str(tmp_path / "synth.wav")
    rc = main([
        "synth", "--checkpoint", summary["final_checkpoint"],
        "--input", os.path.join(corpus_dir, "clip0000.wav"),
        "--output", out_wav,
    ])
    assert rc == EXIT_OK
    wave = read_wav(out_wav)
    # ceil(22050 / 64) frames, each expanded to one hop of samples.
    assert len(wave) == 345 * 64
    assert "synthesized 22080 samples" in capsys.readouterr().out


def test_synth_from_mel_array(trained, tmp_path):
    _, summary = trained
    mel_path = str(tmp_path / "mel.npy")
    np.save(mel_path, np.full((10, 32), -11.5))
    out_wav = str(tmp_path / "synth.wav")
    rc = main(["synth", "--checkpoint", summary["final_checkpoint"],
               "--input", mel_path, "--output", out_wav])
    assert rc == EXIT_OK
    assert len(read_wav(out_wav)) == 10 * 64


def test_synth_rejects_wrong_mel_shape(trained, tmp_path, capsys):
    _, summary = trained
    mel_path = str(tmp_path / "mel.npy")
    np.save(mel_path, np.zeros((10, 5)))
    rc = main(["synth", "--checkpoint", summary["final_checkpoint"],
               "--input", mel_path, "--output", str(tmp_path / "o.wav")])
    assert rc == EXIT_USAGE
    assert "must be (frames, 32)" in capsys.readouterr().err


def test_synth_missing_checkpoint_exits_io(tmp_path, capsys):
    rc = main(["synth", "--checkpoint", str(tmp_path / "nope.ckpt"),
               "--input", "x.wav", "--output", str(tmp_path / "o.wav")])
    assert rc == EXIT_IO
    assert "i/o error" in capsys.readouterr().err


def test_eval_writes_report(trained, small_corpus_dir, tmp_path, capsys):
    _, summary = trained
    report_path = str(tmp_path / "report.json")
    rc = main(["eval", "--checkpoint", summary["final_checkpoint"],
               "--data", small_corpus_dir, "--output", report_path])
    assert rc == EXIT_OK
    assert "evaluated 4 clips (0 failures)" in capsys.readouterr().out
    with open(report_path, encoding="utf-8") as fh:
        report = json.load(fh)
    assert report["checkpoint_step"] == 4
    assert len(report["rows"]) == 4


def test_eval_missing_corpus_exits_io(trained, tmp_path, capsys):
    _, summary = trained
    rc = main(["eval", "--checkpoint", summary["final_checkpoint"],
               "--data", str(tmp_path / "missing")])
    assert rc == EXIT_IO


def test_preview_aug_mixup_fixed_m(small_corpus_dir, tmp_path, capsys):
    out = str(tmp_path / "aug")
    rc = main([
        "preview-aug", "--data", small_corpus_dir, "--out", out,
        "--augmentation", "mixup", "--m", "0.5",
        "--clip-ids", "clip0000,clip0001",
    ])
    assert rc == EXIT_OK
    assert "clip0000: mu=[1.0]" in capsys.readouterr().out

    with open(os.path.join(out, "clip0000_aug.json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    assert meta == {"kind": "mixup", "m": 0.5, "partner": "clip0001",
                    "mu": [1.0]}
    a = read_wav(os.path.join(small_corpus_dir, "clip0000.wav"))
    b = read_wav(os.path.join(small_corpus_dir, "clip0001.wav"))
    mixed = read_wav(os.path.join(out, "clip0000_aug.wav"))
    n = min(len(a), len(b))
    want = 0.5 * a.samples[:n] + 0.5 * b.samples[:n]
    assert np.allclose(mixed.samples, want, atol=1.0 / 32768)


def test_preview_aug_rate_identity(small_corpus_dir, tmp_path):
    out = str(tmp_path / "aug")
    rc = main([
        "preview-aug", "--data", small_corpus_dir, "--out", out,
        "--augmentation", "rate", "--s", "0", "--clip-ids", "clip0002",
    ])
    assert rc == EXIT_OK
    with open(os.path.join(out, "clip0002_aug.json"), encoding="utf-8") as fh:
        assert json.load(fh)["mu"] == [1.0]  # 2**0
    original = read_wav(os.path.join(small_corpus_dir, "clip0002.wav"))
    stretched = read_wav(os.path.join(out, "clip0002_aug.wav"))
    assert np.array_equal(original.samples, stretched.samples)


def test_preview_aug_unknown_clip_exits_io(small_corpus_dir, tmp_path, capsys):
    rc = main([
        "preview-aug", "--data", small_corpus_dir, "--out", str(tmp_path / "a"),
        "--augmentation", "mixup", "--clip-ids", "ghost",
    ])
    assert rc == EXIT_IO
    assert "unknown clip ids: ghost" in capsys.readouterr().err
