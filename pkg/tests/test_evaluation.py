"""Objective metrics against closed-form oracles, plus the report pipeline."""

import json

import numpy as np
import pytest

from augvoc import InvalidInputError
from augvoc.data import Corpus, make_synthetic_corpus
from augvoc.dsp import MelConfig, Waveform, log_mel_batch
from augvoc.evaluation import (
    PERIODICITY_FRAME,
    PERIODICITY_HOP,
    evaluate,
    gaussian_frechet,
    mel_frechet,
    periodicity_error,
    periodicity_track,
)
from augvoc.training import run_training

SR = 22050
CFG = MelConfig(sample_rate=SR, fft_size=256, win_length=256, hop_length=64,
                n_mels=32)


def _sine(freq, n, sr=SR):
    t = np.arange(n) / sr
    return 0.5 * np.sin(2.0 * np.pi * freq * t)


def _noise(n, seed=0):
    return 0.1 * np.random.default_rng(seed).standard_normal(n)


def test_periodicity_track_frame_law():
    p, lags = periodicity_track(_sine(220.0, SR), SR)
    want = 1 + (SR - PERIODICITY_FRAME) // PERIODICITY_HOP
    assert p.shape == (want,)
    assert lags.shape == (want,)


def test_periodicity_short_input_pads_to_one_frame():
    p, lags = periodicity_track(_sine(220.0, 500), SR)
    assert p.shape == (1,)


def test_periodicity_sine_high_noise_low():
    ps, _ = periodicity_track(_sine(220.5, SR), SR)
    pn, _ = periodicity_track(_noise(SR), SR)
    assert np.all(ps > 0.85)
    assert np.all(pn < 0.3)


def test_periodicity_lag_finds_the_period():
    # 220.5 Hz at 22050 Hz is an exact 100-sample period.
    _, lags = periodicity_track(_sine(220.5, SR), SR)
    assert np.all(np.abs(lags - 100) <= 1)


def test_periodicity_silence_is_zero():
    p, lags = periodicity_track(np.zeros(4096), SR)
    assert np.all(p == 0.0)
    assert np.all(lags == 0)


def test_periodicity_error_identical_and_disjoint():
    sine = Waveform(samples=_sine(220.0, SR), sample_rate=SR)
    noise = Waveform(samples=_noise(SR), sample_rate=SR)
    rmse_same, f1_same = periodicity_error(sine, sine)
    assert rmse_same == 0.0
    assert f1_same == 1.0
    rmse_diff, f1_diff = periodicity_error(sine, noise)
    assert rmse_diff > 0.4
    assert f1_diff == 0.0  # all frames voiced on one side, none on the other


def test_periodicity_error_no_voiced_frames_scores_f1_one():
    a = Waveform(samples=_noise(SR, seed=1), sample_rate=SR)
    b = Waveform(samples=_noise(SR, seed=2), sample_rate=SR)
    _, f1 = periodicity_error(a, b)
    assert f1 == 1.0


def _random_spd(rng, dim, lo=0.5, hi=2.0):
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    vals = rng.uniform(lo, hi, size=dim)
    return (q * vals) @ q.T


def test_gaussian_frechet_identical_is_zero(rng):
    mean = rng.standard_normal(6)
    cov = _random_spd(rng, 6)
    assert abs(gaussian_frechet(mean, cov, mean, cov)) < 1e-9


def test_gaussian_frechet_diagonal_closed_form(rng):
    # Commuting (diagonal) covariances reduce the trace term to
    # sum (sqrt(a_i) - sqrt(b_i))^2.
    ma = rng.standard_normal(5)
    mb = rng.standard_normal(5)
    a = rng.uniform(0.1, 3.0, size=5)
    b = rng.uniform(0.1, 3.0, size=5)
    want = np.sum((ma - mb) ** 2) + np.sum((np.sqrt(a) - np.sqrt(b)) ** 2)
    got = gaussian_frechet(ma, np.diag(a), mb, np.diag(b))
    assert got == pytest.approx(want, rel=1e-12)


def test_gaussian_frechet_scalar_hand_value():
    got = gaussian_frechet(np.array([3.0]), np.array([[4.0]]),
                           np.array([1.0]), np.array([[1.0]]))
    assert got == pytest.approx(5.0, rel=1e-12)


def test_gaussian_frechet_rotation_invariant(rng):
    ma, mb = rng.standard_normal(4), rng.standard_normal(4)
    ca, cb = _random_spd(rng, 4), _random_spd(rng, 4)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    plain = gaussian_frechet(ma, ca, mb, cb)
    rotated = gaussian_frechet(q @ ma, q @ ca @ q.T, q @ mb, q @ cb @ q.T)
    assert rotated == pytest.approx(plain, rel=1e-8)


def test_gaussian_frechet_warns_on_indefinite_product():
    with pytest.warns(UserWarning, match="negative eigenvalues"):
        got = gaussian_frechet(np.zeros(2), np.eye(2),
                               np.zeros(2), np.diag([1.0, -0.5]))
    # The -0.5 eigenvalue is floored to zero in the trace term.
    assert got == pytest.approx(0.5, rel=1e-12)


def _jittered(wave, seed, level=0.02):
    # Full-band noise keeps every mel band off the log floor so the
    # covariance fit is well conditioned.
    extra = level * np.random.default_rng(seed).standard_normal(len(wave))
    return Waveform(samples=np.clip(wave.samples + extra, -1.0, 1.0),
                    sample_rate=wave.sample_rate)


def _frechet_oracle(set_a, set_b, cfg):
    def stats(waves):
        frames = np.concatenate(
            [log_mel_batch(w.samples[None, :], cfg)[0][0] for w in waves])
        return frames.mean(axis=0), np.cov(frames, rowvar=False, ddof=1)

    ma, ca = stats(set_a)
    mb, cb = stats(set_b)
    # sqrt(Ca) Cb sqrt(Ca) is similar to Ca Cb, so the trace of the matrix
    # square root equals the sum of sqrt eigenvalues of the plain product.
    vals = np.linalg.eigvals(ca @ cb).real
    tr_sqrt = np.sum(np.sqrt(np.maximum(vals, 0.0)))
    d = ma - mb
    return float(d @ d + np.trace(ca) + np.trace(cb) - 2.0 * tr_sqrt)


def test_mel_frechet_identical_sets_near_zero(corpus12):
    waves = [_jittered(w, i) for i, (_, w) in enumerate(corpus12.clips[:2])]
    assert abs(mel_frechet(waves, waves, CFG)) < 1e-6


def test_mel_frechet_matches_independent_form(corpus12):
    set_a = [_jittered(w, i) for i, (_, w) in enumerate(corpus12.clips[:3])]
    set_b = [_jittered(w, 100 + i) for i, (_, w) in
             enumerate(corpus12.clips[3:6])]
    got = mel_frechet(set_a, set_b, CFG)
    want = _frechet_oracle(set_a, set_b, CFG)
    assert abs(got - want) <= 1e-6 * max(1.0, abs(want))
    assert got > 0.0


def test_mel_frechet_needs_enough_frames():
    short = [Waveform(samples=_noise(1000), sample_rate=SR)]
    with pytest.raises(InvalidInputError, match="at least 33"):
        mel_frechet(short, short, CFG)


def _sub_corpus(corpus, k):
    return Corpus(ids=corpus.ids[:k], waves=corpus.waves[:k],
                  sample_rate=corpus.sample_rate)


def test_evaluate_report(tiny_cfg, corpus12, tmp_path):
    cfg = tiny_cfg(mode="augcondd", augmentation="mixup", run_name="eval_run")
    summary = run_training(cfg)
    out_path = tmp_path / "report.json"
    probes = []
    report = evaluate(summary["final_checkpoint"], _sub_corpus(corpus12, 4),
                      out_path=str(out_path), mu_probe=probes.append)

    assert report["checkpoint_step"] == cfg.max_iterations
    assert "out_dir" not in report["config"]
    assert [r["id"] for r in report["rows"]] == list(corpus12.ids[:4])
    for row in report["rows"]:
        assert set(row) == {"id", "mel_l1", "periodicity_rmse", "voiced_f1"}
        assert row["mel_l1"] > 0.0
    s = report["summary"]
    assert s["clips"] == 4
    assert s["failures"] == 0
    assert s["mean_mel_l1"] == pytest.approx(
        np.mean([r["mel_l1"] for r in report["rows"]]))
    assert s["mel_frechet"] is not None

    # Inference is unconditional: one zero state per clip.
    assert len(probes) == 4
    assert all(np.array_equal(mu, np.zeros(1)) for mu in probes)

    with open(out_path, encoding="utf-8") as fh:
        assert json.load(fh) == report


def test_evaluate_baseline_skips_mu_probe(tiny_cfg, corpus12):
    cfg = tiny_cfg(run_name="eval_base")
    summary = run_training(cfg)
    probes = []
    report = evaluate(summary["final_checkpoint"], _sub_corpus(corpus12, 2),
                      mu_probe=probes.append)
    assert probes == []
    assert report["summary"]["failures"] == 0


def test_evaluate_rejects_rate_mismatch(tiny_cfg):
    cfg = tiny_cfg(run_name="eval_rate")
    summary = run_training(cfg)
    other = make_synthetic_corpus(n_clips=1, seed=0, sample_rate=16000,
                                  duration=0.2)
    with pytest.raises(InvalidInputError, match="rate"):
        evaluate(summary["final_checkpoint"], other)
