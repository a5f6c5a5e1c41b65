"""Objective evaluation: mel-L1, a periodicity proxy, and a mel-space
Fréchet distance, plus copy-synthesis report generation.

The periodicity of a frame is the maximum normalized autocorrelation over
lags corresponding to 80-400 Hz (frame 1024, hop 256); strongly periodic
frames score near 1, noise and silence near 0. The error metric is the RMSE
between the periodicity tracks of synthesized and reference audio, with a
voiced/unvoiced F1 from thresholding at 0.5.

The distribution metric fits a Gaussian to pooled log-mel frames of each
waveform set and reports the Fréchet distance
||m_a - m_b||^2 + tr(Ca + Cb - 2 (Ca Cb)^(1/2)), with matrix square roots
taken through symmetric eigendecompositions floored at 1e-10. Both stand in
for listener-model metrics that need pretrained networks; their absolute
values are not comparable to published numbers, only to each other.
"""

import json
import warnings

import numpy as np

from . import InvalidInputError
from .checkpoint import load_checkpoint
from .config import config_from_dict
from .data import Corpus, load_corpus
from .dsp import MelConfig, Waveform, log_mel_batch
from .models import Generator

PERIODICITY_FRAME = 1024
PERIODICITY_HOP = 256
F0_BAND_HZ = (80.0, 400.0)
VOICED_THRESHOLD = 0.5
EIG_FLOOR = 1e-10


def mel_l1(x: Waveform, y: Waveform, cfg: MelConfig):
    """Element-mean L1 between log-mels, trimming to the shorter input."""
    n = min(len(x), len(y))
    vx, _ = log_mel_batch(x.samples[None, :n], cfg)
    vy, _ = log_mel_batch(y.samples[None, :n], cfg)
    return float(np.mean(np.abs(vx - vy)))


def periodicity_track(samples, sample_rate, frame=PERIODICITY_FRAME,
                      hop=PERIODICITY_HOP):
    """Per-frame (periodicity, best_lag) via normalized autocorrelation.

    Lags are restricted to the 80-400 Hz band; frames with no energy get
    periodicity 0 and lag 0.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size < frame:
        x = np.pad(x, (0, frame - x.size))
    n_frames = 1 + (x.size - frame) // hop
    lag_lo = int(np.ceil(sample_rate / F0_BAND_HZ[1]))
    lag_hi = int(np.floor(sample_rate / F0_BAND_HZ[0]))
    lag_hi = min(lag_hi, frame - 1)

    idx = np.arange(n_frames)[:, None] * hop + np.arange(frame)[None, :]
    frames = x[idx]
    spec = np.fft.rfft(frames, n=2 * frame, axis=1)
    ac = np.fft.irfft(spec * np.conj(spec), n=2 * frame, axis=1)[:, :frame]

    e0 = ac[:, 0]
    band = ac[:, lag_lo:lag_hi + 1]
    best = np.argmax(band, axis=1)
    peak = band[np.arange(n_frames), best]
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(e0 > 1e-12, peak / np.maximum(e0, 1e-300), 0.0)
    p = np.clip(p, 0.0, 1.0)
    lags = np.where(e0 > 1e-12, best + lag_lo, 0)
    return p, lags


def periodicity_error(synth: Waveform, ref: Waveform):
    """(rmse between periodicity tracks, voiced/unvoiced F1)."""
    n = min(len(synth), len(ref))
    ps, _ = periodicity_track(synth.samples[:n], synth.sample_rate)
    pr, _ = periodicity_track(ref.samples[:n], ref.sample_rate)
    rmse = float(np.sqrt(np.mean(np.square(ps - pr))))

    vs = ps > VOICED_THRESHOLD
    vr = pr > VOICED_THRESHOLD
    tp = int(np.sum(vs & vr))
    fp = int(np.sum(vs & ~vr))
    fn = int(np.sum(~vs & vr))
    if tp + fp + fn == 0:
        f1 = 1.0
    else:
        f1 = 2.0 * tp / (2.0 * tp + fp + fn)
    return rmse, f1


def _pool_mel_frames(waves, cfg: MelConfig):
    frames = [log_mel_batch(w.samples[None, :], cfg)[0][0] for w in waves]
    return np.concatenate(frames, axis=0)


def _sym_sqrt(mat):
    vals, vecs = np.linalg.eigh(mat)
    vals = np.maximum(vals, EIG_FLOOR)
    return (vecs * np.sqrt(vals)) @ vecs.T


def gaussian_frechet(mean_a, cov_a, mean_b, cov_b):
    """Closed-form Fréchet distance between two Gaussians."""
    a = _sym_sqrt(cov_a)
    inner = a @ cov_b @ a
    vals = np.linalg.eigvalsh(inner)
    if np.any(vals < -1e-6):
        warnings.warn("covariance product has negative eigenvalues; flooring",
                      stacklevel=2)
    tr_sqrt = float(np.sum(np.sqrt(np.maximum(vals, 0.0))))
    diff = mean_a - mean_b
    return float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * tr_sqrt)


def mel_frechet(set_a, set_b, cfg: MelConfig):
    """Fréchet distance between Gaussian fits of pooled log-mel frames."""
    fa = _pool_mel_frames(set_a, cfg)
    fb = _pool_mel_frames(set_b, cfg)
    need = cfg.n_mels + 1
    if fa.shape[0] < need or fb.shape[0] < need:
        raise InvalidInputError(
            f"each set must pool at least {need} mel frames, got "
            f"{fa.shape[0]} and {fb.shape[0]}"
        )
    ma, mb = fa.mean(axis=0), fb.mean(axis=0)
    ca = np.cov(fa, rowvar=False, ddof=1)
    cb = np.cov(fb, rowvar=False, ddof=1)
    return gaussian_frechet(ma, ca, mb, cb)


def evaluate(checkpoint_path, corpus, out_path=None, mu_probe=None):
    """Copy-synthesis evaluation of a checkpoint over a corpus.

    Per clip: resynthesize from the clip's own mel, then compare. Inference
    is unconditional by policy: when the checkpoint was trained with an
    augmentation-conditional discriminator, the augmentation state at
    evaluation time is fixed to zero, and `mu_probe` (if given) is called
    with each state used so callers can assert the policy.

    Returns the report dict; also writes deterministic JSON to out_path.
    """
    header, groups = load_checkpoint(checkpoint_path)
    cfg = config_from_dict(header["config"])
    mel_cfg = cfg.mel_config()
    gen = Generator(cfg.generator_config())
    gen_params = groups["gen"]
    d = cfg.discriminator_config().mu_dim

    if isinstance(corpus, str):
        corpus = load_corpus(corpus)
    if corpus.sample_rate != mel_cfg.sample_rate:
        raise InvalidInputError(
            f"corpus rate {corpus.sample_rate} != model rate {mel_cfg.sample_rate}"
        )

    rows = []
    synth_waves, ref_waves = [], []
    for cid, w in corpus.clips:
        if cfg.mode == "augcondd" and mu_probe is not None:
            mu_probe(np.zeros(d))
        try:
            ref_mel, _ = log_mel_batch(w.samples[None, :], mel_cfg)
            audio, _ = gen.forward(gen_params, ref_mel.transpose(0, 2, 1))
            synth = Waveform(samples=audio[0, 0], sample_rate=corpus.sample_rate)
        except Exception as exc:  # per-clip failures must not sink the report
            rows.append({"id": cid, "error": str(exc)})
            continue
        rmse, f1 = periodicity_error(synth, w)
        rows.append({
            "id": cid,
            "mel_l1": mel_l1(synth, w, mel_cfg),
            "periodicity_rmse": rmse,
            "voiced_f1": f1,
        })
        synth_waves.append(synth)
        ref_waves.append(w)

    ok = [r for r in rows if "error" not in r]
    fd = None
    if ok:
        try:
            fd = mel_frechet(synth_waves, ref_waves, mel_cfg)
        except InvalidInputError:
            fd = None  # too few frames for a covariance fit
    summary = {
        "clips": len(rows),
        "failures": len(rows) - len(ok),
        "mean_mel_l1": float(np.mean([r["mel_l1"] for r in ok])) if ok else None,
        "mean_periodicity_rmse":
            float(np.mean([r["periodicity_rmse"] for r in ok])) if ok else None,
        "mean_voiced_f1": float(np.mean([r["voiced_f1"] for r in ok])) if ok else None,
        "mel_frechet": fd,
    }
    report = {
        "checkpoint_step": header["step"],
        "config": header["config"],
        "rows": rows,
        "summary": summary,
    }
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return report
