"""Corpus handling: WAV ingestion, splits, subsets, segment sampling, and a
synthetic toy-speech generator.

A corpus is an ordered set of mono clips sharing one sample rate, with a
plain-text manifest (id, path, duration, optional f0 track) sorted
lexicographically by id so every downstream draw is deterministic. Subsets
use shuffle-prefix selection: one seeded permutation, take the first
floor(ratio * N) clips (minimum 1), so smaller ratios are nested inside
larger ones under the same seed.

The synthetic generator produces speech-like test clips: a wandering
fundamental with vibrato, a few decaying harmonics, a syllable-style
amplitude envelope with silent gaps, and low-level band-limited noise. The
exact per-frame f0 and voicing used for synthesis are stored next to each
clip, giving the evaluation metrics a known ground truth.
"""

import os
import wave
from dataclasses import dataclass, field

import numpy as np

from . import ConfigError, InvalidInputError
from .dsp import Waveform

F0_FRAME = 1024
F0_HOP = 256


@dataclass(frozen=True)
class Corpus:
    """Ordered clips with one shared sample rate.

    f0_tracks maps clip id to an (n_frames, 2) array of [f0_hz, voiced]
    rows when ground truth is available (synthetic corpora).
    """

    ids: tuple
    waves: tuple
    sample_rate: int
    f0_tracks: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.ids) != len(self.waves) or not self.ids:
            raise InvalidInputError("corpus needs matching, non-empty id/wave lists")
        if len(set(self.ids)) != len(self.ids):
            raise InvalidInputError("corpus ids must be unique")
        for cid, w in zip(self.ids, self.waves):
            if w.sample_rate != self.sample_rate:
                raise ConfigError(
                    f"clip {cid} has sample rate {w.sample_rate}, corpus "
                    f"expects {self.sample_rate}"
                )

    def __len__(self):
        return len(self.ids)

    @property
    def clips(self):
        return list(zip(self.ids, self.waves))

    @property
    def duration(self):
        return sum(len(w) for w in self.waves) / self.sample_rate


@dataclass(frozen=True)
class SubsetSpec:
    ratio: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.ratio <= 1.0:
            raise ConfigError(f"subset ratio {self.ratio} outside (0, 1]")


def read_wav(path):
    """Read a mono 16- or 24-bit PCM WAV into a Waveform in [-1, 1]."""
    with wave.open(path, "rb") as fh:
        channels = fh.getnchannels()
        width = fh.getsampwidth()
        rate = fh.getframerate()
        n = fh.getnframes()
        raw = fh.readframes(n)
    if channels != 1:
        raise InvalidInputError(f"{path}: expected mono, got {channels} channels")
    if width == 2:
        samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        samples = v.astype(np.float64) / float(1 << 23)
    else:
        raise InvalidInputError(f"{path}: unsupported sample width {width * 8} bit")
    if n == 0:
        raise InvalidInputError(f"{path}: empty audio stream")
    return Waveform(samples=np.clip(samples, -1.0, 1.0), sample_rate=rate)


def write_wav(path, wave_out: Waveform):
    """Write 16-bit PCM; values are clamped to [-1, 1] first."""
    clipped = np.clip(wave_out.samples, -1.0, 1.0)
    ints = np.clip(np.rint(clipped * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(path, "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(wave_out.sample_rate)
        fh.writeframes(ints.tobytes())


def load_corpus(path) -> Corpus:
    """Load every .wav under `path`, manifest-ordered by filename.

    Raises with a per-file listing if any clip is unreadable and a config
    error naming the first offender on mixed sample rates.
    """
    try:
        names = sorted(f for f in os.listdir(path) if f.lower().endswith(".wav"))
    except OSError as exc:
        raise InvalidInputError(f"cannot list corpus directory {path}: {exc}")
    if not names:
        raise InvalidInputError(f"no .wav files found in {path}")

    ids, waves, errors = [], [], []
    rate = None
    for name in names:
        full = os.path.join(path, name)
        try:
            w = read_wav(full)
        except (InvalidInputError, OSError, wave.Error, EOFError) as exc:
            errors.append(f"{full}: {exc}")
            continue
        if rate is None:
            rate = w.sample_rate
        elif w.sample_rate != rate:
            raise ConfigError(
                f"{full}: sample rate {w.sample_rate} differs from corpus "
                f"rate {rate}"
            )
        ids.append(os.path.splitext(name)[0])
        waves.append(w)
    if errors:
        raise InvalidInputError(
            "unreadable corpus files:\n  " + "\n  ".join(errors)
        )

    f0_tracks = {}
    f0_dir = os.path.join(path, "f0")
    if os.path.isdir(f0_dir):
        for cid in ids:
            track_path = os.path.join(f0_dir, cid + ".f0")
            if os.path.exists(track_path):
                f0_tracks[cid] = np.loadtxt(track_path, ndmin=2)
    return Corpus(ids=tuple(ids), waves=tuple(waves), sample_rate=rate,
                  f0_tracks=f0_tracks)


def write_corpus(corpus: Corpus, path):
    """Write clips as 16-bit WAVs plus manifest.tsv and any f0 tracks."""
    os.makedirs(path, exist_ok=True)
    rows = []
    for cid, w in corpus.clips:
        name = cid + ".wav"
        write_wav(os.path.join(path, name), w)
        f0_rel = ""
        if cid in corpus.f0_tracks:
            os.makedirs(os.path.join(path, "f0"), exist_ok=True)
            f0_rel = os.path.join("f0", cid + ".f0")
            np.savetxt(os.path.join(path, f0_rel), corpus.f0_tracks[cid],
                       fmt="%.6f")
        rows.append(f"{cid}\t{name}\t{len(w) / corpus.sample_rate:.6f}\t{f0_rel}")
    with open(os.path.join(path, "manifest.tsv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")


def subset(corpus: Corpus, spec: SubsetSpec) -> Corpus:
    """Seeded shuffle-prefix subset of floor(ratio * N) clips, at least 1."""
    n = len(corpus)
    k = max(1, int(np.floor(spec.ratio * n)))
    perm = np.random.default_rng(spec.seed).permutation(n)
    chosen = sorted(perm[:k])
    return Corpus(
        ids=tuple(corpus.ids[i] for i in chosen),
        waves=tuple(corpus.waves[i] for i in chosen),
        sample_rate=corpus.sample_rate,
        f0_tracks={corpus.ids[i]: corpus.f0_tracks[corpus.ids[i]]
                   for i in chosen if corpus.ids[i] in corpus.f0_tracks},
    )


def split_corpus(corpus: Corpus, val_clips: int):
    """Deterministic split: the last `val_clips` manifest entries validate."""
    if val_clips >= len(corpus):
        raise ConfigError(
            f"val_clips={val_clips} leaves no training data "
            f"(corpus has {len(corpus)} clips)"
        )
    cut = len(corpus) - val_clips
    train = Corpus(ids=corpus.ids[:cut], waves=corpus.waves[:cut],
                   sample_rate=corpus.sample_rate,
                   f0_tracks={k: v for k, v in corpus.f0_tracks.items()
                              if k in corpus.ids[:cut]})
    val = Corpus(ids=corpus.ids[cut:], waves=corpus.waves[cut:],
                 sample_rate=corpus.sample_rate,
                 f0_tracks={k: v for k, v in corpus.f0_tracks.items()
                            if k in corpus.ids[cut:]})
    return train, val


def sample_segment(clip: Waveform, length: int, rng, hop_length: int) -> Waveform:
    """Random fixed-length crop at a hop-aligned offset.

    Clips shorter than `length` come back zero-padded at the tail.
    """
    n = len(clip)
    if n <= length:
        out = np.zeros(length)
        out[:n] = clip.samples
        return Waveform(samples=out, sample_rate=clip.sample_rate)
    n_offsets = (n - length) // hop_length + 1
    start = int(rng.integers(n_offsets)) * hop_length
    return Waveform(samples=clip.samples[start:start + length].copy(),
                    sample_rate=clip.sample_rate)


def _syllable_envelope(rng, n, sample_rate):
    """Random train of raised-cosine bumps with silent gaps between them."""
    env = np.zeros(n)
    t = 0
    while t < n:
        gap = int(rng.uniform(0.02, 0.12) * sample_rate)
        width = int(rng.uniform(0.12, 0.30) * sample_rate)
        height = rng.uniform(0.5, 1.0)
        start = t + gap
        if start >= n:
            break
        stop = min(n, start + width)
        k = stop - start
        env[start:stop] = np.maximum(
            env[start:stop],
            height * 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(k) / max(1, width))),
        )
        t = start + width
    return env


def make_clip(seed_pair, sample_rate, duration):
    """One synthetic voiced clip plus its per-frame [f0, voiced] track."""
    rng = np.random.default_rng(seed_pair)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate

    f0_base = rng.uniform(80.0, 300.0)
    vib_rate = rng.uniform(4.0, 7.0)
    vib_phase = rng.uniform(0.0, 2.0 * np.pi)
    f0 = f0_base * (1.0 + 0.03 * np.sin(2.0 * np.pi * vib_rate * t + vib_phase))

    phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate
    n_harm = int(rng.integers(3, 7))
    decay = rng.uniform(0.45, 0.65)
    sig = np.zeros(n)
    for k in range(n_harm):
        amp = decay ** k
        sig += amp * np.sin((k + 1) * phase + rng.uniform(0.0, 2.0 * np.pi))

    env = _syllable_envelope(rng, n, sample_rate)
    sig *= env

    # Band-limited noise floor 20 dB below the signal RMS.
    noise = rng.normal(size=n)
    noise = np.convolve(noise, np.ones(8) / 8.0, mode="same")
    sig_rms = np.sqrt(np.mean(sig ** 2)) or 1.0
    noise_rms = np.sqrt(np.mean(noise ** 2)) or 1.0
    sig = sig + noise * (0.1 * sig_rms / noise_rms)

    peak = np.max(np.abs(sig))
    if peak > 0.99:
        sig *= 0.99 / peak

    frames = max(1, 1 + (n - F0_FRAME) // F0_HOP) if n >= F0_FRAME else 1
    track = np.zeros((frames, 2))
    for j in range(frames):
        lo = j * F0_HOP
        hi = min(n, lo + F0_FRAME)
        track[j, 0] = f0[lo:hi].mean()
        track[j, 1] = 1.0 if env[lo:hi].mean() > 0.1 else 0.0
    return Waveform(samples=sig, sample_rate=sample_rate), track


def make_synthetic_corpus(n_clips, seed, sample_rate=22050, duration=3.0) -> Corpus:
    """Deterministic toy corpus; clip i depends only on (seed, i)."""
    if n_clips < 1:
        raise ConfigError("n_clips must be >= 1")
    ids, waves, tracks = [], [], {}
    for i in range(n_clips):
        cid = f"clip{i:04d}"
        w, track = make_clip([seed, i], sample_rate, duration)
        ids.append(cid)
        waves.append(w)
        tracks[cid] = track
    return Corpus(ids=tuple(ids), waves=tuple(waves), sample_rate=sample_rate,
                  f0_tracks=tracks)
