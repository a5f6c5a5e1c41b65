"""Command-line interface.

Subcommands: gen-data, train, synth, eval, preview-aug. Every RunConfig key
is exposed as a --flag on the commands that consume a config; values layer
as defaults < preset < config file < command line. The config file path can
also come from the AUGVOC_CONFIG environment variable.

Exit codes: 0 success, 2 usage or configuration error, 3 training
divergence, 4 I/O error.
"""

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import ConfigError, DivergenceError, InvalidInputError
from .augment import AUG_KINDS, mixup, rate_change
from .checkpoint import load_checkpoint
from .config import (
    CONFIG_ENV_VAR,
    PRESETS,
    RunConfig,
    config_from_dict,
    default_config_path,
    load_config,
    save_config,
)
from .data import load_corpus, make_synthetic_corpus, read_wav, write_corpus, write_wav
from .dsp import MelSpectrogram, Waveform, log_mel
from .models import Generator
from .training import run_training

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_IO = 4


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _add_config_flags(parser):
    """One --flag per RunConfig key, with the stock default in the help."""
    parser.add_argument(
        "--config", metavar="PATH",
        help=f"flat key=value config file (default: ${CONFIG_ENV_VAR})",
    )
    parser.add_argument(
        "--preset", choices=sorted(PRESETS),
        help="configuration preset applied under the config file and flags",
    )
    for f in dataclasses.fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        default = f.default
        shown = "none" if default is None else (
            ",".join(map(str, default)) if isinstance(default, tuple) else default
        )
        parser.add_argument(
            flag, dest=f"cfg_{f.name}", metavar="V",
            help=f"config key {f.name} (default: {shown})",
        )


def _resolve_config(args) -> RunConfig:
    overrides = {}
    for f in dataclasses.fields(RunConfig):
        raw = getattr(args, f"cfg_{f.name}", None)
        if raw is not None:
            overrides[f.name] = raw
    path = args.config or default_config_path()
    if path:
        return load_config(path, overrides=overrides, preset=args.preset)
    return config_from_dict(overrides, preset=args.preset)


def cmd_gen_data(args):
    corpus = make_synthetic_corpus(
        n_clips=args.clips, seed=args.seed,
        sample_rate=args.sample_rate, duration=args.duration,
    )
    write_corpus(corpus, args.out)
    print(
        f"wrote {len(corpus)} clips ({corpus.duration:.1f} s total) "
        f"to {args.out} (seed {args.seed})"
    )
    return EXIT_OK


def cmd_train(args):
    cfg = _resolve_config(args)
    print(
        f"training: mode={cfg.mode} augmentation={cfg.augmentation} "
        f"strategy={cfg.strategy} seed={cfg.seed} "
        f"iterations={cfg.max_iterations} batch={cfg.batch_size}"
    )
    every = max(1, cfg.max_iterations // 20) if cfg.max_iterations else 1

    def progress(step, _batch, breakdown, _state):
        if step == 1 or step % every == 0 or step == cfg.max_iterations:
            print(
                f"step {step}: total_g={breakdown.total_g:.4f} "
                f"total_d={breakdown.total_d:.4f} mel={breakdown.mel:.4f}"
            )

    summary = run_training(cfg, resume_from=args.resume, callback=progress)
    os.makedirs(cfg.out_dir, exist_ok=True)
    save_config(cfg, os.path.join(cfg.out_dir, "config.resolved"))
    best = summary["best_val"]
    best_text = f"step {best[0]} (val mel-L1 {best[1]:.4f})" if best else "n/a"
    print(
        f"done: {summary['final_step']} steps over {summary['train_clips']} "
        f"training clips; best validation {best_text}; "
        f"final checkpoint {summary['final_checkpoint']}"
    )
    return EXIT_OK


def cmd_synth(args):
    header, groups = load_checkpoint(args.checkpoint)
    cfg = config_from_dict(header["config"])
    mel_cfg = cfg.mel_config()
    gen_cfg = cfg.generator_config()

    if args.input.endswith(".npy"):
        values = np.load(args.input)
        if values.ndim != 2 or values.shape[1] != mel_cfg.n_mels:
            raise ConfigError(
                f"mel input must be (frames, {mel_cfg.n_mels}), got {values.shape}"
            )
        mel = MelSpectrogram(values=values, config=mel_cfg)
    else:
        wave_in = read_wav(args.input)
        if wave_in.sample_rate != mel_cfg.sample_rate:
            raise ConfigError(
                f"input rate {wave_in.sample_rate} != model rate "
                f"{mel_cfg.sample_rate}"
            )
        mel = log_mel(wave_in, mel_cfg)

    audio, _ = Generator(gen_cfg).forward(
        groups["gen"], mel.values.T[None, :, :],
    )
    out = Waveform(samples=audio[0, 0], sample_rate=mel_cfg.sample_rate)
    write_wav(args.output, out)
    print(
        f"synthesized {len(out)} samples ({out.duration:.2f} s) "
        f"from {mel.n_frames} frames to {args.output}"
    )
    return EXIT_OK


def cmd_eval(args):
    from .evaluation import evaluate

    report = evaluate(args.checkpoint, args.data, out_path=args.output)
    s = report["summary"]
    print(
        f"evaluated {s['clips']} clips ({s['failures']} failures): "
        f"mel_l1={s['mean_mel_l1']} periodicity_rmse={s['mean_periodicity_rmse']} "
        f"voiced_f1={s['mean_voiced_f1']} mel_frechet={s['mel_frechet']}"
    )
    if args.output:
        print(f"report written to {args.output}")
    return EXIT_OK


def cmd_preview_aug(args):
    corpus = load_corpus(args.data)
    if args.clip_ids:
        wanted = args.clip_ids.split(",")
        missing = [c for c in wanted if c not in corpus.ids]
        if missing:
            raise InvalidInputError(f"unknown clip ids: {', '.join(missing)}")
    else:
        wanted = list(corpus.ids[:4])
    os.makedirs(args.out, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    by_id = dict(corpus.clips)

    for i, cid in enumerate(wanted):
        wave = by_id[cid]
        if args.augmentation == "mixup":
            partner_id = wanted[(i + 1) % len(wanted)]
            partner = by_id[partner_id]
            n = min(len(wave), len(partner))
            m = args.m if args.m is not None else float(rng.uniform(0.0, 1.0))
            out, state = mixup(
                Waveform(samples=wave.samples[:n], sample_rate=wave.sample_rate),
                Waveform(samples=partner.samples[:n], sample_rate=wave.sample_rate),
                m,
            )
            meta = {"kind": "mixup", "m": m, "partner": partner_id,
                    "mu": [float(v) for v in state.mu]}
        else:
            s = args.s if args.s is not None else float(rng.uniform(-1.0, 1.0))
            out, state = rate_change(wave, s)
            meta = {"kind": "rate", "s": s, "mu": [float(v) for v in state.mu]}
        write_wav(os.path.join(args.out, f"{cid}_aug.wav"), out)
        with open(os.path.join(args.out, f"{cid}_aug.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(meta, fh, sort_keys=True)
            fh.write("\n")
        print(f"{cid}: mu={meta['mu']}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="augvoc",
        description="Desk-scale GAN vocoder training with "
                    "augmentation-state conditioning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic toy corpus")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--clips", type=_positive_int, default=64,
                   help="number of clips (default: 64)")
    p.add_argument("--seed", type=int, default=0, help="corpus seed (default: 0)")
    p.add_argument("--sample-rate", type=_positive_int, default=22050,
                   help="sample rate in Hz (default: 22050)")
    p.add_argument("--duration", type=float, default=3.0,
                   help="clip duration in seconds (default: 3.0)")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="run training per the active config")
    _add_config_flags(p)
    p.add_argument("--resume", metavar="CKPT",
                   help="continue from a checkpoint file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synth", help="synthesize audio from a mel or a wav")
    p.add_argument("--checkpoint", required=True, help="trained checkpoint")
    p.add_argument("--input", required=True,
                   help=".wav (copy synthesis) or .npy mel of shape (frames, n_mels)")
    p.add_argument("--output", required=True, help="output .wav path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="objective metrics for a checkpoint")
    p.add_argument("--checkpoint", required=True, help="trained checkpoint")
    p.add_argument("--data", required=True, help="corpus directory to evaluate on")
    p.add_argument("--output", help="write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("preview-aug", help="write augmented clips for auditioning")
    p.add_argument("--data", required=True, help="corpus directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--augmentation", choices=[k for k in AUG_KINDS if k != "none"],
                   required=True)
    p.add_argument("--clip-ids", help="comma-separated ids (default: first 4)")
    p.add_argument("--m", type=float, help="fixed mixup mixture rate")
    p.add_argument("--s", type=float, help="fixed rate-change exponent")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for sampled parameters (default: 0)")
    p.set_defaults(func=cmd_preview_aug)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except InvalidInputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
