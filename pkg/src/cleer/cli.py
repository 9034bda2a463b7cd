"""Command-line entry point tying the modules into reproducible runs.

Every command records a manifest (full config, seed, input/output hashes,
duration) so a run can be replayed exactly. Config precedence is
CLI flag > --config JSON file > built-in default. Exit codes: 0 success,
2 usage error, 3 data-format error, 4 numeric-contract failure.

Example session:

    cleer gen-data --n-per-class 200 --t 128 --c 8 --channels 2,5 \
        --snr-db 0 --seed 7 --out data.segd
    cleer train --data data.segd --out-dir runs/joint --mode joint \
        --hidden-dim 32 --repr-dim 64 --n-blocks 3 --epochs 30 --seed 7
    cleer ablate --data data.segd --out channels.csv --seed 7
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .ablation import export_representations, per_channel_eval
from .data import (SegmentSet, load_segments, make_synthetic_dataset,
                   save_segments)
from .diagnostics import gradcheck_battery
from .errors import (CleerError, ConfigError, ContractError, DataFormatError,
                     EmptyInputError, ShapeError, StratificationError)
from .model import ClassifierConfig, EncoderConfig, load_checkpoint
from .preprocess import FilterSpec, average_reference, bandpass, notch
from .trainer import MODES, TrainConfig, compare_modes, run_skcv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA_FORMAT = 3
EXIT_NUMERIC = 4

SEED_ENV_VAR = "CLEER_SEED"


def _default_seed():
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV_VAR}={raw!r} is not an integer")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(command, config, seed, inputs, outputs, started, where):
    manifest = {
        "command": command,
        "version": __version__,
        "config": config,
        "seed": seed,
        "inputs": {p: _sha256(p) for p in inputs if os.path.exists(p)},
        "outputs": {p: _sha256(p) for p in outputs if os.path.isfile(p)},
        "duration_seconds": time.time() - started,
    }
    with open(where, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return where


def _parse_int_list(text):
    try:
        return [int(part) for part in str(text).split(",") if part != ""]
    except ValueError:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}")


def _load_config_file(path):
    if path is None:
        return {}
    try:
        with open(path) as f:
            loaded = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(loaded, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return loaded


def _merge(args, file_cfg, name, default):
    """CLI flag > config file > default."""
    flag = getattr(args, name, None)
    if flag is not None:
        return flag
    if name in file_cfg:
        return file_cfg[name]
    return default


# -- command implementations ----------------------------------------------------

def cmd_gen_data(args):
    started = time.time()
    seed = args.seed if args.seed is not None else _default_seed()
    channels = _parse_int_list(args.channels)
    segments = make_synthetic_dataset(
        n_per_class=args.n_per_class, T=args.t, C=args.c,
        informative_channels=channels, snr_db=args.snr_db, seed=seed)
    save_segments(segments, args.out)
    config = {"n_per_class": args.n_per_class, "t": args.t, "c": args.c,
              "channels": channels, "snr_db": args.snr_db}
    _write_manifest("gen-data", config, seed, [], [args.out], started,
                    args.out + ".manifest.json")
    print(f"wrote {segments.n} segments ({segments.t}x{segments.c}) to {args.out}")
    return EXIT_OK


def _train_configs(args):
    file_cfg = _load_config_file(args.config)
    seed = _merge(args, file_cfg, "seed", None)
    if seed is None:
        seed = _default_seed()
    train_cfg = TrainConfig(
        epochs=_merge(args, file_cfg, "epochs", 50),
        lr=_merge(args, file_cfg, "lr", 0.001),
        batch_size=_merge(args, file_cfg, "batch_size", 32),
        k_folds=_merge(args, file_cfg, "k_folds", 5),
        lambda_class=_merge(args, file_cfg, "lambda_class", 1.0),
        mask_p=_merge(args, file_cfg, "mask_p", 0.5),
        seed=seed,
        mode=_merge(args, file_cfg, "mode", "joint"),
        symmetrize=bool(_merge(args, file_cfg, "symmetrize", False)),
        contiguous_folds=bool(_merge(args, file_cfg, "contiguous_folds", False)),
        jobs=_merge(args, file_cfg, "jobs", 1),
    )
    model_cfg = {
        "hidden_dim": _merge(args, file_cfg, "hidden_dim", 128),
        "repr_dim": _merge(args, file_cfg, "repr_dim", 900),
        "n_blocks": _merge(args, file_cfg, "n_blocks", 5),
        "kernel_size": _merge(args, file_cfg, "kernel_size", 3),
        "conv_channels": _merge(args, file_cfg, "conv_channels", 256),
        "fc_dims": _parse_int_list(_merge(args, file_cfg, "fc_dims", "64")),
    }
    return train_cfg, model_cfg


def _model_configs(model_cfg, n_channels):
    enc = EncoderConfig(
        in_channels=n_channels, hidden_dim=model_cfg["hidden_dim"],
        repr_dim=model_cfg["repr_dim"], n_blocks=model_cfg["n_blocks"],
        kernel_size=model_cfg["kernel_size"])
    clf = ClassifierConfig(
        in_dim=model_cfg["repr_dim"], conv_channels=model_cfg["conv_channels"],
        fc_dims=tuple(model_cfg["fc_dims"]))
    return enc, clf


def cmd_train(args):
    started = time.time()
    train_cfg, model_cfg = _train_configs(args)
    dataset = load_segments(args.data)
    enc, clf = _model_configs(model_cfg, dataset.c)
    os.makedirs(args.out_dir, exist_ok=True)
    if args.compare:
        results = compare_modes(dataset, train_cfg, enc, clf, args.out_dir)
        for mode, res in results.items():
            print(f"{mode}: mean accuracy {res.mean_accuracy:.4f}")
        outputs = [os.path.join(args.out_dir, "mode_comparison.csv")]
    else:
        result = run_skcv(dataset, train_cfg, enc, clf, args.out_dir)
        for rep in result.fold_reports:
            print(f"fold {rep.fold_index}: accuracy {rep.accuracy:.4f}")
        print(f"mean accuracy {result.mean_accuracy:.4f}")
        outputs = [os.path.join(args.out_dir, "metrics.csv"),
                   os.path.join(args.out_dir, "fold_reports.json")]
        outputs += [os.path.join(args.out_dir, f"fold{i}.ckpt")
                    for i in range(train_cfg.k_folds)]
    config = {"train": asdict(train_cfg), "model": model_cfg,
              "compare": bool(args.compare)}
    _write_manifest("train", config, train_cfg.seed, [args.data], outputs,
                    started, os.path.join(args.out_dir, "manifest.json"))
    return EXIT_OK


def cmd_preprocess(args):
    started = time.time()
    dataset = load_segments(args.data)
    fs = dataset.sample_rate_hz
    data = dataset.data.astype(np.float64)          # (N, T, C)
    bp_spec = FilterSpec(kind="bandpass", sample_rate_hz=fs,
                         low_hz=args.low_hz, high_hz=args.high_hz,
                         order=args.order)
    notch_spec = FilterSpec(kind="notch", sample_rate_hz=fs,
                            notch_hz=args.notch_hz, order=args.order)
    out = np.empty_like(data)
    for i in range(dataset.n):
        sig = data[i].T                             # (C, T)
        if not args.no_average_reference:
            sig = average_reference(sig)
        if not args.no_bandpass:
            sig = bandpass(sig, bp_spec)
        if not args.no_notch:
            sig = notch(sig, notch_spec)
        out[i] = sig.T
    filtered = SegmentSet(
        data=out.astype(np.float32), labels=dataset.labels,
        window_seconds=dataset.window_seconds,
        overlap_seconds=dataset.overlap_seconds,
        sample_rate_hz=fs, channel_names=list(dataset.channel_names))
    save_segments(filtered, args.out)
    config = {"low_hz": args.low_hz, "high_hz": args.high_hz,
              "notch_hz": args.notch_hz, "order": args.order,
              "average_reference": not args.no_average_reference,
              "bandpass": not args.no_bandpass, "notch": not args.no_notch}
    _write_manifest("preprocess", config, 0, [args.data], [args.out], started,
                    args.out + ".manifest.json")
    print(f"filtered {dataset.n} segments to {args.out}")
    return EXIT_OK


def cmd_ablate(args):
    started = time.time()
    seed = args.seed if args.seed is not None else _default_seed()
    dataset = load_segments(args.data)
    train_cfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, k_folds=args.k_folds,
        seed=seed, mode=args.mode, jobs=args.jobs)
    in_channels = 1 if args.method == "retrain" else dataset.c
    enc = EncoderConfig(in_channels=in_channels, hidden_dim=args.hidden_dim,
                        repr_dim=args.repr_dim, n_blocks=args.n_blocks)
    clf = ClassifierConfig(in_dim=args.repr_dim,
                           conv_channels=args.conv_channels,
                           fc_dims=tuple(_parse_int_list(args.fc_dims)))
    report = per_channel_eval(dataset, train_cfg, enc, clf, method=args.method)
    report.to_csv(args.out)
    for row in report.ranked():
        print(f"{row.channel_index:3d} {row.channel_name:6s}"
              f" {row.mean_accuracy:.4f}")
    config = {"train": asdict(train_cfg), "method": args.method,
              "hidden_dim": args.hidden_dim, "repr_dim": args.repr_dim,
              "n_blocks": args.n_blocks}
    _write_manifest("ablate", config, seed, [args.data], [args.out], started,
                    args.out + ".manifest.json")
    return EXIT_OK


def cmd_gradcheck(args):
    started = time.time()
    seed = args.seed if args.seed is not None else _default_seed()
    results = gradcheck_battery(seed=seed, eps=args.eps, tol_rel=args.tol)
    failed = [name for name, rep in results if not rep.passed]
    for name, rep in results:
        print(f"{name:22s} {rep}")
    config = {"eps": args.eps, "tol": args.tol}
    if args.report is not None:
        with open(args.report, "w") as f:
            json.dump({name: {"passed": rep.passed,
                              "max_rel_err": rep.max_rel_err}
                       for name, rep in results}, f, indent=2, sort_keys=True)
        _write_manifest("gradcheck", config, seed, [], [args.report], started,
                        args.report + ".manifest.json")
    else:
        # no artifact file; the manifest goes to stdout instead
        print("manifest " + json.dumps(
            {"command": "gradcheck", "config": config, "seed": seed,
             "duration_seconds": time.time() - started}, sort_keys=True))
    if failed:
        raise ContractError(f"gradient check failed for: {', '.join(failed)}")
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def cmd_export_reprs(args):
    started = time.time()
    dataset = load_segments(args.data)
    model = load_checkpoint(args.ckpt)
    export_representations(model, dataset, args.out)
    _write_manifest("export-reprs", {}, 0, [args.data, args.ckpt], [args.out],
                    started, args.out + ".manifest.json")
    print(f"wrote {dataset.n} representation rows to {args.out}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="cleer",
        description="Contrastive + supervised representation learning for"
                    " multichannel time series.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic SEGD dataset")
    p.add_argument("--n-per-class", type=int, default=200,
                   help="segments per class (default 200)")
    p.add_argument("--t", type=int, default=128,
                   help="timestamps per segment (default 128)")
    p.add_argument("--c", type=int, default=8,
                   help="channel count (default 8)")
    p.add_argument("--channels", default="2,5",
                   help="comma-separated informative channels (default 2,5)")
    p.add_argument("--snr-db", type=float, default=0.0,
                   help="signal-to-noise ratio in dB (default 0)")
    p.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (default ${SEED_ENV_VAR} or 0)")
    p.add_argument("--out", required=True, help="output SEGD path")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="run stratified k-fold training")
    p.add_argument("--data", required=True, help="input SEGD path")
    p.add_argument("--out-dir", required=True,
                   help="directory for metrics, reports and checkpoints")
    p.add_argument("--config", default=None,
                   help="JSON config file; flags override its values")
    p.add_argument("--epochs", type=int, default=None, help="default 50")
    p.add_argument("--lr", type=float, default=None, help="default 0.001")
    p.add_argument("--batch-size", type=int, default=None, help="default 32")
    p.add_argument("--k-folds", type=int, default=None, help="default 5")
    p.add_argument("--lambda-class", type=float, default=None,
                   help="classification loss weight (default 1.0)")
    p.add_argument("--mask-p", type=float, default=None,
                   help="timestamp masking probability (default 0.5)")
    p.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (default ${SEED_ENV_VAR} or 0)")
    p.add_argument("--mode", choices=MODES, default=None,
                   help="training objective (default joint)")
    p.add_argument("--symmetrize", action="store_const", const=True,
                   default=None, help="average both view orderings in the"
                   " contrastive losses (default off)")
    p.add_argument("--contiguous-folds", action="store_const", const=True,
                   default=None, help="block-wise fold assignment (default off)")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel fold workers (default 1)")
    p.add_argument("--hidden-dim", type=int, default=None, help="default 128")
    p.add_argument("--repr-dim", type=int, default=None, help="default 900")
    p.add_argument("--n-blocks", type=int, default=None, help="default 5")
    p.add_argument("--kernel-size", type=int, default=None, help="default 3")
    p.add_argument("--conv-channels", type=int, default=None,
                   help="classifier conv width (default 256)")
    p.add_argument("--fc-dims", default=None,
                   help="classifier FC widths, comma-separated (default 64)")
    p.add_argument("--compare", action="store_true",
                   help="run joint, two_step and classifier_only on the same"
                        " splits and emit a comparison table (default off)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("preprocess",
                       help="average-reference + bandpass + notch a SEGD file")
    p.add_argument("--data", required=True, help="input SEGD path")
    p.add_argument("--out", required=True, help="output SEGD path")
    p.add_argument("--low-hz", type=float, default=1.0, help="default 1")
    p.add_argument("--high-hz", type=float, default=49.0, help="default 49")
    p.add_argument("--notch-hz", type=float, default=60.0, help="default 60")
    p.add_argument("--order", type=int, default=4,
                   help="bandpass filter order (default 4)")
    p.add_argument("--no-average-reference", action="store_true",
                   help="skip the common average reference")
    p.add_argument("--no-bandpass", action="store_true",
                   help="skip the bandpass filter")
    p.add_argument("--no-notch", action="store_true",
                   help="skip the notch filter")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("ablate",
                       help="per-channel importance (retrains per channel;"
                            " defaults are reduced to keep C runs feasible)")
    p.add_argument("--data", required=True, help="input SEGD path")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--method", choices=("retrain", "occlusion"),
                   default="retrain", help="default retrain")
    p.add_argument("--mode", choices=MODES, default="joint",
                   help="training objective per channel (default joint)")
    p.add_argument("--epochs", type=int, default=10, help="default 10")
    p.add_argument("--batch-size", type=int, default=32, help="default 32")
    p.add_argument("--k-folds", type=int, default=5, help="default 5")
    p.add_argument("--hidden-dim", type=int, default=16, help="default 16")
    p.add_argument("--repr-dim", type=int, default=32, help="default 32")
    p.add_argument("--n-blocks", type=int, default=2, help="default 2")
    p.add_argument("--conv-channels", type=int, default=32, help="default 32")
    p.add_argument("--fc-dims", default="16", help="default 16")
    p.add_argument("--jobs", type=int, default=1, help="default 1")
    p.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (default ${SEED_ENV_VAR} or 0)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck",
                       help="finite-difference checks for every kernel and"
                            " the joint objective")
    p.add_argument("--eps", type=float, default=1e-5, help="default 1e-5")
    p.add_argument("--tol", type=float, default=1e-4, help="default 1e-4")
    p.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (default ${SEED_ENV_VAR} or 0)")
    p.add_argument("--report", default=None, help="optional JSON report path")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("export-reprs",
                       help="export pooled per-segment representations to CSV")
    p.add_argument("--data", required=True, help="input SEGD path")
    p.add_argument("--ckpt", required=True, help="model checkpoint")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_export_reprs)

    return parser


def _fail(exc, code):
    sys.stderr.write(json.dumps({
        "error": type(exc).__name__,
        "message": str(exc),
        "exit_code": code,
    }) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataFormatError as e:
        return _fail(e, EXIT_DATA_FORMAT)
    except FileNotFoundError as e:
        return _fail(e, EXIT_DATA_FORMAT)
    except ContractError as e:
        return _fail(e, EXIT_NUMERIC)
    except (ConfigError, ShapeError, EmptyInputError, StratificationError,
            IndexError) as e:
        return _fail(e, EXIT_USAGE)
    except CleerError as e:
        return _fail(e, EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
