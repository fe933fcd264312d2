"""Command-line entry points: train, infer, eval, ablate, gen-synth.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. Every successful run writes a manifest.json next to its outputs
with the resolved configuration, seed, and package version. On failure the
files created by the run are removed, so output directories never hold
partial results.

RGBDSOD_DETERMINISTIC=0 disables the single-thread determinism setup that
is otherwise applied before any tensor work.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np
import torch
from PIL import Image

from . import __version__
from .config import make_configs, load_config_file
from .dataset import IMAGE_EXTENSIONS, SaliencyDataset, load_input_pair
from .errors import ConfigError, DataError, RgbdSodError
from .metrics import evaluate_pairs, normalize_saliency
from .network import build_variant, parameter_count
from .synth import generate_dataset
from .trainer import (
    evaluate_model,
    load_model,
    predict_sample,
    run_ablation,
    train,
    write_loss_log,
)

METRIC_COLUMNS = ("s_alpha", "f_beta_max", "e_phi_max", "mae")


class _OutputTracker:
    """Remembers everything a run creates so failures can be rolled back."""

    def __init__(self):
        self.files = []
        self.dirs = []

    def ensure_dir(self, path):
        if path and not os.path.isdir(path):
            os.makedirs(path)
            self.dirs.append(path)
        return path

    def register(self, path):
        self.files.append(path)
        return path

    def cleanup(self):
        for path in self.files:
            try:
                if os.path.isfile(path):
                    os.remove(path)
            except OSError:
                pass
        for path in reversed(self.dirs):
            try:
                os.rmdir(path)
            except OSError:
                pass


def _setup_determinism():
    if os.environ.get("RGBDSOD_DETERMINISTIC", "1").lower() not in ("0", "false", "off"):
        torch.set_num_threads(1)


def _write_manifest(tracker, out_dir, command, payload):
    manifest = {
        "command": command,
        "version": __version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    manifest.update(payload)
    path = os.path.join(out_dir, "manifest.json")
    with open(tracker.register(path), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
    return path


def _parse_overrides(pairs):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        out[key.strip()] = value.strip()
    return out


def _configs_from_args(args):
    raw = load_config_file(args.config) if getattr(args, "config", None) else {}
    raw.update(_parse_overrides(getattr(args, "set", None)))
    for key in ("epochs", "lr", "seed", "batch_size"):
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = str(value)
    if getattr(args, "image_size", None) is not None:
        raw["input_size"] = str(args.image_size)
    return make_configs(raw, variant=getattr(args, "variant", None))


def _split_roots(data_root):
    """A dataset root may hold train/ and val/ splits or be a flat dataset."""
    train_root = os.path.join(data_root, "train")
    if os.path.isdir(train_root):
        val_root = os.path.join(data_root, "val")
        return train_root, val_root if os.path.isdir(val_root) else None
    return data_root, None


def _save_map(tracker, path, arr01):
    img = np.clip(np.rint(np.asarray(arr01) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(img, mode="L").save(tracker.register(path))


def _scan_ids(directory):
    ids = sorted(
        os.path.splitext(name)[0]
        for name in os.listdir(directory)
        if name.lower().endswith(IMAGE_EXTENSIONS)
    )
    if not ids:
        raise DataError(f"no images found under {directory}")
    return ids


def _find_image(directory, sample_id):
    for ext in IMAGE_EXTENSIONS:
        candidate = os.path.join(directory, sample_id + ext)
        if os.path.isfile(candidate):
            return candidate
    raise DataError(f"no image for id {sample_id!r} under {directory}")


def _load_gray(path):
    return np.asarray(Image.open(path).convert("L"), dtype=np.float64)


def _cmd_gen_synth(args, tracker):
    if args.size < 32 or args.size % 32 != 0:
        raise ConfigError(f"--size must be >= 32 and divisible by 32, got {args.size}")
    tracker.ensure_dir(args.out)
    summary = generate_dataset(
        args.out, num_train=args.train, num_val=args.val, size=args.size, seed=args.seed
    )
    _write_manifest(tracker, args.out, "gen-synth", {"seed": args.seed, **summary})
    print(
        f"wrote {summary['train']} train / {summary['val']} val samples "
        f"({args.size}x{args.size}) under {args.out}"
    )
    return 0


def _cmd_train(args, tracker):
    vcfg, tcfg = _configs_from_args(args)
    train_root, _ = _split_roots(args.data)
    dataset = SaliencyDataset(train_root, target_size=vcfg.input_size)
    model = build_variant(vcfg, init_seed=tcfg.seed)
    out_dir = tracker.ensure_dir(args.out)

    result = train(model, dataset, tcfg, out_dir=out_dir)
    tracker.register(result.best_path)
    tracker.register(result.last_path)
    loss_csv = os.path.join(out_dir, "loss_log.csv")
    write_loss_log(tracker.register(loss_csv), result.history)
    _write_manifest(
        tracker,
        out_dir,
        "train",
        {
            "data": args.data,
            "seed": tcfg.seed,
            "variant_config": dataclasses.asdict(vcfg),
            "train_config": dataclasses.asdict(tcfg),
            "parameters": parameter_count(model),
            "best_epoch": result.best_epoch,
            "best_loss": result.best_loss,
            "final_loss": result.final_loss,
            "outputs": [result.best_path, result.last_path, loss_csv],
        },
    )
    print(
        f"trained {tcfg.epochs} epochs on {len(dataset)} samples; "
        f"best epoch-mean loss {result.best_loss:.4f} (epoch {result.best_epoch}); "
        f"checkpoints in {out_dir}"
    )
    return 0


def _cmd_infer(args, tracker):
    model, _ = load_model(args.checkpoint)
    size = model.config.input_size
    out_dir = tracker.ensure_dir(args.out)

    if args.rgb or args.depth:
        if not (args.rgb and args.depth):
            raise ConfigError("--rgb and --depth must be given together")
        jobs = [(os.path.splitext(os.path.basename(args.rgb))[0], args.rgb, args.depth)]
    else:
        if not args.data:
            raise ConfigError("provide --data or both --rgb and --depth")
        rgb_dir = os.path.join(args.data, "rgb")
        depth_dir = os.path.join(args.data, "depth")
        for d in (rgb_dir, depth_dir):
            if not os.path.isdir(d):
                raise DataError(f"missing input directory: {d}")
        jobs = [
            (sid, _find_image(rgb_dir, sid), _find_image(depth_dir, sid))
            for sid in _scan_ids(rgb_dir)
        ]

    written = []
    for sid, rgb_path, depth_path in jobs:
        sample, orig_hw = load_input_pair(rgb_path, depth_path, size)
        maps = predict_sample(model, sample)
        s_f = maps["s_f"]
        if args.upsample_to_input and orig_hw != s_f.shape:
            s_f = np.asarray(
                Image.fromarray(s_f.astype(np.float32), mode="F").resize(
                    (orig_hw[1], orig_hw[0]), Image.BILINEAR
                )
            )
        path = os.path.join(out_dir, sid + ".png")
        _save_map(tracker, path, s_f)
        written.append(path)
        if args.emit_coarse:
            for name in ("s_c_rgb", "s_c_d"):
                if maps[name] is not None:
                    cpath = os.path.join(out_dir, f"{sid}_{name}.png")
                    _save_map(tracker, cpath, maps[name])
                    written.append(cpath)

    _write_manifest(
        tracker,
        out_dir,
        "infer",
        {
            "checkpoint": args.checkpoint,
            "input_size": size,
            "emit_coarse": bool(args.emit_coarse),
            "upsample_to_input": bool(args.upsample_to_input),
            "outputs": written,
        },
    )
    print(f"wrote {len(written)} maps to {out_dir}")
    return 0


def _cmd_eval(args, tracker):
    if not os.path.isdir(args.pred):
        raise DataError(f"missing predictions directory: {args.pred}")
    if not os.path.isdir(args.gt):
        raise DataError(f"missing ground-truth directory: {args.gt}")
    ids = _scan_ids(args.gt)
    normalize = not args.no_normalize
    pairs = []
    for sid in ids:
        pred = normalize_saliency(_load_gray(_find_image(args.pred, sid)), normalize)
        gt = (_load_gray(_find_image(args.gt, sid)) / 255.0 >= 0.5).astype(np.float64)
        pairs.append((pred, gt))

    report, rows = evaluate_pairs(pairs, ids=ids)
    out_dir = tracker.ensure_dir(args.out)

    with open(tracker.register(os.path.join(out_dir, "metrics.json")), "w",
              encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
    with open(tracker.register(os.path.join(out_dir, "per_sample.csv")), "w",
              encoding="utf-8") as fh:
        fh.write("id,s_alpha,f_beta_max,e_phi_max,mae\n")
        for row in rows:
            fh.write(
                f"{row['id']},{row['s_alpha']:.9f},{row['f_beta_max']:.9f},"
                f"{row['e_phi_max']:.9f},{row['mae']:.9f}\n"
            )
    with open(tracker.register(os.path.join(out_dir, "curves.csv")), "w",
              encoding="utf-8") as fh:
        fh.write("threshold,f_measure,e_measure\n")
        for t in range(256):
            fh.write(f"{t},{report.f_curve[t]:.9f},{report.e_curve[t]:.9f}\n")

    _write_manifest(
        tracker,
        out_dir,
        "eval",
        {
            "pred": args.pred,
            "gt": args.gt,
            "normalize": normalize,
            "report": report.as_dict(),
        },
    )
    print(
        f"s_alpha={report.s_alpha:.4f} f_beta_max={report.f_beta_max:.4f} "
        f"e_phi_max={report.e_phi_max:.4f} mae={report.mae:.4f} "
        f"({report.n_samples} samples, {report.n_excluded_f} excluded from F)"
    )
    return 0


def _cmd_ablate(args, tracker):
    vcfg, tcfg = _configs_from_args(args)
    overrides = _parse_overrides(args.set)
    for key in ("fusion", "modalities", "learning"):
        if key in overrides:
            raise ConfigError(
                f"--set {key}=... would override what the variants are comparing"
            )
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]

    train_root, val_root = _split_roots(args.data)
    train_ds = SaliencyDataset(train_root, target_size=vcfg.input_size)
    eval_ds = (
        SaliencyDataset(val_root, target_size=vcfg.input_size) if val_root else None
    )

    # Field overrides (k, input_size, ...) forward to every variant equally.
    structural = {
        k: getattr(vcfg, k)
        for k in ("k", "input_size", "coarse_loss_weight", "backbone_channels",
                  "dilation", "cp_activation", "fa_post_activation", "channel_mean")
    }
    rows = run_ablation(
        train_ds, tcfg, eval_dataset=eval_ds, variants=variants, overrides=structural
    )

    out_dir = tracker.ensure_dir(args.out)
    columns = ["variant", "fusion", "modalities", "learning", "params",
               "final_loss", *METRIC_COLUMNS]
    with open(tracker.register(os.path.join(out_dir, "ablation.csv")), "w",
              encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(row[c]) for c in columns) + "\n")

    _write_manifest(
        tracker,
        out_dir,
        "ablate",
        {
            "data": args.data,
            "seed": tcfg.seed,
            "eval_split": "val" if eval_ds else "train",
            "train_config": dataclasses.asdict(tcfg),
            "variants": variants,
            "rows": rows,
        },
    )
    _print_table(rows, columns)
    return 0


def _fmt_cell(value):
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _print_table(rows, columns):
    table = [columns] + [[_fmt_cell(r[c]) for c in columns] for r in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(columns))]
    for line in table:
        print("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="rgbdsod",
        description="RGB-D salient object detection: train, infer, eval, ablate.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic RGB-D mini-dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--train", type=int, default=12)
    p.add_argument("--val", type=int, default=6)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("train", help="train one variant on a dataset")
    p.add_argument("--data", required=True, help="dataset root (flat or train/+val/)")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--variant", help="preset name (A, C, D, E, F or an alias)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--image-size", dest="image_size", type=int)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="run a checkpoint over images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="directory with rgb/ and depth/")
    p.add_argument("--rgb", help="single RGB image (with --depth)")
    p.add_argument("--depth", help="single depth map (with --rgb)")
    p.add_argument("--out", required=True)
    p.add_argument("--emit-coarse", action="store_true",
                   help="also write the two low-resolution guidance maps")
    p.add_argument("--upsample-to-input", action="store_true",
                   help="resize final maps back to the original image size")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-normalize", action="store_true",
                   help="treat predictions as raw 8-bit instead of min-max rescaling")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="train and compare architecture variants")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variants", default="A,C,D,E,F")
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--image-size", dest="image_size", type=int)
    p.set_defaults(func=_cmd_ablate)
    return parser


def run(argv) -> int:
    _setup_determinism()
    parser = _build_parser()
    args = parser.parse_args(argv)
    tracker = _OutputTracker()
    try:
        return args.func(args, tracker)
    except RgbdSodError as exc:
        tracker.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def main(argv=None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
