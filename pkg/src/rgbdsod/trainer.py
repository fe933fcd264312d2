"""SGD training loop, variant evaluation, inference, and the ablation runner."""

from __future__ import annotations

import csv
import dataclasses
import os
from dataclasses import dataclass

import numpy as np
import torch

from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, VariantConfig, validate_train, variant_preset
from .dataset import Preprocess, RgbdSample, mirror_augment, prepare_pair
from .errors import DataError, NumericalError
from .loss import total_loss
from .metrics import evaluate_pairs
from .network import SaliencyNet, build_variant, parameter_count

__all__ = [
    "TrainResult",
    "build_variant",
    "train",
    "predict_sample",
    "infer",
    "load_model",
    "evaluate_model",
    "run_ablation",
    "write_loss_log",
]


def _materialize(dataset):
    samples = [dataset[i] for i in range(len(dataset))]
    if not samples:
        raise DataError("training dataset is empty")
    return samples


def _to_tensors(sample: RgbdSample, preprocess: Preprocess):
    pair = torch.from_numpy(prepare_pair(sample, preprocess))
    gt = torch.from_numpy(np.ascontiguousarray(sample.gt, dtype=np.float32))
    return pair, gt[None]  # gt as (1, H, W)


def _training_set(samples, cfg: VariantConfig, mirror: bool):
    pre = Preprocess(tuple(cfg.channel_mean))
    size = cfg.input_size
    for s in samples:
        if s.gt.shape != (size, size):
            raise DataError(
                f"sample {s.id!r} is {s.gt.shape}, model expects {size}x{size}"
            )
    tensors = [_to_tensors(s, pre) for s in samples]
    if mirror:
        tensors += [_to_tensors(mirror_augment(s), pre) for s in samples]
    return tensors


def _batch(tensors, indices):
    rgb = torch.stack([tensors[i][0][0] for i in indices])
    depth = torch.stack([tensors[i][0][1] for i in indices])
    gt = torch.stack([tensors[i][1] for i in indices])
    return torch.cat([rgb, depth], dim=0), gt


@dataclass
class TrainResult:
    history: list
    best_epoch: int
    best_loss: float
    final_loss: float
    best_path: str = None
    last_path: str = None


def train(model: SaliencyNet, dataset, tcfg: TrainConfig, out_dir=None) -> TrainResult:
    """Momentum-SGD over the (optionally mirror-doubled) dataset.

    Fully deterministic for a fixed seed: initialization comes from the
    model's own seeded generator, shuffling from a dedicated numpy stream,
    and every tensor op runs single-device. Keeps best-by-training-loss and
    last checkpoints when out_dir is given.
    """
    validate_train(tcfg)
    torch.manual_seed(tcfg.seed)
    samples = _materialize(dataset)
    tensors = _training_set(samples, model.config, tcfg.mirror_augment)
    lam = model.config.coarse_loss_weight

    optimizer = torch.optim.SGD(
        model.parameters(),
        lr=tcfg.lr,
        momentum=tcfg.momentum,
        weight_decay=tcfg.weight_decay,
    )
    rng = np.random.default_rng(tcfg.seed)
    n = len(tensors)
    history = []
    best_loss = float("inf")
    best_epoch = -1
    best_path = last_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        best_path = os.path.join(out_dir, "best.ckpt")
        last_path = os.path.join(out_dir, "last.ckpt")

    model.train()
    epoch_mean = float("nan")
    for epoch in range(tcfg.epochs):
        order = rng.permutation(n)
        epoch_total = 0.0
        for step_idx, start in enumerate(range(0, n, tcfg.batch_size)):
            batch_ids = order[start : start + tcfg.batch_size]
            stacked, gt = _batch(tensors, batch_ids)
            out = model(stacked)
            report = total_loss(
                torch.sigmoid(out["final"]),
                None if out["coarse_rgb"] is None else torch.sigmoid(out["coarse_rgb"]),
                None if out["coarse_d"] is None else torch.sigmoid(out["coarse_d"]),
                gt,
                lam=lam,
            )
            value = float(report.l_total.detach())
            if not np.isfinite(value):
                raise NumericalError(
                    f"training diverged: non-finite loss at epoch {epoch} "
                    f"step {step_idx}"
                )
            optimizer.zero_grad()
            report.l_total.backward()
            optimizer.step()
            epoch_total += value
            history.append(
                {
                    "epoch": epoch,
                    "step": step_idx,
                    "l_f": float(report.l_f.detach()),
                    "l_g_rgb": float(report.l_g_rgb.detach()),
                    "l_g_d": float(report.l_g_d.detach()),
                    "l_total": value,
                }
            )
        epoch_mean = epoch_total / max(1, -(-n // tcfg.batch_size))
        if epoch_mean < best_loss:
            best_loss = epoch_mean
            best_epoch = epoch
            if best_path:
                _save(best_path, model, tcfg, epoch, epoch_mean)
        if last_path:
            _save(last_path, model, tcfg, epoch, epoch_mean)

    return TrainResult(
        history=history,
        best_epoch=best_epoch,
        best_loss=best_loss,
        final_loss=epoch_mean,
        best_path=best_path,
        last_path=last_path,
    )


def _save(path, model, tcfg, epoch, epoch_loss):
    save_checkpoint(
        path,
        model.state_dict(),
        model.config,
        train=dataclasses.asdict(tcfg),
        meta={"epoch": epoch, "epoch_mean_loss": epoch_loss},
    )


def write_loss_log(path, history) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["epoch", "step", "l_f", "l_g_rgb", "l_g_d", "l_total"]
        )
        writer.writeheader()
        writer.writerows(history)


def load_model(checkpoint_path):
    """Rebuild the recorded variant and load its weights, or refuse loudly."""
    variant, state, header = load_checkpoint(checkpoint_path)
    model = build_variant(variant)
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as exc:
        raise DataError(
            f"checkpoint {checkpoint_path} does not match its recorded "
            f"architecture: {exc}"
        ) from exc
    model.eval()
    return model, header


def predict_sample(model: SaliencyNet, sample: RgbdSample):
    """Squashed maps for one sample: final (H,W) plus optional coarse maps."""
    pre = Preprocess(tuple(model.config.channel_mean))
    pair, _ = _to_tensors(sample, pre)
    model.eval()
    with torch.no_grad():
        out = model(pair)
        maps = {"s_f": torch.sigmoid(out["final"])[0, 0].numpy()}
        for key, name in (("coarse_rgb", "s_c_rgb"), ("coarse_d", "s_c_d")):
            maps[name] = (
                None
                if out[key] is None
                else torch.sigmoid(out[key])[0, 0].numpy()
            )
    return maps


def infer(checkpoint_path, sample: RgbdSample):
    model, _ = load_model(checkpoint_path)
    return predict_sample(model, sample)


def evaluate_model(model: SaliencyNet, dataset):
    samples = _materialize(dataset)
    preds = [(predict_sample(model, s)["s_f"], s.gt) for s in samples]
    return evaluate_pairs(preds, ids=[s.id for s in samples])


def run_ablation(train_dataset, tcfg: TrainConfig, eval_dataset=None, variants=None,
                 input_size=None, overrides=None):
    """Train and evaluate each requested variant; one result row per variant.

    All variants share the seed, data, and training budget so the comparison
    isolates architecture. Evaluation runs on eval_dataset when given (held
    out), otherwise on the training set.
    """
    names = list(variants) if variants else ["A", "C", "D", "E", "F"]
    train_samples = _materialize(train_dataset)
    eval_samples = _materialize(eval_dataset) if eval_dataset is not None else None
    rows = []
    for name in names:
        cfg = variant_preset(name)
        changes = dict(overrides or {})
        if input_size is not None:
            changes["input_size"] = input_size
        if changes:
            cfg = dataclasses.replace(cfg, **changes)
        model = build_variant(cfg, init_seed=tcfg.seed)
        result = train(model, train_samples, tcfg)
        report, _ = evaluate_model(model, eval_samples or train_samples)
        rows.append(
            {
                "variant": name,
                "fusion": cfg.fusion,
                "modalities": cfg.modalities,
                "learning": cfg.learning,
                "params": parameter_count(model),
                "final_loss": result.final_loss,
                "s_alpha": report.s_alpha,
                "f_beta_max": report.f_beta_max,
                "e_phi_max": report.e_phi_max,
                "mae": report.mae,
            }
        )
    return rows
