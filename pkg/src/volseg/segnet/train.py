"""Loss, SGD training step, and the deterministic training loop.

Loss is soft-Dice plus voxelwise cross-entropy with equal weights; the
Dice term uses the foreground softmax probability per sample. Updates
are plain SGD. Per-sample patch crops, optional axis-flip augmentation,
and weight init all draw from one seeded generator, so identical seeds
give bit-identical loss curves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteLoss, GeometryMismatch
from ..volcore import LabelMask, VoxelGrid
from . import network
from .config import NetworkConfig
from .network import Weights
from .preprocess import zscore_normalize

DICE_EPS = 1e-5


@dataclass(frozen=True)
class TrainSample:
    """A normalized image volume with its label mask."""

    image: VoxelGrid
    label: LabelMask

    def __post_init__(self):
        if self.image.dims != self.label.dims:
            raise GeometryMismatch(
                f"image dims {self.image.dims} vs label dims {self.label.dims}"
            )
        if not np.isfinite(self.image.data).all():
            raise ValueError("image contains non-finite values")


def make_sample(image: VoxelGrid, label: LabelMask) -> TrainSample:
    """Normalize an image and bundle it with its label."""
    return TrainSample(image=zscore_normalize(image), label=label)


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_score_grad(scores: np.ndarray, labels: np.ndarray):
    """(loss, dL/dscores) for soft-Dice + cross-entropy, equal weights.

    scores: (B, 2, X, Y, Z); labels: (B, X, Y, Z) in {0, 1}.
    """
    b = scores.shape[0]
    nvox = labels[0].size
    p = softmax(scores)
    y = labels.astype(np.float64)

    p_fg = p[:, 1]
    eps = 1e-12
    ce = -(y * np.log(p_fg + eps) + (1 - y) * np.log(p[:, 0] + eps)).sum() / (b * nvox)

    inter = (p_fg * y).sum(axis=(1, 2, 3))
    denom = p_fg.sum(axis=(1, 2, 3)) + y.sum(axis=(1, 2, 3))
    dice = (2 * inter + DICE_EPS) / (denom + DICE_EPS)
    dice_loss = 1.0 - dice.mean()

    loss = float(ce + dice_loss)

    # cross-entropy: (p - onehot) / (B * V)
    onehot = np.stack([1 - y, y], axis=1)
    g_scores = (p - onehot) / (b * nvox)

    # dice: dL/dp_fg = -(1/B) * (2*y*(denom+eps) - (2*inter+eps)) / (denom+eps)^2
    den_e = (denom + DICE_EPS)[:, None, None, None]
    num_e = (2 * inter + DICE_EPS)[:, None, None, None]
    g_pfg = -(2 * y * den_e - num_e) / (den_e ** 2) / b
    # through the 2-class softmax: gs_k = p_k * (gp_k - sum_j gp_j p_j), gp only on fg
    dot = g_pfg * p_fg
    g_scores[:, 1] += p_fg * g_pfg - p_fg * dot
    g_scores[:, 0] += -p[:, 0] * dot
    return loss, g_scores


def sgd_update(weights: Weights, grads: Weights, lr: float) -> Weights:
    """Plain SGD: w <- w - lr * g (returns a new dict)."""
    return {k: weights[k] - lr * grads[k] for k in weights}


def _check_finite(loss: float, grads: Weights) -> None:
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss is {loss}")
    for k, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteLoss(f"non-finite gradient in block {k!r} (loss {loss})")


def loss_and_grads(images: np.ndarray, labels: np.ndarray,
                   weights: Weights, config: NetworkConfig):
    scores, cache = network.forward_with_cache(images, weights, config)
    loss, g_scores = loss_and_score_grad(scores, labels)
    grads = network.backward(g_scores, cache, config)
    return loss, grads


def train_step(samples: list[TrainSample], weights: Weights,
               config: NetworkConfig, lr: float) -> tuple[Weights, float]:
    """One SGD step on patch-sized samples; returns (new weights, loss)."""
    if not samples:
        raise ValueError("empty batch")
    images = np.stack([s.image.data for s in samples])[:, None]
    labels = np.stack([s.label.voxels for s in samples])
    loss, grads = loss_and_grads(images, labels, weights, config)
    _check_finite(loss, grads)
    return sgd_update(weights, grads, lr), loss


def _crop_or_pad(arr: np.ndarray, patch: tuple[int, int, int],
                 corner: tuple[int, int, int]) -> np.ndarray:
    """Extract a patch at corner, reflect-padding axes shorter than the patch."""
    pads = []
    for d, p in zip(arr.shape, patch):
        pads.append((0, max(0, p - d)))
    if any(p[1] for p in pads):
        mode = "reflect" if all(d > 1 for d in arr.shape) else "edge"
        arr = np.pad(arr, pads, mode=mode)
    x, y, z = corner
    px, py, pz = patch
    return arr[x : x + px, y : y + py, z : z + pz]


def _random_corner(dims, patch, rng) -> tuple[int, int, int]:
    return tuple(
        int(rng.integers(0, max(1, d - p + 1))) for d, p in zip(dims, patch)
    )


def train(config: NetworkConfig, dataset: list[TrainSample],
          epochs: int | None = None, augment: bool = False,
          init: Weights | None = None) -> tuple[Weights, list[float]]:
    """Seeded single-threaded training; returns weights and per-epoch losses.

    An epoch is ceil(len(dataset)/batch_size) steps; each step draws
    batch_size random patch crops. ``augment`` enables random axis
    flips (off by default). ``epochs=0`` returns the initialization.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    epochs = config.epochs if epochs is None else epochs
    rng = np.random.default_rng(config.seed)
    weights = init if init is not None else network.init_weights(config, rng)
    steps_per_epoch = -(-len(dataset) // config.batch_size)

    curve: list[float] = []
    for _ in range(epochs):
        epoch_losses = []
        for _ in range(steps_per_epoch):
            idx = rng.integers(0, len(dataset), size=config.batch_size)
            images, labels = [], []
            for j in idx:
                sample = dataset[int(j)]
                corner = _random_corner(sample.image.dims, config.patch_size, rng)
                img = _crop_or_pad(sample.image.data, config.patch_size, corner)
                lab = _crop_or_pad(sample.label.voxels, config.patch_size, corner)
                if augment:
                    for axis in range(3):
                        if rng.random() < 0.5:
                            img = np.flip(img, axis=axis)
                            lab = np.flip(lab, axis=axis)
                images.append(np.ascontiguousarray(img))
                labels.append(np.ascontiguousarray(lab))
            loss, grads = loss_and_grads(
                np.stack(images)[:, None], np.stack(labels), weights, config
            )
            _check_finite(loss, grads)
            weights = sgd_update(weights, grads, config.learning_rate)
            epoch_losses.append(loss)
        curve.append(float(np.mean(epoch_losses)))
    return weights, curve
