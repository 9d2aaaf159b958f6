"""
Temporal boundary head: windowed contrast features, a two-layer Conv1D
classifier, soft labels, BCE loss and peak picking.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Sequence, Tuple

import numpy as np
from loguru import logger

from cgebd.nn import ops
from cgebd.nn.modules import Conv1d
from cgebd.nn.tensor import ParamSet, Tensor
from cgebd.utils.errors import ShapeError

BCE_EPSILON = 1e-12


class LabelMode(str, Enum):
    GAUSSIAN = "gaussian"
    HARD = "hard"


@dataclass
class EmbeddingSequence:
    """Per-video embeddings in temporal order with their original frame indices."""

    vectors: Tensor  # (L, C)
    frame_indices: np.ndarray  # (L,) strictly increasing
    fps: float

    def __post_init__(self):
        self.frame_indices = np.asarray(self.frame_indices, dtype=np.int64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.frame_indices):
            raise ShapeError(
                f"Embeddings {self.vectors.shape} do not match "
                f"{len(self.frame_indices)} frame indices"
            )
        if len(self.frame_indices) and np.any(np.diff(self.frame_indices) <= 0):
            raise ShapeError("Frame indices must be strictly increasing")

    @property
    def length(self) -> int:
        return self.vectors.shape[0]


def contrast_features(vectors: Tensor, left: Tensor, right: Tensor):
    """
    chi^l = [phi^l ; psi^l] with
        phi^l = sum_{j=1..k} left[j-1] * V[l-j]
        psi^l = sum_{j=1..k} right[j-1] * V[l+j]
    Positions outside [0, L) contribute zero. With k = 0, chi^l = [V[l] ; V[l]].

    Backward returns (d vectors, d left, d right).
    """
    length, channels = vectors.shape
    k = left.shape[0]
    if left.shape != right.shape or (k and left.shape[1] != channels):
        raise ShapeError(
            f"Contrast weights {left.shape}/{right.shape} do not match embeddings {vectors.shape}"
        )

    if k == 0:

        def backward_identity(grad: Tensor):
            return grad[:, :channels] + grad[:, channels:], np.zeros_like(left), np.zeros_like(
                right
            )

        return np.concatenate([vectors, vectors], axis=1), backward_identity

    padded = np.pad(vectors, ((k, k), (0, 0)))
    phi = np.zeros_like(vectors)
    psi = np.zeros_like(vectors)
    for j in range(1, k + 1):
        phi += left[j - 1] * padded[k - j : k - j + length]
        psi += right[j - 1] * padded[k + j : k + j + length]

    def backward(grad: Tensor):
        g_phi, g_psi = grad[:, :channels], grad[:, channels:]
        d_padded = np.zeros_like(padded)
        d_left = np.zeros_like(left)
        d_right = np.zeros_like(right)
        for j in range(1, k + 1):
            d_padded[k - j : k - j + length] += left[j - 1] * g_phi
            d_padded[k + j : k + j + length] += right[j - 1] * g_psi
            d_left[j - 1] = np.sum(g_phi * padded[k - j : k - j + length], axis=0)
            d_right[j - 1] = np.sum(g_psi * padded[k + j : k + j + length], axis=0)
        return d_padded[k : k + length], d_left, d_right

    return np.concatenate([phi, psi], axis=1), backward


class BoundaryHead:
    """Contrast weights plus Conv1D(2C -> C, k=3) -> relu -> Conv1D(C -> 1, k=1) -> sigmoid."""

    def __init__(self, params: ParamSet, channels: int, window_k: int = 8):
        if window_k < 0:
            raise ShapeError(f"Contrast window must be non-negative, got {window_k}")
        self.params = params
        self.channels = channels
        self.window_k = window_k
        if window_k:
            params.add("contrast.left", (window_k, channels), fan_in=window_k)
            params.add("contrast.right", (window_k, channels), fan_in=window_k)
        self.conv1 = Conv1d(params, "classifier.0", 2 * channels, channels, 3)
        self.conv2 = Conv1d(params, "classifier.1", channels, 1, 1)

    def contrast(self, vectors: Tensor):
        if self.window_k:
            left, right = self.params["contrast.left"], self.params["contrast.right"]
        else:
            left = right = np.zeros((0, self.channels))
        features, back_contrast = contrast_features(vectors, left, right)

        def backward(grad: Tensor) -> Tensor:
            d_vectors, d_left, d_right = back_contrast(grad)
            if self.window_k:
                self.params.accumulate("contrast.left", d_left)
                self.params.accumulate("contrast.right", d_right)
            return d_vectors

        return features, backward

    def classify(self, features: Tensor):
        """(L, 2C) contrast features -> (L,) scores in (0, 1)."""
        hidden, back_conv1 = self.conv1(features.T)
        activated, back_relu = ops.relu(hidden)
        logits, back_conv2 = self.conv2(activated)
        scores, back_sigmoid = ops.sigmoid(logits[0])

        def backward(grad: Tensor) -> Tensor:
            return back_conv1(back_relu(back_conv2(back_sigmoid(grad)[None]))).T

        return scores, backward

    def __call__(self, vectors: Tensor) -> Tuple[Tensor, Callable[[Tensor], Tensor]]:
        features, back_contrast = self.contrast(vectors)
        scores, back_classify = self.classify(features)

        def backward(grad: Tensor) -> Tensor:
            return back_contrast(back_classify(grad))

        return scores, backward


def map_boundaries_to_positions(
    boundaries_sec: Sequence[float], frame_indices: Sequence[int], fps: float
) -> List[int]:
    """
    Sequence position whose frame is nearest to each boundary (earliest on ties).

    Two boundaries may land on the same position; both are kept.
    """
    frames = np.asarray(frame_indices, dtype=np.float64)
    return [int(np.argmin(np.abs(frames - b * fps))) for b in boundaries_sec]


def gaussian_soft_labels(positions: Sequence[int], length: int, alpha: float = 1.0) -> Tensor:
    """g(i) = min(1, sum_b exp(-(i - b)^2 / (2 alpha^2)))"""
    if alpha <= 0:
        raise ValueError(f"Label width must be positive, got {alpha}")
    index = np.arange(length, dtype=np.float64)
    labels = np.zeros(length)
    for position in positions:
        if not 0 <= position < length:
            raise ValueError(f"Boundary position {position} outside [0, {length})")
        labels += np.exp(-((index - position) ** 2) / (2 * alpha * alpha))
    return np.minimum(labels, 1.0)


def hard_labels(positions: Sequence[int], length: int) -> Tensor:
    labels = np.zeros(length)
    for position in positions:
        if not 0 <= position < length:
            raise ValueError(f"Boundary position {position} outside [0, {length})")
        labels[position] = 1.0
    return labels


def make_labels(
    positions: Sequence[int],
    length: int,
    mode: LabelMode | str = LabelMode.GAUSSIAN,
    alpha: float = 1.0,
) -> Tensor:
    if LabelMode(mode) == LabelMode.HARD:
        return hard_labels(positions, length)
    return gaussian_soft_labels(positions, length, alpha)


def bce_loss(scores: Tensor, targets: Tensor) -> Tuple[float, Tensor]:
    """
    Mean binary cross-entropy and its gradient with respect to the scores.

    Scores are clipped to [eps, 1 - eps]; a warning is logged when that happens.
    """
    if scores.shape != targets.shape:
        raise ShapeError(f"Scores {scores.shape} and targets {targets.shape} differ")
    clipped = np.clip(scores, BCE_EPSILON, 1.0 - BCE_EPSILON)
    if np.any(clipped != scores):
        logger.warning(
            f"Clipped {int(np.count_nonzero(clipped != scores))} saturated scores in BCE"
        )

    length = scores.shape[0]
    loss = -np.mean(targets * np.log(clipped) + (1.0 - targets) * np.log(1.0 - clipped))
    grad = (clipped - targets) / (clipped * (1.0 - clipped)) / length
    return float(loss), grad


def pick_boundaries(
    scores: Sequence[float],
    frame_indices: Sequence[int],
    fps: float,
    threshold: float = 0.5,
    nms_radius: int = 2,
) -> List[float]:
    """
    Boundary times (seconds) at local maxima of the score track.

    A position l is kept when S[l] >= threshold and no position within
    nms_radius beats it. An earlier position beats it when greater or equal,
    a later one only when strictly greater, so a plateau keeps its first
    position.
    """
    scores = np.asarray(scores, dtype=np.float64)
    length = len(scores)
    picked = []
    for l in range(length):
        if scores[l] < threshold:
            continue
        before = scores[max(0, l - nms_radius) : l]
        after = scores[l + 1 : min(length, l + nms_radius + 1)]
        if np.any(before >= scores[l]) or np.any(after > scores[l]):
            continue
        picked.append(float(frame_indices[l]) / fps)
    return picked
