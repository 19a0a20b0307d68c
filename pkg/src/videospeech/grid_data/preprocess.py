"""Face alignment, mouth crop, normalization, mirroring and frame windows."""

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

FPS = 25
FRAME_HEIGHT = 64
FRAME_WIDTH = 96

# Canonical 5-point template as (x, y) pixel coordinates on the 96 wide x 128
# tall aligned canvas: outer/inner corner of each eye, then the nose tip.
CANONICAL_TEMPLATE = np.array(
    [
        [18.0, 40.0],
        [38.0, 40.0],
        [58.0, 40.0],
        [78.0, 40.0],
        [48.0, 70.0],
    ]
)

_LUMA = np.array([0.299, 0.587, 0.114])


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class PreprocessConfig:
    anchor_count: int = 5
    resize_hw: tuple = (128, 96)
    channels: int = 1
    interpolation_order: int = 1

    def __post_init__(self):
        if self.anchor_count != 5:
            raise ValueError("anchor_count must be 5")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if tuple(self.resize_hw) != (2 * FRAME_HEIGHT, FRAME_WIDTH):
            raise ValueError(f"resize_hw must be {(2 * FRAME_HEIGHT, FRAME_WIDTH)}")


def estimate_similarity(src, dst):
    """Least-squares similarity transform (Umeyama, no reflection).

    Returns ``(scale, rotation, translation)`` with ``dst ~ scale * R @ src + t``
    for (x, y) point arrays of shape (K, 2).
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise AlignmentError(f"anchor shape mismatch: {src.shape} vs {dst.shape}")
    mu_s, mu_d = src.mean(0), dst.mean(0)
    a, b = src - mu_s, dst - mu_d
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] < 1e-6:
        raise AlignmentError("anchors are coincident")
    if sv[1] / sv[0] < 1e-3:
        raise AlignmentError("anchors are collinear")
    cov = b.T @ a / len(src)
    u, d, vt = np.linalg.svd(cov)
    sign = np.ones(2)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sign[-1] = -1.0
    rot = u @ np.diag(sign) @ vt
    var_src = (a**2).sum() / len(src)
    scale = (d * sign).sum() / var_src
    trans = mu_d - scale * rot @ mu_s
    return scale, rot, trans


def _to_channels(frame, channels):
    frame = np.asarray(frame)
    if frame.ndim == 2:
        frame = frame[..., None]
    if frame.shape[-1] == 3 and channels == 1:
        return (frame.astype(np.float64) @ _LUMA)[..., None]
    if frame.shape[-1] == 1 and channels == 3:
        return np.repeat(frame, 3, axis=-1).astype(np.float64)
    if frame.shape[-1] != channels:
        raise ValueError(f"cannot convert {frame.shape[-1]}-channel frame to {channels} channels")
    return frame.astype(np.float64)


def _unit_scale(dtype):
    if np.issubdtype(dtype, np.integer):
        return float(np.iinfo(dtype).max)
    return 1.0


def align_frame(frame, anchors, config=PreprocessConfig()):
    """Warp one frame so its anchors land on the canonical template.

    The result is the full aligned canvas, shape (128, 96, C), in the input's
    value units.
    """
    scale, rot, trans = estimate_similarity(anchors, CANONICAL_TEMPLATE)
    img = _to_channels(frame, config.channels)
    out_h, out_w = config.resize_hw
    # output (x, y) -> input (x, y): inv = R^T (p - t) / s; reorder to (row, col)
    inv = rot.T / scale
    inv_rc = inv[::-1, ::-1]
    offset_xy = -inv @ trans
    offset_rc = offset_xy[::-1]
    out = np.empty((out_h, out_w, img.shape[-1]))
    for c in range(img.shape[-1]):
        out[..., c] = ndimage.affine_transform(
            img[..., c], inv_rc, offset=offset_rc, output_shape=(out_h, out_w),
            order=config.interpolation_order, mode="nearest",
        )
    return out


def preprocess_frames(raw_frames, anchors, config=PreprocessConfig()):
    """Aligned, cropped and normalized mouth-region tensor of shape (T, C, 64, 96).

    ``raw_frames`` is a (T, H, W) or (T, H, W, 3) image sequence, ``anchors`` a
    (T, 5, 2) array of (x, y) landmark positions. Integer images are scaled by
    their dtype maximum, float images are taken to lie in [0, 1]; both are then
    mapped linearly to [-1, 1].
    """
    raw_frames = np.asarray(raw_frames)
    anchors = np.asarray(anchors, dtype=np.float64)
    if raw_frames.ndim not in (3, 4) or raw_frames.shape[0] < 1:
        raise ValueError(f"expected a non-empty (T, H, W[, 3]) sequence, got shape {raw_frames.shape}")
    n = raw_frames.shape[0]
    if anchors.shape != (n, config.anchor_count, 2):
        raise AlignmentError(f"expected anchors of shape {(n, config.anchor_count, 2)}, got {anchors.shape}")
    unit = _unit_scale(raw_frames.dtype)
    out = np.empty((n, config.channels, FRAME_HEIGHT, FRAME_WIDTH), dtype=np.float32)
    for t in range(n):
        canvas = align_frame(raw_frames[t], anchors[t], config)
        mouth = canvas[config.resize_hw[0] // 2:]
        out[t] = np.clip(2.0 * mouth / unit - 1.0, -1.0, 1.0).transpose(2, 0, 1)
    return out


def mirror_frames(frames):
    return np.ascontiguousarray(np.asarray(frames)[..., ::-1])


def augment_mirror(sample):
    """Horizontally flipped copy of a sample; audio and transcript are shared."""
    return replace(sample, frames=mirror_frames(sample.frames))


def window_indices(length, n):
    if n < 1 or n % 2 == 0:
        raise ValueError(f"window size must be odd and positive, got {n}")
    if length < 1:
        raise ValueError("need at least one frame")
    half = n // 2
    idx = np.arange(length)[:, None] + np.arange(-half, half + 1)[None, :]
    return np.clip(idx, 0, length - 1)


def sliding_windows(video, n):
    """Centered windows of ``n`` frames, one per frame, replicate-padded at the edges.

    Works for numpy arrays and torch tensors with time on axis 0 (or axis 1 when
    ``video`` is batched as (B, T, ...)); output gains a window axis right after time.
    """
    batched = video.ndim == 5
    length = video.shape[1] if batched else video.shape[0]
    idx = window_indices(length, n)
    if hasattr(video, "new_tensor"):
        import torch

        idx = torch.as_tensor(idx, device=video.device)
    return video[:, idx] if batched else video[idx]
