"""Stochastic image augmentation producing two views per image.

Transform order is fixed (crop, flip, rotation, jitter, grayscale, blur);
randomness enters through per-transform draws, never through the order, so
a view is a pure function of (image, config, rng state).  All interpolation
is bilinear with edge clamping.  Outputs are resized to the configured
square size and clamped to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["AugmentConfig", "augment_pair", "resize_bilinear"]

# Luminance weights for grayscale conversion of RGB images.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class AugmentConfig:
    output_size: int
    crop_scale: tuple[float, float] = (0.5, 1.0)
    rotation_max_degrees: float = 15.0
    jitter_strength: float = 0.4
    blur_sigma: tuple[float, float] = (0.1, 1.0)
    grayscale_prob: float = 0.2
    flip_prob: float = 0.5
    enable_crop: bool = True
    enable_flip: bool = True
    enable_rotation: bool = True
    enable_jitter: bool = True
    enable_grayscale: bool = True
    enable_blur: bool = True

    def __post_init__(self):
        lo, hi = self.crop_scale
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError(f"crop scale range must satisfy 0 < lo <= hi <= 1, got {self.crop_scale}")
        for name, p in (("grayscale_prob", self.grayscale_prob), ("flip_prob", self.flip_prob)):
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        blo, bhi = self.blur_sigma
        if not (0.0 < blo <= bhi):
            raise ValueError(f"blur sigma range must satisfy 0 < lo <= hi, got {self.blur_sigma}")
        if self.rotation_max_degrees < 0.0:
            raise ValueError(f"rotation_max_degrees must be >= 0, got {self.rotation_max_degrees}")
        if self.output_size < 1:
            raise ValueError(f"output_size must be >= 1, got {self.output_size}")

    def validate_for(self, height: int, width: int) -> None:
        """Reject configs whose crop window could degenerate below 1x1."""
        if self.enable_crop:
            side = np.sqrt(self.crop_scale[0])
            if int(round(height * side)) < 1 or int(round(width * side)) < 1:
                raise ValueError(
                    f"crop scale {self.crop_scale[0]} degenerates below 1x1 "
                    f"on {height}x{width} images"
                )


def _sample_grid(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear sampling of (c, h, w) at fractional coords, edges clamped.

    ``ys``/``xs`` may be 1-D (separable grid) or 2-D (full coordinate maps).
    """
    c, h, w = img.shape
    if ys.ndim == 1:
        ys = ys[:, None] + np.zeros_like(xs)[None, :]
        xs = np.broadcast_to(xs[None, :], ys.shape)
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    fy = ys - y0
    fx = xs - x0
    y0i = np.clip(y0.astype(int), 0, h - 1)
    y1i = np.clip(y0.astype(int) + 1, 0, h - 1)
    x0i = np.clip(x0.astype(int), 0, w - 1)
    x1i = np.clip(x0.astype(int) + 1, 0, w - 1)
    top = img[:, y0i, x0i] * (1.0 - fx) + img[:, y0i, x1i] * fx
    bot = img[:, y1i, x0i] * (1.0 - fx) + img[:, y1i, x1i] * fx
    return top * (1.0 - fy) + bot * fy


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize (c, h, w) to (c, out_h, out_w); same-size input is copied as is."""
    c, h, w = img.shape
    if (h, w) == (out_h, out_w):
        return img.copy()
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    return _sample_grid(img, ys, xs)


def _random_crop(img: np.ndarray, cfg: AugmentConfig, rng) -> np.ndarray:
    c, h, w = img.shape
    area = rng.uniform(cfg.crop_scale[0], cfg.crop_scale[1])
    side = np.sqrt(area)
    ch = max(1, int(round(h * side)))
    cw = max(1, int(round(w * side)))
    top = int(rng.integers(0, h - ch + 1))
    left = int(rng.integers(0, w - cw + 1))
    return img[:, top : top + ch, left : left + cw]


def _rotate(img: np.ndarray, degrees: float) -> np.ndarray:
    c, h, w = img.shape
    theta = np.deg2rad(degrees)
    cos, sin = np.cos(theta), np.sin(theta)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    # Inverse map: rotate destination coords back into the source frame.
    src_y = cos * yy + sin * xx + cy
    src_x = -sin * yy + cos * xx + cx
    return _sample_grid(img, src_y, src_x)


def _to_grayscale(img: np.ndarray) -> np.ndarray:
    luma = np.tensordot(_LUMA, img, axes=([0], [0]))
    return np.repeat(luma[None, :, :], 3, axis=0)


def _jitter(img: np.ndarray, cfg: AugmentConfig, rng) -> np.ndarray:
    s = cfg.jitter_strength
    lo, hi = max(0.0, 1.0 - s), 1.0 + s
    out = img * rng.uniform(lo, hi)  # brightness
    mean = out.mean()
    out = (out - mean) * rng.uniform(lo, hi) + mean  # contrast
    if img.shape[0] == 3:
        luma = np.tensordot(_LUMA, out, axes=([0], [0]))[None, :, :]
        out = luma + (out - luma) * rng.uniform(lo, hi)  # saturation
    return out


def _gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    radius = 1 if sigma <= 0.8 else 2  # 3x3 or 5x5 kernel by sigma
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    kernel /= kernel.sum()
    padded = np.pad(img, ((0, 0), (radius, radius), (radius, radius)), mode="edge")
    # Separable: along height, then width.
    out = np.zeros_like(img, shape=(img.shape[0], img.shape[1], padded.shape[2]))
    for k, weight in zip(range(2 * radius + 1), kernel):
        out += weight * padded[:, k : k + img.shape[1], :]
    final = np.zeros_like(img)
    for k, weight in zip(range(2 * radius + 1), kernel):
        final += weight * out[:, :, k : k + img.shape[2]]
    return final


def _one_view(img: np.ndarray, cfg: AugmentConfig, rng) -> np.ndarray:
    out = img
    if cfg.enable_crop:
        out = _random_crop(out, cfg, rng)
    if cfg.enable_flip:
        if rng.uniform() < cfg.flip_prob:
            out = out[:, :, ::-1]
    if cfg.enable_rotation:
        angle = rng.uniform(-cfg.rotation_max_degrees, cfg.rotation_max_degrees)
        out = _rotate(out, angle)
    if cfg.enable_jitter:
        out = _jitter(out, cfg, rng)
    if cfg.enable_grayscale and img.shape[0] == 3:
        if rng.uniform() < cfg.grayscale_prob:
            out = _to_grayscale(out)
    if cfg.enable_blur:
        sigma = rng.uniform(cfg.blur_sigma[0], cfg.blur_sigma[1])
        out = _gaussian_blur(out, sigma)
    out = resize_bilinear(out, cfg.output_size, cfg.output_size)
    return np.clip(out, 0.0, 1.0)


def augment_pair(img: np.ndarray, cfg: AugmentConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    """Two independently augmented views of one (c, h, w) image.

    Grayscale inputs (1 channel) skip the color-specific transforms.  With
    every transform disabled both views are the plain bilinear resize.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise ValueError(f"expected a (c, h, w) image with 1 or 3 channels, got shape {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    cfg.validate_for(img.shape[1], img.shape[2])
    return _one_view(img, cfg, rng), _one_view(img, cfg, rng)
