"""Image quality metrics and the difficulty/distortion curve protocol.

PSNR and SSIM operate on 8-bit frames; the masked variants restrict the
computation to a boolean pixel set (e.g. co-visible vs occluded regions of a
warp). The curve protocol bins frame pairs by how far the input view is from
the target and reports mean distortion per bin.
"""

import math
from dataclasses import dataclass

import numpy as np

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * 255.0) ** 2
SSIM_C2 = (0.03 * 255.0) ** 2
LUMA_WEIGHTS = (0.299, 0.587, 0.114)  # ITU-R BT.601


@dataclass(frozen=True)
class CurvePoint:
    difficulty_bin_center: float
    mean_distortion: float
    count: int


@dataclass(frozen=True)
class MetricReport:
    """Per-frame metric values plus their mean, with an optional mask label."""

    per_frame: dict
    mask: str = "full"
    curve: tuple = ()

    def means(self):
        return {name: math.fsum(vals) / len(vals) for name, vals in self.per_frame.items()}

    def to_json_dict(self):
        return {
            "metrics": {
                name: {"per_frame": list(map(float, vals)), "mean": mean}
                for (name, vals), mean in zip(self.per_frame.items(), self.means().values())
            },
            "mask": self.mask,
            "curve": [
                {
                    "bin": p.difficulty_bin_center,
                    "mean": p.mean_distortion,
                    "count": p.count,
                }
                for p in self.curve
            ],
        }


def _check_pair(a, b, mask):
    if a.shape != b.shape:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        if m.shape != a.shape:
            raise ValueError(f"mask shape {m.shape} != frame shape {a.shape}")
        if not m.any():
            raise ValueError("mask selects no pixels")
        return m
    return None


def psnr(a, b, mask=None):
    """Peak signal-to-noise ratio in dB over the masked pixels (8-bit range).

    Zero MSE returns the 99.0 dB cap so reports stay finite and sortable.
    """
    m = _check_pair(a, b, mask)
    x = a.pixels.astype(np.float64)
    y = b.pixels.astype(np.float64)
    if m is not None:
        x, y = x[m], y[m]
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(20.0 * math.log10(255.0 / math.sqrt(mse)), PSNR_CAP_DB)


def _gaussian_window():
    half = SSIM_WINDOW // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * SSIM_SIGMA**2))
    return g / g.sum()


def _luma(frame):
    px = frame.pixels.astype(np.float64)
    return px[..., 0] * LUMA_WEIGHTS[0] + px[..., 1] * LUMA_WEIGHTS[1] + px[..., 2] * LUMA_WEIGHTS[2]


def _windowed_stats(img, window):
    # local weighted means over all full-support window positions
    view = np.lib.stride_tricks.sliding_window_view(img, (SSIM_WINDOW, SSIM_WINDOW))
    return np.einsum("ijkl,kl->ij", view, window)


def ssim_map(a, b):
    """Local SSIM at every window center with full 11x11 support."""
    x = _luma(a)
    y = _luma(b)
    window = _gaussian_window()
    mu_x = _windowed_stats(x, window)
    mu_y = _windowed_stats(y, window)
    xx = _windowed_stats(x * x, window) - mu_x * mu_x
    yy = _windowed_stats(y * y, window) - mu_y * mu_y
    xy = _windowed_stats(x * y, window) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * xy + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (xx + yy + SSIM_C2)
    return num / den


def ssim(a, b, mask=None):
    """Mean structural similarity on the luma channel, Gaussian 11x11 window.

    The masked variant averages the window centers that fall inside the mask.
    """
    h, w = a.shape
    if min(h, w) < SSIM_WINDOW:
        raise ValueError(f"image {w}x{h} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    m = _check_pair(a, b, mask)
    smap = ssim_map(a, b)
    if m is None:
        return float(smap.mean())
    half = SSIM_WINDOW // 2
    centers = m[half : h - half, half : w - half]
    if not centers.any():
        raise ValueError("mask selects no interior window centers")
    return float(smap[centers].mean())


def occlusion_masks(flow_src_to_tgt, warp_result):
    """(covisible, occluded) partition of the target view from a warp's holes."""
    occluded = warp_result.hole_mask.copy()
    return ~occluded, occluded


def one_minus_ssim(a, b):
    """Default distance for the difficulty/distortion protocol."""
    return 1.0 - ssim(a, b)


def difficulty_distortion(pairs, distance=one_minus_ssim, bins=10):
    """Bin (input, generated, target) triples by viewpoint difficulty.

    difficulty = distance(input, target); distortion = distance(generated,
    target). Pairs fall into equal-width difficulty bins over the observed
    range; each non-empty bin yields a CurvePoint with its center, mean
    distortion, and count.
    """
    if not pairs:
        raise ValueError("at least one frame triple required")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    difficulty = np.array([distance(inp, tgt) for inp, _, tgt in pairs])
    distortion = np.array([distance(gen, tgt) for _, gen, tgt in pairs])
    lo, hi = float(difficulty.min()), float(difficulty.max())
    width = (hi - lo) / bins
    if width == 0.0:
        idx = np.zeros(len(pairs), dtype=int)
    else:
        idx = np.minimum(((difficulty - lo) / width).astype(int), bins - 1)
    points = []
    for k in range(bins):
        sel = idx == k
        n = int(sel.sum())
        if n == 0:
            continue
        center = lo + (k + 0.5) * width if width > 0 else lo
        points.append(CurvePoint(center, float(math.fsum(distortion[sel]) / n), n))
    return points
