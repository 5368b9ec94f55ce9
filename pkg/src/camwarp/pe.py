"""Sinusoidal positional-encoding maps and their flow-based re-alignment.

Layout: the first C/2 channels encode the u coordinate, the last C/2 the v
coordinate. Within each half, channel pair i holds
sin(p / base^(2i/(C/2))) and cos(p / base^(2i/(C/2))) interleaved. The
temporal index selects the per-frame flow only; it does not enter the
sinusoid. Re-alignment is a bilinear gather at flow-displaced coordinates,
clamped at the image border.
"""

from dataclasses import dataclass

import numpy as np

from .warp import backward_sample

DEFAULT_BASE = 10000.0


@dataclass(frozen=True)
class PEMap:
    """H x W x C sinusoidal encoding; values lie in [-1, 1]."""

    values: np.ndarray
    base: float = DEFAULT_BASE

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 3:
            raise ValueError(f"PE map must be HxWxC, got shape {vals.shape}")
        if vals.shape[2] % 2 != 0:
            raise ValueError(f"channel count must be even, got {vals.shape[2]}")
        # 1-ulp slack: bilinear blends of boundary values may round just past 1
        if vals.size and (vals.min() < -1.0 - 1e-12 or vals.max() > 1.0 + 1e-12):
            raise ValueError("PE values must lie in [-1, 1]")
        object.__setattr__(self, "values", vals)

    @property
    def shape(self):
        return self.values.shape[:2]

    @property
    def channels(self):
        return self.values.shape[2]


@dataclass(frozen=True)
class CoordinateMap:
    """H x W x 2 grid of pixel coordinates normalized to [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 3 or vals.shape[2] != 2:
            raise ValueError(f"coordinate map must be HxWx2, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)


def _axis_encoding(positions, pairs, half_channels, base):
    i = np.arange(pairs)
    freq = base ** (2.0 * i / half_channels)
    angles = positions[..., None] / freq
    out = np.empty(positions.shape + (half_channels,))
    out[..., 0::2] = np.sin(angles)
    out[..., 1::2] = np.cos(angles)
    return out


def sinusoidal_pe(height, width, channels, base=DEFAULT_BASE):
    """Axis-separated sinusoidal positional encoding.

    channels must be divisible by 4: half encode u, half encode v, with
    sin/cos interleaved inside each half.
    """
    if channels % 4 != 0:
        raise ValueError(f"channel count must be divisible by 4, got {channels}")
    half = channels // 2
    pairs = half // 2
    u = np.arange(width, dtype=np.float64)
    v = np.arange(height, dtype=np.float64)
    u_enc = _axis_encoding(u, pairs, half, base)  # W x half
    v_enc = _axis_encoding(v, pairs, half, base)  # H x half
    values = np.empty((height, width, channels))
    values[:, :, :half] = u_enc[None, :, :]
    values[:, :, half:] = v_enc[:, None, :]
    return PEMap(values, base)


def realign_pe(pe, flow):
    """Re-aligned encoding PE'(u, v) = PE(u + f_u, v + f_v).

    Bilinear gather through the flow field (piecewise-linear in the flow, so
    differentiable almost everywhere). Invalid-flow pixels are zeroed; the
    returned validity grid reports them.
    """
    if pe.shape != flow.shape:
        raise ValueError(f"PE shape {pe.shape} != flow shape {flow.shape}")
    values, valid = backward_sample(pe.values, flow)
    return PEMap(values, pe.base), valid


def coordinate_maps(height, width, flow):
    """Identity normalized coordinate grid and its flow-warped gather."""
    if flow.shape != (height, width):
        raise ValueError(f"flow shape {flow.shape} != {(height, width)}")
    u = np.arange(width, dtype=np.float64) / max(width - 1, 1)
    v = np.arange(height, dtype=np.float64) / max(height - 1, 1)
    identity = np.stack(np.meshgrid(u, v), axis=-1)
    warped, _ = backward_sample(identity, flow)
    return CoordinateMap(identity), CoordinateMap(warped)
