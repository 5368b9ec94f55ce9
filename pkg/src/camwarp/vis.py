"""Flow visualization with the standard optical-flow color wheel."""

import numpy as np

from .warp import Frame

_WHEEL_SEGMENTS = (
    # (count, from_color, to_color) spanning RY, YG, GC, CB, BM, MR
    (15, (255, 0, 0), (255, 255, 0)),
    (6, (255, 255, 0), (0, 255, 0)),
    (4, (0, 255, 0), (0, 255, 255)),
    (11, (0, 255, 255), (0, 0, 255)),
    (13, (0, 0, 255), (255, 0, 255)),
    (6, (255, 0, 255), (255, 0, 0)),
)


def _color_wheel():
    rows = []
    for count, a, b in _WHEEL_SEGMENTS:
        frac = np.arange(count)[:, None] / count
        rows.append(np.array(a)[None, :] * (1 - frac) + np.array(b)[None, :] * frac)
    return np.vstack(rows)


def flow_to_color(flow, max_magnitude=None):
    """Render a flow field as the Middlebury-style color wheel image.

    Hue encodes direction, saturation encodes magnitude relative to
    max_magnitude (defaults to the field's own maximum). Invalid pixels
    render black.
    """
    wheel = _color_wheel()
    n = wheel.shape[0]
    u = np.where(flow.validity, flow.vectors[..., 0], 0.0)
    v = np.where(flow.validity, flow.vectors[..., 1], 0.0)
    mag = np.hypot(u, v)
    if max_magnitude is None:
        max_magnitude = float(mag.max())
    scale = max_magnitude if max_magnitude > 0 else 1.0
    radius = np.clip(mag / scale, 0.0, 1.0)
    angle = np.arctan2(-v, -u) / np.pi  # [-1, 1]
    pos = (angle + 1.0) / 2.0 * (n - 1)
    k0 = np.floor(pos).astype(int) % n
    k1 = (k0 + 1) % n
    f = (pos - np.floor(pos))[..., None]
    col = wheel[k0] * (1 - f) + wheel[k1] * f  # [0, 255]
    col = 255.0 - radius[..., None] * (255.0 - col)
    col = np.where(flow.validity[..., None], col, 0.0)
    return Frame(np.clip(np.floor(col + 0.5), 0, 255).astype(np.uint8))
