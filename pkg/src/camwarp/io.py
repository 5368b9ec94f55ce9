"""Readers and writers for every on-disk artifact.

Formats: PFM and 16-bit PNG (+scale sidecar) for depth, Middlebury .flo for
flow, the CAMT tensor container for arbitrary-rank float32 arrays, JSON for
cameras/trajectories and matches, PNG for frames and masks. All binary
formats are little-endian. Every reject names the offending field or byte
offset.
"""

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .camera import CameraTrajectory, Intrinsics, PoseSE3
from .geometry import DepthMap, FlowField
from .warp import Frame

FLO_MAGIC = 202021.25
FLO_UNKNOWN = 1e10
FLO_UNKNOWN_LIMIT = 1e9
CAMT_MAGIC = b"CAMT"


class FileFormatError(ValueError):
    """Malformed file content; the message names the field or byte offset."""


# ---------------------------------------------------------------------------
# PFM depth

def write_pfm(path, depth):
    """Grayscale PFM, little-endian, bottom-up rows; invalid pixels as 0.0."""
    h, w = depth.shape
    data = np.where(depth.validity, depth.values, 0.0).astype("<f4")
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(data[::-1].tobytes())


def read_pfm(path):
    raw = Path(path).read_bytes()
    lines = raw.split(b"\n", 3)
    if len(lines) < 4:
        raise FileFormatError(f"{path}: PFM header incomplete (need 3 header lines)")
    if lines[0].strip() != b"Pf":
        raise FileFormatError(f"{path}: header field 1 must be 'Pf', got {lines[0][:8]!r}")
    try:
        w, h = (int(x) for x in lines[1].split())
    except ValueError:
        raise FileFormatError(f"{path}: header field 2 must be 'width height', got {lines[1]!r}")
    try:
        scale = float(lines[2])
    except ValueError:
        raise FileFormatError(f"{path}: header field 3 must be a scale float, got {lines[2]!r}")
    if scale == 0:
        raise FileFormatError(f"{path}: scale must be non-zero")
    payload = lines[3]
    offset = len(raw) - len(payload)
    expected = 4 * w * h
    if len(payload) < expected:
        raise FileFormatError(
            f"{path}: expected {expected} payload bytes at offset {offset}, got {len(payload)}"
        )
    dtype = "<f4" if scale < 0 else ">f4"
    vals = np.frombuffer(payload[:expected], dtype=dtype).reshape(h, w)[::-1]
    vals = vals.astype(np.float64)
    validity = np.isfinite(vals) & (vals > 0)
    return DepthMap(vals, validity)


# ---------------------------------------------------------------------------
# 16-bit PNG depth with a scale sidecar

def write_depth_png(path, depth, scale=None):
    """16-bit PNG; value 0 marks invalid pixels, sidecar JSON holds the scale."""
    if scale is None:
        top = float(depth.values[depth.validity].max()) if depth.validity.any() else 1.0
        scale = top / 65535.0
    quant = np.clip(np.round(depth.values / scale), 1, 65535).astype(np.uint16)
    quant = np.where(depth.validity, quant, 0).astype(np.uint16)
    Image.fromarray(quant, mode="I;16").save(path)
    Path(str(path) + ".json").write_text(json.dumps({"scale": scale}))


def read_depth_png(path):
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        raise FileFormatError(f"{path}: missing scale sidecar {sidecar.name}")
    meta = json.loads(sidecar.read_text())
    if "scale" not in meta:
        raise FileFormatError(f"{sidecar}: field 'scale' missing")
    quant = np.asarray(Image.open(path), dtype=np.uint16)
    values = quant.astype(np.float64) * float(meta["scale"])
    return DepthMap(np.where(quant > 0, values, 0.0), quant > 0)


# ---------------------------------------------------------------------------
# Middlebury .flo flow

def write_flo(path, flow):
    h, w = flow.shape
    data = flow.vectors.astype("<f4")
    data = np.where(flow.validity[..., None], data, np.float32(FLO_UNKNOWN)).astype("<f4")
    with open(path, "wb") as f:
        f.write(struct.pack("<f", FLO_MAGIC))
        f.write(struct.pack("<ii", w, h))
        f.write(data.tobytes())


def read_flo(path):
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise FileFormatError(f"{path}: header needs 12 bytes, file has {len(raw)}")
    (magic,) = struct.unpack_from("<f", raw, 0)
    if magic != np.float32(FLO_MAGIC):
        raise FileFormatError(f"{path}: bad magic at offset 0: {magic!r} != {FLO_MAGIC}")
    w, h = struct.unpack_from("<ii", raw, 4)
    if w <= 0 or h <= 0:
        raise FileFormatError(f"{path}: non-positive dimensions {w}x{h} at offset 4")
    expected = 8 * w * h
    if len(raw) - 12 != expected:
        raise FileFormatError(
            f"{path}: expected {expected} payload bytes at offset 12, got {len(raw) - 12}"
        )
    vec = np.frombuffer(raw, dtype="<f4", offset=12).reshape(h, w, 2).astype(np.float64)
    validity = np.all(np.abs(vec) <= FLO_UNKNOWN_LIMIT, axis=-1)
    vec = np.where(validity[..., None], vec, 0.0)
    # .flo carries no depth channel; zero-filled (see flow module docs)
    return FlowField(vec, validity, np.zeros((h, w)))


# ---------------------------------------------------------------------------
# CAMT tensor container

def write_tensor(path, array):
    a = np.asarray(array, dtype="<f4")
    with open(path, "wb") as f:
        f.write(CAMT_MAGIC)
        f.write(struct.pack("<I", a.ndim))
        f.write(struct.pack(f"<{a.ndim}I", *a.shape))
        f.write(np.ascontiguousarray(a).tobytes())


def read_tensor(path):
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise FileFormatError(f"{path}: header needs at least 8 bytes, file has {len(raw)}")
    if raw[:4] != CAMT_MAGIC:
        raise FileFormatError(f"{path}: bad magic at offset 0: {raw[:4]!r} != {CAMT_MAGIC!r}")
    (ndim,) = struct.unpack_from("<I", raw, 4)
    if ndim == 0 or ndim > 16:
        raise FileFormatError(f"{path}: implausible ndim {ndim} at offset 4")
    header = 8 + 4 * ndim
    if len(raw) < header:
        raise FileFormatError(f"{path}: dims truncated at offset 8 (need {4 * ndim} bytes)")
    dims = struct.unpack_from(f"<{ndim}I", raw, 8)
    expected = 4 * int(np.prod(dims))
    if len(raw) - header != expected:
        raise FileFormatError(
            f"{path}: expected {expected} payload bytes at offset {header}, got {len(raw) - header}"
        )
    return np.frombuffer(raw, dtype="<f4", offset=header).reshape(dims).copy()


# ---------------------------------------------------------------------------
# camera / trajectory JSON

def _require(d, key, path, ctx):
    if key not in d:
        raise FileFormatError(f"{path}: field '{ctx}{key}' missing")
    return d[key]


def trajectory_to_dict(traj):
    k = traj.intrinsics
    return {
        "intrinsics": {
            "fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
            "width": k.width, "height": k.height,
        },
        "frames": [
            {"index": i, "R": pose.rotation.tolist(), "t": pose.translation.tolist()}
            for i, pose in enumerate(traj.poses)
        ],
    }


def trajectory_from_dict(doc, path="<memory>"):
    intr = _require(doc, "intrinsics", path, "")
    fields = {}
    for key in ("fx", "fy", "cx", "cy", "width", "height"):
        fields[key] = _require(intr, key, path, "intrinsics.")
    try:
        k = Intrinsics(
            fx=float(fields["fx"]), fy=float(fields["fy"]),
            cx=float(fields["cx"]), cy=float(fields["cy"]),
            width=int(fields["width"]), height=int(fields["height"]),
        )
    except ValueError as e:
        raise FileFormatError(f"{path}: intrinsics: {e}") from e
    frames = _require(doc, "frames", path, "")
    if not frames:
        raise FileFormatError(f"{path}: field 'frames' must be non-empty")
    poses = {}
    for n, fr in enumerate(frames):
        idx = int(_require(fr, "index", path, f"frames[{n}]."))
        if idx in poses:
            raise FileFormatError(f"{path}: frames[{n}].index duplicates {idx}")
        r = _require(fr, "R", path, f"frames[{n}].")
        t = _require(fr, "t", path, f"frames[{n}].")
        try:
            poses[idx] = PoseSE3(np.array(r, dtype=np.float64), np.array(t, dtype=np.float64))
        except ValueError as e:
            raise FileFormatError(f"{path}: frames[{n}].R: {e}") from e
    indices = sorted(poses)
    if indices != list(range(len(indices))):
        raise FileFormatError(f"{path}: frames indices must cover 0..{len(indices) - 1} exactly")
    return CameraTrajectory(k, tuple(poses[i] for i in indices))


def write_trajectory(path, traj):
    Path(path).write_text(json.dumps(trajectory_to_dict(traj), indent=2) + "\n")


def read_trajectory(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{path}: invalid JSON at offset {e.pos}") from e
    return trajectory_from_dict(doc, str(path))


# ---------------------------------------------------------------------------
# matches JSON ({"src": [u, v], "tgt": [u, v]} records)

def write_matches(path, matches):
    records = [{"src": list(map(float, s)), "tgt": list(map(float, t))} for s, t in matches]
    Path(path).write_text(json.dumps(records, indent=2) + "\n")


def read_matches(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{path}: invalid JSON at offset {e.pos}") from e
    if not isinstance(doc, list):
        raise FileFormatError(f"{path}: top level must be a list of match records")
    out = []
    for n, rec in enumerate(doc):
        src = _require(rec, "src", path, f"[{n}].")
        tgt = _require(rec, "tgt", path, f"[{n}].")
        if len(src) != 2 or len(tgt) != 2:
            raise FileFormatError(f"{path}: [{n}].src/.tgt must be 2-vectors")
        out.append((np.array(src, dtype=np.float64), np.array(tgt, dtype=np.float64)))
    return out


# ---------------------------------------------------------------------------
# PNG frames and masks

def write_frame(path, frame):
    Image.fromarray(frame.pixels, mode="RGB").save(path, format="PNG")


def read_frame(path):
    img = Image.open(path).convert("RGB")
    return Frame(np.asarray(img, dtype=np.uint8))


def encode_frame_png(frame):
    """Deterministic in-memory PNG bytes; shared by the CLI and the service."""
    import io as _io

    buf = _io.BytesIO()
    Image.fromarray(frame.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def write_mask(path, mask):
    Image.fromarray(np.asarray(mask, dtype=bool)).convert("1").save(path, format="PNG")


def read_mask(path):
    return np.asarray(Image.open(path).convert("1"), dtype=bool)
