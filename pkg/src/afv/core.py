"""Value types and primitive image operations shared by every stage.

Conventions used throughout the package:

* scalar maps are ``(H, W)`` float arrays indexed ``[row, col]``;
* flow fields are ``(H, W, 2)`` float32 arrays holding ``(u, v)`` in
  pixels/frame, ``u`` positive rightward and ``v`` positive downward;
* sample coordinates are ``(x, y) = (col, row)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError

FLOAT = np.float32


@dataclass(frozen=True)
class FrameSequence:
    """Ordered frames of one video, intensities in [0, 1].

    ``frames`` has shape ``(T, H, W)`` for grayscale or ``(T, H, W, 3)`` for
    colour video. ``channel_order`` says how a 3-channel array is laid out in
    memory (``"rgb"`` for decoded source video, ``"bgr"`` for encoded motion
    video).
    """

    frames: np.ndarray
    frame_rate: float = 25.0
    channel_order: str = "rgb"

    def __post_init__(self):
        arr = np.asarray(self.frames)
        if arr.ndim == 3:
            pass
        elif arr.ndim == 4 and arr.shape[-1] == 3:
            if self.channel_order not in ("rgb", "bgr"):
                raise ValidationError(f"unknown channel order {self.channel_order!r}")
        else:
            raise ValidationError(f"frames must be (T,H,W) or (T,H,W,3), got {arr.shape}")
        if arr.dtype != FLOAT:
            arr = arr.astype(FLOAT)
        if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
            raise ValidationError("frame intensities must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "frames", arr)

    @property
    def channels(self) -> int:
        return 1 if self.frames.ndim == 3 else 3

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def __len__(self) -> int:
        return self.frames.shape[0]

    def __getitem__(self, i):
        return self.frames[i]


def check_flow(flow: np.ndarray) -> np.ndarray:
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValidationError(f"flow must have shape (H, W, 2), got {flow.shape}")
    return flow


def flow_magnitude(flow: np.ndarray) -> np.ndarray:
    flow = check_flow(flow).astype(np.float64)
    return np.hypot(flow[..., 0], flow[..., 1])


def bilinear_sample(grid: np.ndarray, x, y):
    """Bilinearly interpolate ``grid`` at real coordinates ``(x, y)``.

    ``grid`` is ``(H, W)`` or ``(H, W, C)``; ``x`` and ``y`` may be scalars or
    arrays of equal shape. Coordinates must already be clamped to
    ``[0, W-1] x [0, H-1]``.

    The interpolation is written as nested lerps so that a constant
    neighbourhood returns its value bit-exactly.
    """
    grid = np.asarray(grid)
    h, w = grid.shape[:2]
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if not (np.all(xs >= 0) and np.all(xs <= w - 1) and np.all(ys >= 0) and np.all(ys <= h - 1)):
        raise DomainError(f"sample coordinates outside [0,{w - 1}]x[0,{h - 1}]")
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    if grid.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    v00 = grid[y0, x0].astype(np.float64)
    v01 = grid[y0, x1].astype(np.float64)
    v10 = grid[y1, x0].astype(np.float64)
    v11 = grid[y1, x1].astype(np.float64)
    top = v00 + fx * (v01 - v00)
    bottom = v10 + fx * (v11 - v10)
    return top + fy * (bottom - top)


def box_filter(values: np.ndarray, k: int = 9) -> np.ndarray:
    """Unweighted k x k mean with replicate padding."""
    if k < 1 or k % 2 == 0:
        raise ValidationError(f"box window must be a positive odd integer, got {k}")
    a = np.asarray(values, dtype=np.float64)
    r = k // 2
    if r == 0:
        return a.copy()
    padded = np.pad(a, r, mode="edge")
    h, w = a.shape
    rows = np.zeros((h + 2 * r, w))
    for dx in range(k):
        rows += padded[:, dx:dx + w]
    out = np.zeros((h, w))
    for dy in range(k):
        out += rows[dy:dy + h]
    return out / (k * k)


def percentile(values, p: float) -> float:
    """Linear-interpolation percentile, ``p`` given as a fraction.

    Sorted order statistics are indexed at ``h = p * (n - 1)`` and the result
    interpolates between ``floor(h)`` and ``ceil(h)``.
    """
    a = np.asarray(values, dtype=np.float64).ravel()
    n = a.size
    if n == 0:
        raise ValidationError("percentile of an empty set")
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p must be in [0, 1], got {p}")
    h = p * (n - 1)
    lo = int(np.floor(h))
    hi = min(lo + 1, n - 1)
    part = np.partition(a, [lo, hi])
    frac = h - lo
    return float(part[lo] + frac * (part[hi] - part[lo]))


def hsv_to_bgr(h, s, v) -> np.ndarray:
    """Hexcone HSV to BGR. Hue in degrees; returns ``(..., 3)`` in [0, 1]."""
    h = np.mod(np.asarray(h, dtype=np.float64), 360.0)
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    h, s, v = np.broadcast_arrays(h, s, v)
    chroma = v * s
    hp = h / 60.0
    sector = np.floor(hp).astype(np.intp) % 6
    x = chroma * (1.0 - np.abs(np.mod(hp, 2.0) - 1.0))
    zero = np.zeros_like(chroma)
    # (r, g, b) before adding the lightness offset, one row per sector
    r = np.choose(sector, [chroma, x, zero, zero, x, chroma])
    g = np.choose(sector, [x, chroma, chroma, x, zero, zero])
    b = np.choose(sector, [zero, zero, x, chroma, chroma, x])
    m = v - chroma
    out = np.stack([b + m, g + m, r + m], axis=-1)
    return np.clip(out, 0.0, 1.0)


def bgr_to_hsv(bgr: np.ndarray):
    """Inverse of :func:`hsv_to_bgr`; returns ``(hue_deg, s, v)`` arrays.

    Achromatic pixels get hue 0.
    """
    bgr = np.asarray(bgr, dtype=np.float64)
    b, g, r = bgr[..., 0], bgr[..., 1], bgr[..., 2]
    v = np.max(bgr, axis=-1)
    c = v - np.min(bgr, axis=-1)
    safe = np.where(c > 0, c, 1.0)
    hue = np.where(
        v == r,
        np.mod((g - b) / safe, 6.0),
        np.where(v == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    hue = np.where(c > 0, hue * 60.0, 0.0)
    hue = np.mod(hue, 360.0)
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)
    return hue, s, v


def rgb_to_gray(frame: np.ndarray, channel_order: str = "rgb") -> np.ndarray:
    """Rec.601 luma of a ``(..., 3)`` frame."""
    frame = np.asarray(frame)
    if frame.shape[-1] != 3:
        raise ValidationError("rgb_to_gray expects a 3-channel frame")
    if channel_order == "bgr":
        frame = frame[..., ::-1]
    f = frame.astype(np.float64)
    return (0.299 * f[..., 0] + 0.587 * f[..., 1] + 0.114 * f[..., 2]).astype(FLOAT)


def quantize(values: np.ndarray) -> np.ndarray:
    """Map [0, 1] intensities to uint8 with round-half-up."""
    return np.floor(np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def dequantize(values: np.ndarray) -> np.ndarray:
    return (np.asarray(values, dtype=FLOAT) / FLOAT(255.0)).astype(FLOAT)
