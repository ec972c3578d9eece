"""HSV rendering of flow fields.

Hue carries direction (0 deg = rightward, 90 deg = downward in image
coordinates), saturation is fixed, and value carries magnitude relative to a
per-frame reference scale ``d_t``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FrameSequence, bgr_to_hsv, check_flow, flow_magnitude, hsv_to_bgr, percentile
from .errors import ParameterError, ValidationError
from .gate import GateParams, gate_video


@dataclass(frozen=True)
class NormalizationConfig:
    p_train: float = 1.0
    mix_weight: float = 0.5
    offset_fraction: float = 0.03
    saturation: float = 1.0
    eps_scale: float = 1e-3

    def __post_init__(self):
        if not 0.0 <= self.mix_weight <= 1.0:
            raise ParameterError("mix_weight must lie in [0, 1]")
        if not 0.0 <= self.offset_fraction < 1.0:
            raise ParameterError("offset_fraction must lie in [0, 1)")
        if self.p_train <= 0:
            raise ParameterError("p_train must be positive")
        if not 0.0 <= self.saturation <= 1.0:
            raise ParameterError("saturation must lie in [0, 1]")
        if self.eps_scale <= 0:
            raise ParameterError("eps_scale must be positive")


def compute_reference_scale(frame_p95: float, config: NormalizationConfig) -> float:
    """``w * p_train + (1 - w) * frame_p95``, floored at ``eps_scale``."""
    if frame_p95 < 0:
        raise ValidationError("frame_p95 must be >= 0")
    w = config.mix_weight
    d = w * config.p_train + (1.0 - w) * frame_p95
    return max(d, config.eps_scale)


def reference_scales(flows, config: NormalizationConfig) -> list[float]:
    return [compute_reference_scale(percentile(flow_magnitude(f), 0.95), config) for f in flows]


def pre_gate_value(magnitude: np.ndarray, d_t: float, offset_fraction: float = 0.03) -> np.ndarray:
    if d_t <= 0:
        raise ParameterError("d_t must be positive")
    # m/d - o rather than (m - o*d)/d: exact at m == d
    m = np.asarray(magnitude, dtype=np.float64)
    return np.clip(m / d_t - offset_fraction, 0.0, 1.0)


def flow_to_hue(flow: np.ndarray) -> np.ndarray:
    """Direction in degrees, [0, 360), clockwise on screen (y down)."""
    flow = check_flow(flow).astype(np.float64)
    hue = np.degrees(np.arctan2(flow[..., 1], flow[..., 0]))
    hue = np.where(hue < 0, hue + 360.0, hue)
    # -0.0 + 360 style rounding can produce exactly 360
    return np.where(hue >= 360.0, 0.0, hue)


def encode_frame(flow: np.ndarray, d_t: float, config: NormalizationConfig,
                 mask: np.ndarray | None = None) -> np.ndarray:
    value = pre_gate_value(flow_magnitude(flow), d_t, config.offset_fraction)
    if mask is not None:
        value = np.clip(value * mask, 0.0, 1.0)
    return hsv_to_bgr(flow_to_hue(flow), config.saturation, value)


def encode_hsv_video(flows, config: NormalizationConfig, gate=None, frame_rate: float = 25.0) -> FrameSequence:
    """Render flow fields as a BGR motion video, one frame per field.

    ``gate`` may be ``None`` (no attenuation), a :class:`GateParams` (masks
    are computed with the same per-frame ``d_t``), or a precomputed list of
    masks.
    """
    flows = [check_flow(f) for f in flows]
    if not flows:
        raise ValidationError("no flow fields to encode")
    shape = flows[0].shape
    for i, f in enumerate(flows):
        if f.shape != shape:
            raise ValidationError(f"flow {i} has shape {f.shape}, expected {shape}")
    d_ts = reference_scales(flows, config)
    if isinstance(gate, GateParams):
        masks = gate_video(flows, d_ts, gate)
    elif gate is None:
        masks = [None] * len(flows)
    else:
        masks = list(gate)
        if len(masks) != len(flows):
            raise ValidationError(f"{len(masks)} masks for {len(flows)} flows")
    frames = np.stack([encode_frame(f, d, config, m) for f, d, m in zip(flows, d_ts, masks)])
    return FrameSequence(frames, frame_rate=frame_rate, channel_order="bgr")


def remap_hue_for_flip(hue: np.ndarray) -> np.ndarray:
    return np.mod(180.0 - np.asarray(hue, dtype=np.float64), 360.0)


def flip_horizontal_with_hue_remap(encoded: FrameSequence) -> FrameSequence:
    """Mirror an encoded motion video left-right, keeping hue meaningful.

    Mirroring turns a direction ``(u, v)`` into ``(-u, v)``, i.e. hue ``h``
    into ``180 - h``.
    """
    if encoded.channels != 3:
        raise ValidationError("hue remap needs a 3-channel encoded video")
    frames = encoded.frames
    if encoded.channel_order == "rgb":
        frames = frames[..., ::-1]
    mirrored = frames[:, :, ::-1, :]
    hue, s, v = bgr_to_hsv(mirrored)
    out = hsv_to_bgr(remap_hue_for_flip(hue), s, v)
    if encoded.channel_order == "rgb":
        out = out[..., ::-1]
    return FrameSequence(out, frame_rate=encoded.frame_rate, channel_order=encoded.channel_order)


def mirror_flow(flow: np.ndarray) -> np.ndarray:
    """Flow of the left-right mirrored video."""
    out = check_flow(flow)[:, ::-1, :].copy()
    out[..., 0] = -out[..., 0]
    return out


def hsv_bytes(hue: np.ndarray, value: np.ndarray, saturation: float = 1.0) -> np.ndarray:
    """Pack hue/value maps into 8-bit HSV triplets.

    Hue is stored in half-degrees (``round(h / 2) mod 180``), saturation and
    value as ``round(255 * x)``.
    """
    hb = np.mod(np.floor(np.asarray(hue, dtype=np.float64) / 2.0 + 0.5), 180).astype(np.uint8)
    vb = np.floor(np.clip(value, 0, 1) * 255.0 + 0.5).astype(np.uint8)
    sb = np.full_like(hb, int(round(saturation * 255)))
    return np.stack([hb, sb, vb], axis=-1)


def decode_hsv_bytes(packed: np.ndarray, d_t: float, offset_fraction: float = 0.03) -> np.ndarray:
    """Recover an ungated flow field from :func:`hsv_bytes` output.

    Magnitudes are only recoverable where the value channel is strictly
    inside (0, 1); elsewhere the result is a lower/upper bound.
    """
    packed = np.asarray(packed)
    hue = np.radians(packed[..., 0].astype(np.float64) * 2.0)
    value = packed[..., 2].astype(np.float64) / 255.0
    mag = np.where(value > 0, (value + offset_fraction) * d_t, 0.0)
    return np.stack([mag * np.cos(hue), mag * np.sin(hue)], axis=-1).astype(np.float32)
