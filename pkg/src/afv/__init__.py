"""Appearance-free action video toolkit.

Dense flow estimation, coherence-gated HSV motion encoding, dense-noise and
random-dot stimulus synthesis, and the scoring/statistics used to evaluate
recognition on such stimuli.
"""
from .core import FrameSequence, bilinear_sample, box_filter, hsv_to_bgr, percentile, rgb_to_gray
from .encoding import (
    NormalizationConfig, compute_reference_scale, encode_hsv_video, flip_horizontal_with_hue_remap,
    flow_to_hue, pre_gate_value,
)
from .farneback import FlowParams, estimate_flow, estimate_video_flow
from .gate import GateParams, GateState, coherence, ema_update, gate_video, magnitude_term, unit_flow
from .stimuli import advance_dots, init_dots, render_dots, synthesize_dot_video, synthesize_noise_video

__version__ = "0.1.0"

__all__ = [
    "FrameSequence", "bilinear_sample", "box_filter", "hsv_to_bgr", "percentile", "rgb_to_gray",
    "NormalizationConfig", "compute_reference_scale", "encode_hsv_video",
    "flip_horizontal_with_hue_remap", "flow_to_hue", "pre_gate_value",
    "FlowParams", "estimate_flow", "estimate_video_flow",
    "GateParams", "GateState", "coherence", "ema_update", "gate_video", "magnitude_term", "unit_flow",
    "advance_dots", "init_dots", "render_dots", "synthesize_dot_video", "synthesize_noise_video",
]
