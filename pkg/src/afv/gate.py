"""Coherence gate: suppress locally incoherent or weak motion.

Pipeline per frame::

    unit vectors -> box-filtered mean -> resultant length (coherence)
    coherence -> soft threshold            -> w_c
    magnitude / d_t -> clamp + hard floor  -> q
    g_inst = q * w_c ** beta
    g_t    = lam * g_{t-1} + (1 - lam) * g_inst     (g_1 = g_1_inst)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import box_filter, check_flow, flow_magnitude
from .errors import ParameterError, StateError, ValidationError


@dataclass(frozen=True)
class GateParams:
    epsilon: float = 1e-6
    window: int = 9
    tau: float = 0.30
    r_min: float = 0.02
    beta: float = 1.0
    lam: float = 0.80

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ParameterError("epsilon must be positive")
        if self.window < 1 or self.window % 2 == 0:
            raise ParameterError("window must be a positive odd integer")
        if not 0.0 <= self.tau < 1.0:
            raise ParameterError("tau must lie in [0, 1)")
        if self.r_min < 0:
            raise ParameterError("r_min must be >= 0")
        if self.beta < 0:
            raise ParameterError("beta must be >= 0")
        if not 0.0 <= self.lam < 1.0:
            raise ParameterError("lam must lie in [0, 1)")


@dataclass(frozen=True)
class GateState:
    """Temporal state of one video's gate: the last smoothed mask."""

    g_prev: Optional[np.ndarray] = None

    @property
    def initialized(self) -> bool:
        return self.g_prev is not None


def unit_flow(flow: np.ndarray, epsilon: float = 1e-6):
    """``f / (|f| + eps)`` split into ``(nx, ny)``."""
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    flow = check_flow(flow).astype(np.float64)
    denom = flow_magnitude(flow) + epsilon
    return flow[..., 0] / denom, flow[..., 1] / denom


def coherence(nx: np.ndarray, ny: np.ndarray, k: int = 9) -> np.ndarray:
    """Length of the k x k mean unit vector."""
    return np.hypot(box_filter(nx, k), box_filter(ny, k))


def soft_threshold_coherence(c: np.ndarray, tau: float = 0.30) -> np.ndarray:
    if not 0.0 <= tau < 1.0:
        raise ParameterError("tau must lie in [0, 1)")
    return np.clip((np.asarray(c, dtype=np.float64) - tau) / (1.0 - tau), 0.0, 1.0)


def magnitude_term(magnitude: np.ndarray, d_t: float, r_min: float = 0.02) -> np.ndarray:
    """Magnitude relative to ``d_t``, clamped to [0, 1], zero below ``r_min``.

    The floor is applied as ``m >= r_min * d_t`` so the cut sits exactly at
    the stored threshold value.
    """
    if d_t <= 0:
        raise ParameterError("d_t must be positive")
    m = np.asarray(magnitude, dtype=np.float64)
    q = np.clip(m / d_t, 0.0, 1.0)
    return np.where(m >= r_min * d_t, q, 0.0)


def instantaneous_mask(q: np.ndarray, w_c: np.ndarray, beta: float = 1.0) -> np.ndarray:
    # numpy defines 0.0 ** 0 == 1, so beta=0 switches coherence weighting off
    if beta < 0:
        raise ParameterError("beta must be >= 0")
    return np.asarray(q, dtype=np.float64) * np.power(np.asarray(w_c, dtype=np.float64), beta)


def ema_update(state: GateState, g_inst: np.ndarray, lam: float = 0.80):
    """Return ``(new_state, g_t)``; the first call adopts ``g_inst`` as is."""
    g_inst = np.asarray(g_inst, dtype=np.float64)
    if not state.initialized:
        g = g_inst.copy()
    else:
        if state.g_prev.shape != g_inst.shape:
            raise StateError(f"mask shape changed mid-video: {state.g_prev.shape} -> {g_inst.shape}")
        # same value as lam*g_prev + (1-lam)*g_inst, but a constant input
        # is a fixpoint in floating point too
        g = g_inst + lam * (state.g_prev - g_inst)
    return GateState(g), g


def frame_mask(flow: np.ndarray, d_t: float, params: GateParams = GateParams()) -> np.ndarray:
    """Instantaneous mask of one flow field."""
    nx, ny = unit_flow(flow, params.epsilon)
    w_c = soft_threshold_coherence(coherence(nx, ny, params.window), params.tau)
    q = magnitude_term(flow_magnitude(flow), d_t, params.r_min)
    return instantaneous_mask(q, w_c, params.beta)


def gate_video(flows, d_ts, params: GateParams = GateParams()) -> list[np.ndarray]:
    """Smoothed gate mask for every flow field of one video."""
    flows = list(flows)
    d_ts = list(d_ts)
    if len(flows) != len(d_ts):
        raise ValidationError(f"{len(flows)} flows but {len(d_ts)} reference scales")
    state = GateState()
    masks = []
    for flow, d_t in zip(flows, d_ts):
        state, g = ema_update(state, frame_mask(flow, d_t, params), params.lam)
        masks.append(g)
    return masks
