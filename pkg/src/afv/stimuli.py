"""Appearance-free stimulus synthesis from flow fields.

Two stimulus types are produced:

* dense noise: a uniform noise canvas carried through time by backward
  warping with the source flow;
* random dots: a fixed-size population of finite-lifetime dots advected by
  the flow and respawned at random positions when they expire or leave the
  frame.

All randomness comes from an explicitly seeded Philox generator, so a seed
reproduces a video bit for bit on any platform.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .core import FLOAT, FrameSequence, bilinear_sample, check_flow
from .errors import ValidationError

N_DOTS = 500
DOT_LIFETIME = 8


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class DotPopulation:
    positions: np.ndarray  # (N, 2) as (x, y)
    ages: np.ndarray       # (N,) ints in [0, lifetime)
    lifetime: int
    width: int
    height: int
    rng: np.random.Generator

    @property
    def count(self) -> int:
        return len(self.ages)


def _uniform_positions(rng: np.random.Generator, n: int, width: int, height: int) -> np.ndarray:
    u = rng.random((n, 2))
    return u * np.array([width - 1, height - 1], dtype=np.float64)


def init_dots(width: int, height: int, n: int = N_DOTS, lifetime: int = DOT_LIFETIME, seed: int = 0) -> DotPopulation:
    """Uniform positions and uniform ages over ``{0, ..., lifetime-1}``."""
    if width < 1 or height < 1:
        raise ValidationError(f"frame must have positive area, got {width}x{height}")
    if n < 1 or lifetime < 1:
        raise ValidationError("need n >= 1 and lifetime >= 1")
    rng = make_rng(seed)
    positions = _uniform_positions(rng, n, width, height)
    ages = rng.integers(0, lifetime, size=n)
    return DotPopulation(positions, ages, lifetime, width, height, rng)


def advance_dots(pop: DotPopulation, flow: np.ndarray) -> DotPopulation:
    """Move every dot by the flow sampled at its position, then age it.

    Dots whose age reaches the lifetime or that leave
    ``[0, W-1] x [0, H-1]`` are respawned uniformly with age 0.
    """
    flow = check_flow(flow)
    if flow.shape[:2] != (pop.height, pop.width):
        raise ValidationError(f"flow is {flow.shape[1]}x{flow.shape[0]}, dots live on {pop.width}x{pop.height}")
    rng = copy.deepcopy(pop.rng)
    vel = bilinear_sample(flow, pop.positions[:, 0], pop.positions[:, 1])
    pos = pop.positions + vel
    ages = pop.ages + 1
    out = (
        (pos[:, 0] < 0) | (pos[:, 0] > pop.width - 1)
        | (pos[:, 1] < 0) | (pos[:, 1] > pop.height - 1)
    )
    respawn = out | (ages >= pop.lifetime)
    k = int(respawn.sum())
    if k:
        pos[respawn] = _uniform_positions(rng, k, pop.width, pop.height)
        ages[respawn] = 0
    return DotPopulation(pos, ages, pop.lifetime, pop.width, pop.height, rng)


def render_dots(pop: DotPopulation, width: int | None = None, height: int | None = None, radius: int = 0) -> np.ndarray:
    """White dots on black; each dot covers the pixels within ``radius`` of
    its rounded position (a single pixel for radius 0)."""
    width = pop.width if width is None else width
    height = pop.height if height is None else height
    frame = np.zeros((height, width), dtype=FLOAT)
    if pop.count == 0:
        return frame
    cx = np.floor(pop.positions[:, 0] + 0.5).astype(np.intp)
    cy = np.floor(pop.positions[:, 1] + 0.5).astype(np.intp)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dx * dx + dy * dy > radius * radius:
                continue
            x = cx + dx
            y = cy + dy
            ok = (x >= 0) & (x < width) & (y >= 0) & (y < height)
            frame[y[ok], x[ok]] = 1.0
    return frame


def simulate_dots(flows, n: int = N_DOTS, lifetime: int = DOT_LIFETIME, seed: int = 0) -> list[DotPopulation]:
    """Dot populations for every frame: ``len(flows) + 1`` entries."""
    flows = list(flows)
    if not flows:
        raise ValidationError("need at least one flow field")
    h, w = check_flow(flows[0]).shape[:2]
    pops = [init_dots(w, h, n, lifetime, seed)]
    for f in flows:
        pops.append(advance_dots(pops[-1], f))
    return pops


def synthesize_dot_video(flows, n: int = N_DOTS, lifetime: int = DOT_LIFETIME, seed: int = 0,
                         radius: int = 0, frame_rate: float = 25.0) -> FrameSequence:
    pops = simulate_dots(flows, n, lifetime, seed)
    return FrameSequence(np.stack([render_dots(p, radius=radius) for p in pops]), frame_rate=frame_rate)


def warp_backward(frame: np.ndarray, flow: np.ndarray, interpolation: str = "bilinear"):
    """Sample ``frame`` at ``x - flow(x)``; returns ``(warped, valid)``."""
    h, w = frame.shape
    gy, gx = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = gx - flow[..., 0]
    sy = gy - flow[..., 1]
    valid = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    sx = np.clip(sx, 0, w - 1)
    sy = np.clip(sy, 0, h - 1)
    if interpolation == "nearest":
        warped = frame[np.floor(sy + 0.5).astype(np.intp), np.floor(sx + 0.5).astype(np.intp)]
    elif interpolation == "bilinear":
        warped = bilinear_sample(frame, sx, sy)
    else:
        raise ValidationError(f"unknown interpolation {interpolation!r}")
    return warped, valid


def synthesize_noise_video(flows, seed: int = 0, frame_rate: float = 25.0,
                           interpolation: str = "bilinear") -> FrameSequence:
    """Dense-noise video whose inter-frame motion follows ``flows``.

    Pixels whose source falls outside the frame are refilled with fresh
    noise. A full fresh-noise frame is drawn each step whether or not it is
    used, which keeps the random stream independent of the flow content.

    Repeated bilinear resampling at fractional offsets low-pass filters the
    canvas, so the intensity histogram drifts toward 0.5 at a rate that
    depends on the flow. ``interpolation="nearest"`` copies source values
    instead and keeps every frame's marginal distribution uniform.
    """
    flows = [check_flow(f) for f in flows]
    if not flows:
        raise ValidationError("need at least one flow field")
    h, w = flows[0].shape[:2]
    rng = make_rng(seed)
    frames = [rng.random((h, w), dtype=np.float32)]
    for f in flows:
        if f.shape[:2] != (h, w):
            raise ValidationError("flow fields differ in size")
        warped, valid = warp_backward(frames[-1], f, interpolation)
        fresh = rng.random((h, w), dtype=np.float32)
        frames.append(np.where(valid, warped, fresh).astype(FLOAT))
    return FrameSequence(np.stack(frames), frame_rate=frame_rate)
