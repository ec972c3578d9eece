"""Dense two-frame optical flow by Farnebäck polynomial expansion.

Each pyramid level approximates the neighbourhood of every pixel by a
quadratic ``f(p) ~ p^T A p + b^T p + c`` fitted with a Gaussian applicability
window. If the second frame is the first one shifted by ``d`` then
``b2 = b1 - 2 A d``, which gives a per-pixel linear equation in ``d``. The
equations are pooled over a box window and solved by 2x2 least squares,
starting from the (upsampled) estimate of the next coarser level.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FLOAT, FrameSequence, box_filter, rgb_to_gray
from .errors import ParameterError, ValidationError

__all__ = ["FlowParams", "estimate_flow", "estimate_video_flow", "rgb_to_gray", "polynomial_expansion"]


@dataclass(frozen=True)
class FlowParams:
    pyramid_scale: float = 0.5
    levels: int = 3
    window: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.2

    def __post_init__(self):
        if not 0.0 < self.pyramid_scale < 1.0:
            raise ParameterError("pyramid_scale must lie in (0, 1)")
        for name in ("levels", "window", "iterations", "poly_n"):
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"{name} must be >= 1")
        if self.window % 2 == 0 or self.poly_n % 2 == 0:
            raise ParameterError("window and poly_n must be odd")
        if self.poly_sigma <= 0:
            raise ParameterError("poly_sigma must be positive")


def _correlate1d(a: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    r = len(kernel) // 2
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r, r)
    padded = np.pad(a, pad, mode="edge")
    n = a.shape[axis]
    out = np.zeros_like(a, dtype=np.float64)
    for i, kv in enumerate(kernel):
        out += kv * np.take(padded, np.arange(i, i + n), axis=axis)
    return out


def _gaussian_kernel(sigma: float, radius: int | None = None) -> np.ndarray:
    if radius is None:
        radius = max(1, int(np.ceil(3.0 * sigma)))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def _gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    k = _gaussian_kernel(sigma)
    return _correlate1d(_correlate1d(img, k, 0), k, 1)


def polynomial_expansion(img: np.ndarray, poly_n: int, poly_sigma: float) -> np.ndarray:
    """Per-pixel quadratic fit coefficients.

    Returns ``(H, W, 5)`` holding ``(a_xx, a_xy, a_yy, b_x, b_y)`` where the
    local signal is ``a_xx x^2 + 2 a_xy x y + a_yy y^2 + b_x x + b_y y + c``.
    """
    img = np.asarray(img, dtype=np.float64)
    r = poly_n // 2
    t = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-0.5 * (t / poly_sigma) ** 2)
    g /= g.sum()
    k0, k1, k2 = g, g * t, g * t * t

    # correlations with g(x)g(y) * {1, x, y, x^2, y^2, xy}; axis 1 is x
    rows0 = _correlate1d(img, k0, 0)
    rows1 = _correlate1d(img, k1, 0)
    rows2 = _correlate1d(img, k2, 0)
    c = np.stack(
        [
            _correlate1d(rows0, k0, 1),
            _correlate1d(rows0, k1, 1),
            _correlate1d(rows1, k0, 1),
            _correlate1d(rows0, k2, 1),
            _correlate1d(rows2, k0, 1),
            _correlate1d(rows1, k1, 1),
        ],
        axis=-1,
    )

    xx, yy = np.meshgrid(t, t)
    basis = np.stack([np.ones_like(xx), xx, yy, xx * xx, yy * yy, xx * yy], axis=-1).reshape(-1, 6)
    w = np.outer(g, g).ravel()
    gram = basis.T @ (basis * w[:, None])
    coef = c @ np.linalg.inv(gram).T

    out = np.empty(img.shape + (5,))
    out[..., 0] = coef[..., 3]
    out[..., 1] = 0.5 * coef[..., 5]
    out[..., 2] = coef[..., 4]
    out[..., 3] = coef[..., 1]
    out[..., 4] = coef[..., 2]
    return out


def _resize(img: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resize with pixel-centre alignment and edge clamping."""
    h, w = img.shape[:2]
    nh, nw = shape
    ys = np.clip((np.arange(nh) + 0.5) * (h / nh) - 0.5, 0, h - 1)
    xs = np.clip((np.arange(nw) + 0.5) * (w / nw) - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    if img.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    top = img[y0][:, x0] + fx * (img[y0][:, x1] - img[y0][:, x0])
    bot = img[y1][:, x0] + fx * (img[y1][:, x1] - img[y1][:, x0])
    return top + fy * (bot - top)


def _warp_coefficients(coeffs: np.ndarray, flow: np.ndarray) -> np.ndarray:
    h, w = coeffs.shape[:2]
    gy, gx = np.mgrid[0:h, 0:w].astype(np.float64)
    xs = np.clip(gx + flow[..., 0], 0, w - 1)
    ys = np.clip(gy + flow[..., 1], 0, h - 1)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    top = coeffs[y0, x0] + fx * (coeffs[y0, x1] - coeffs[y0, x0])
    bot = coeffs[y1, x0] + fx * (coeffs[y1, x1] - coeffs[y1, x0])
    return top + fy * (bot - top)


def _refine(r1: np.ndarray, r2: np.ndarray, flow: np.ndarray, window: int, iterations: int) -> np.ndarray:
    for _ in range(iterations):
        r2w = _warp_coefficients(r2, flow)
        a11 = 0.5 * (r1[..., 0] + r2w[..., 0])
        a12 = 0.5 * (r1[..., 1] + r2w[..., 1])
        a22 = 0.5 * (r1[..., 2] + r2w[..., 2])
        dx, dy = flow[..., 0], flow[..., 1]
        bx = -0.5 * (r2w[..., 3] - r1[..., 3]) + a11 * dx + a12 * dy
        by = -0.5 * (r2w[..., 4] - r1[..., 4]) + a12 * dx + a22 * dy

        g11 = box_filter(a11 * a11 + a12 * a12, window)
        g12 = box_filter(a12 * (a11 + a22), window)
        g22 = box_filter(a12 * a12 + a22 * a22, window)
        h1 = box_filter(a11 * bx + a12 * by, window)
        h2 = box_filter(a12 * bx + a22 * by, window)

        det = g11 * g22 - g12 * g12
        # tiny ridge keeps textureless regions finite
        inv = 1.0 / (det + 1e-12 + 1e-6 * (g11 + g22) ** 2)
        flow = np.stack([(g22 * h1 - g12 * h2) * inv, (g11 * h2 - g12 * h1) * inv], axis=-1)
    return flow


def _as_gray(frame: np.ndarray, channel_order: str = "rgb") -> np.ndarray:
    frame = np.asarray(frame)
    if frame.ndim == 3 and frame.shape[-1] == 3:
        frame = rgb_to_gray(frame, channel_order)
    if frame.ndim != 2:
        raise ValidationError(f"expected a single frame, got shape {frame.shape}")
    return frame.astype(np.float64)


def _level_shapes(shape: tuple[int, int], params: FlowParams) -> list[tuple[int, int]]:
    shapes = []
    for lvl in range(params.levels):
        s = params.pyramid_scale ** lvl
        shapes.append((max(1, int(round(shape[0] * s))), max(1, int(round(shape[1] * s)))))
    return shapes


def estimate_flow(prev: np.ndarray, next: np.ndarray, params: FlowParams = FlowParams(),
                  channel_order: str = "rgb") -> np.ndarray:
    """Flow mapping ``prev`` onto ``next`` as an ``(H, W, 2)`` float32 array."""
    f0 = _as_gray(prev, channel_order)
    f1 = _as_gray(next, channel_order)
    if f0.shape != f1.shape:
        raise ValidationError(f"frame shapes differ: {f0.shape} vs {f1.shape}")
    shapes = _level_shapes(f0.shape, params)
    if min(shapes[-1]) < params.poly_n:
        raise ParameterError(
            f"coarsest level {shapes[-1]} is smaller than poly_n={params.poly_n}; reduce levels"
        )

    flow = None
    for lvl in range(params.levels - 1, -1, -1):
        shape = shapes[lvl]
        if lvl == 0:
            i0, i1 = f0, f1
        else:
            sigma = (1.0 / params.pyramid_scale ** lvl - 1.0) * 0.5
            i0 = _resize(_gaussian_blur(f0, sigma), shape)
            i1 = _resize(_gaussian_blur(f1, sigma), shape)
        if flow is None:
            flow = np.zeros(shape + (2,))
        else:
            prev_shape = flow.shape[:2]
            flow = _resize(flow, shape)
            flow[..., 0] *= shape[1] / prev_shape[1]
            flow[..., 1] *= shape[0] / prev_shape[0]
        r1 = polynomial_expansion(i0, params.poly_n, params.poly_sigma)
        r2 = polynomial_expansion(i1, params.poly_n, params.poly_sigma)
        flow = _refine(r1, r2, flow, params.window, params.iterations)

    flow = np.nan_to_num(flow, nan=0.0, posinf=0.0, neginf=0.0)
    return flow.astype(FLOAT)


def estimate_video_flow(video: FrameSequence, params: FlowParams = FlowParams()) -> list[np.ndarray]:
    """T-1 flow fields for a T-frame video; field i maps frame i to i+1."""
    if len(video) < 2:
        raise ValidationError("flow estimation needs at least 2 frames")
    gray = [_as_gray(f, video.channel_order) for f in video.frames]
    return [estimate_flow(gray[i], gray[i + 1], params) for i in range(len(gray) - 1)]
