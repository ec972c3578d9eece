import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afv.core import FrameSequence, bgr_to_hsv, quantize
from afv.encoding import (
    NormalizationConfig, compute_reference_scale, decode_hsv_bytes, encode_hsv_video,
    flip_horizontal_with_hue_remap, flow_magnitude, flow_to_hue, hsv_bytes, mirror_flow,
    pre_gate_value, reference_scales,
)
from afv.errors import ParameterError, ValidationError
from afv.gate import GateParams


def smooth_random_flow(rng, shape=(24, 32), scale=3.0):
    coarse = rng.normal(scale=scale, size=(shape[0] // 8 + 2, shape[1] // 8 + 2, 2))
    ys = np.linspace(0, coarse.shape[0] - 1.001, shape[0])
    xs = np.linspace(0, coarse.shape[1] - 1.001, shape[1])
    y0, x0 = ys.astype(int), xs.astype(int)
    fy, fx = (ys - y0)[:, None, None], (xs - x0)[None, :, None]
    c = coarse
    top = c[y0][:, x0] * (1 - fx) + c[y0][:, x0 + 1] * fx
    bot = c[y0 + 1][:, x0] * (1 - fx) + c[y0 + 1][:, x0 + 1] * fx
    return (top * (1 - fy) + bot * fy + rng.normal(scale=0.3, size=shape + (2,))).astype(np.float32)


class TestReferenceScale:
    def test_examples(self):
        assert compute_reference_scale(6.0, NormalizationConfig(p_train=10, mix_weight=0.5)) == 8.0
        assert compute_reference_scale(123.0, NormalizationConfig(p_train=10, mix_weight=1.0)) == 10.0
        assert compute_reference_scale(0.0, NormalizationConfig(p_train=10, mix_weight=0.0)) == 1e-3

    def test_config_validation(self):
        for bad in [dict(mix_weight=1.5), dict(offset_fraction=1.0), dict(p_train=0)]:
            with pytest.raises(ParameterError):
                NormalizationConfig(**bad)


class TestPreGateValue:
    @pytest.mark.parametrize("d", [1.0, 2.5, 7.3, 0.001])
    def test_at_scale(self, d):
        assert pre_gate_value(np.array(d), d, 0.03) == 0.97

    def test_offset_and_clamp(self):
        d = 4.0
        out = pre_gate_value(np.array([0.03 * d, 5 * d, 0.0]), d, 0.03)
        assert out == pytest.approx([0.0, 1.0, 0.0], abs=1e-15)

    @given(st.floats(0, 100), st.floats(0, 100), st.floats(0.01, 50))
    def test_monotone(self, a, b, d):
        lo, hi = sorted((a, b))
        assert pre_gate_value(np.array(lo), d) <= pre_gate_value(np.array(hi), d)


class TestHue:
    @pytest.mark.parametrize("u,v,h", [(1, 0, 0), (0, 1, 90), (-1, -1, 225), (-1, 0, 180), (0, -2, 270), (0, 0, 0)])
    def test_axes(self, u, v, h):
        assert flow_to_hue(np.array([[[u, v]]], float))[0, 0] == pytest.approx(h)

    @given(st.floats(-10, 10), st.floats(-10, 10))
    def test_range(self, u, v):
        h = flow_to_hue(np.array([[[u, v]]]))[0, 0]
        assert 0 <= h < 360


class TestEncode:
    def test_zero_flow_is_black(self):
        video = encode_hsv_video([np.zeros((8, 8, 2))] * 3, NormalizationConfig())
        assert not video.frames.any() and video.channel_order == "bgr"

    def test_uniform_flow(self):
        # with p_train equal to the frame p95, d_t equals the magnitude exactly
        d = 2.0
        flow = np.zeros((6, 6, 2), np.float32)
        flow[..., 0] = d
        video = encode_hsv_video([flow], NormalizationConfig(p_train=d))
        assert np.allclose(video.frames[0], [0, 0, 0.97], atol=1e-6)

    def test_count(self):
        video = encode_hsv_video([np.ones((4, 4, 2))] * 12, NormalizationConfig())
        assert len(video) == 12

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            encode_hsv_video([np.zeros((4, 4, 2)), np.zeros((4, 5, 2))], NormalizationConfig())

    def test_gate_attenuates(self):
        rng = np.random.default_rng(0)
        flows = [smooth_random_flow(rng) for _ in range(3)]
        cfg = NormalizationConfig(p_train=3.0)
        plain = encode_hsv_video(flows, cfg).frames
        gated = encode_hsv_video(flows, cfg, gate=GateParams()).frames
        assert np.all(gated.max(axis=-1) <= plain.max(axis=-1) + 1e-6)
        assert gated.sum() < plain.sum()

    def test_precomputed_masks(self):
        flows = [np.ones((4, 4, 2))] * 2
        half = encode_hsv_video(flows, NormalizationConfig(), gate=[np.full((4, 4), 0.5)] * 2)
        full = encode_hsv_video(flows, NormalizationConfig())
        assert np.allclose(half.frames, full.frames * 0.5, atol=1e-6)


class TestFlip:
    @pytest.mark.parametrize("h_in,h_out", [(0, 180), (90, 90), (30, 150), (270, 270), (200, 340)])
    def test_hue_examples(self, h_in, h_out):
        from afv.core import hsv_to_bgr
        frame = np.broadcast_to(hsv_to_bgr(h_in, 1.0, 0.8), (1, 2, 2, 3))
        out = flip_horizontal_with_hue_remap(FrameSequence(frame, channel_order="bgr"))
        hue, _, v = bgr_to_hsv(out.frames[0])
        assert np.allclose(hue, h_out, atol=1e-3) and np.allclose(v, 0.8, atol=1e-6)

    def test_mirrors_spatially(self):
        from afv.core import hsv_to_bgr
        frame = np.zeros((1, 2, 3, 3))
        frame[0, 0, 0] = hsv_to_bgr(90, 1, 1)
        out = flip_horizontal_with_hue_remap(FrameSequence(frame, channel_order="bgr"))
        assert out.frames[0, 0, 2].max() > 0.99 and out.frames[0, 0, 0].max() == 0

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2 ** 31), st.booleans())
    def test_commutes_with_flow_mirror(self, seed, gated):
        rng = np.random.default_rng(seed)
        flows = [smooth_random_flow(rng) for _ in range(3)]
        cfg = NormalizationConfig(p_train=2.5)
        gate = GateParams() if gated else None
        a = flip_horizontal_with_hue_remap(encode_hsv_video(flows, cfg, gate=gate))
        b = encode_hsv_video([mirror_flow(f) for f in flows], cfg, gate=gate)
        diff = np.abs(quantize(a.frames).astype(int) - quantize(b.frames).astype(int))
        assert diff.max() <= 1


class TestHSVBytes:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        flow = rng.normal(scale=3, size=(16, 16, 2))
        cfg = NormalizationConfig(p_train=4.0)
        d = reference_scales([flow], cfg)[0]
        mag = flow_magnitude(flow)
        value = pre_gate_value(mag, d)
        packed = hsv_bytes(flow_to_hue(flow), value)
        rec = decode_hsv_bytes(packed, d)
        ok = (value > 0.05) & (value < 1.0)
        dh = np.abs(flow_to_hue(rec) - flow_to_hue(flow))
        dh = np.minimum(dh, 360 - dh)
        assert dh[ok].max() <= 2.0
        assert np.abs(flow_magnitude(rec) - mag)[ok].max() <= d * 0.5 / 255 + 1e-5

    def test_hue_byte_range(self):
        packed = hsv_bytes(np.array([0.0, 359.0, 179.0, 181.0]), np.ones(4))
        assert list(packed[:, 0]) == [0, 0, 90, 91]
        assert packed[:, 1].tolist() == [255] * 4
