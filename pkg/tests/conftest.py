import numpy as np
import pytest

ACCEPTANCE_LINES = []


def textured(shape=(128, 128), seed=0, smooth=1.0):
    """Random texture in [0, 1], optionally Gaussian-smoothed (wraps around)."""
    rng = np.random.default_rng(seed)
    img = rng.random(shape)
    if smooth:
        # FFT blur keeps the texture periodic so np.roll translations are exact
        ky = np.fft.fftfreq(shape[0])[:, None]
        kx = np.fft.fftfreq(shape[1])[None, :]
        img = np.real(np.fft.ifft2(np.fft.fft2(img) * np.exp(-2 * (np.pi * smooth) ** 2 * (kx ** 2 + ky ** 2))))
    img = (img - img.min()) / (img.max() - img.min())
    return img.astype(np.float32)


def translate(img, tx, ty):
    """Content moves by (+tx, +ty) pixels, with wraparound."""
    return np.roll(img, (ty, tx), axis=(0, 1))


def interior(a, margin=16):
    return a[margin:-margin, margin:-margin]


def mean_epe(flow, truth, margin=16):
    f = interior(flow, margin)
    return float(np.hypot(f[..., 0] - truth[0], f[..., 1] - truth[1]).mean())


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
