"""Appearance-free stimuli from a flow sequence.

A rotating flow field drives a dense-noise video and a random-dot video.
Single frames of either look like noise; the motion only shows up between
frames.
"""
# %% Rotation about the image centre
import tempfile
from pathlib import Path

import numpy as np

from afv import io as afv_io
from afv.farneback import estimate_flow
from afv.metrics import endpoint_error
from afv.stimuli import simulate_dots, synthesize_dot_video, synthesize_noise_video

h, w, n = 96, 96, 12
gy, gx = np.mgrid[0:h, 0:w].astype(np.float32)
omega = 0.03  # radians per frame
rot = np.stack([-omega * (gy - h / 2), omega * (gx - w / 2)], axis=-1)
flows = [rot] * n

# %% Dense noise: warping carries the noise pattern along the flow
noise = synthesize_noise_video(flows, seed=7)
est = estimate_flow(noise.frames[3], noise.frames[4])
mask = np.zeros((h, w))
mask[12:-12, 12:-12] = 1
print(f"noise video {noise.frames.shape}, re-estimated EPE {endpoint_error(est, rot, mask)[0]:.3f} px")

# %% Random dots: 500 dots, 8-frame lifetime, respawn on expiry or exit
pops = simulate_dots(flows, seed=7)
respawns = [int((p.ages == 0).sum()) for p in pops[1:]]
print("dots per frame:", {p.count for p in pops}, " respawns per frame:", respawns)
dots = synthesize_dot_video(flows, seed=7)

# %% Save both as PNG frame directories
out = Path(tempfile.mkdtemp(prefix="afv_demo_"))
afv_io.save_frames(noise, out / "noise")
afv_io.save_frames(dots, out / "dots")
print("wrote", len(list((out / "noise").iterdir())), "noise and",
      len(list((out / "dots").iterdir())), "dot frames under", out)
