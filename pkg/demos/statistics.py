"""Behavioural statistics on a simulated response log.

Twenty-two simulated participants classify clips under three conditions.
The report mirrors a typical results section: accuracy mean and SD, a
repeated-measures ANOVA, a Friedman test, and paired and Welch t tests
split by block order.
"""
# %% Simulate trials
import numpy as np

from afv.io import ResponseRow
from afv.metrics import transfer_score
from afv.pipeline import analyze_responses

rng = np.random.default_rng(3)
p_correct = {"UCF5": 0.98, "AFD5": 0.84, "AFF5": 0.79}
rows = []
for i in range(22):
    skill = rng.normal(0, 0.03)
    order = "dense_first" if i % 2 else "dots_first"
    for cond, p in p_correct.items():
        for t in range(40):
            label = int(rng.integers(5))
            ok = rng.random() < min(p + skill, 1.0)
            rows.append(ResponseRow(f"S{i:02d}", cond, t, label, label if ok else (label + 1) % 5, ok, None, order))

# %% Full report
kv, text = analyze_responses(rows, pair=("AFD5", "AFF5"))
print(text)

# %% Transfer Score for a model scoring 0.6839 and 0.6425 on the two stimulus sets
print(f"Transfer Score = {transfer_score(0.6839, 0.6425):.4f}")
