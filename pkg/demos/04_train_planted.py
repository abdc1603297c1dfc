"""
Training on a planted hierarchy
===============================

A synthetic dataset has four categories, two attribute centres per category
and noisy unit-norm images around the centres. Training learns eight
attribute prompts; afterwards categories sit nearest the origin, attributes
in the middle and images furthest out.
"""
import numpy as np

from lathadapter.data import SynthSpec, generate_synthetic, split_indices
from lathadapter.trainer import TrainConfig, evaluate, train

data = generate_synthetic(SynthSpec())
tr, te = split_indices(data.labels, 0.8, seed=7)

cfg = TrainConfig(epochs=100, gumbel=False)


def progress(epoch, bank, report):
    if epoch in (1, 10, 50, 100):
        print(f"epoch {epoch:3d}  total {report.total:.4f}  "
              f"(ecls {report.l_ecls:.3f} hcls {report.l_hcls:.3f} "
              f"va {report.l_va:.3f} at {report.l_at:.3f})")


result = train(cfg, data.text, data.images[tr], data.labels[tr], callback=progress)
report = evaluate(result.checkpoint, data.text, data.images[te], data.labels[te])
print(f"held-out accuracy {report.accuracy:.3f}")
for role in ("category", "attribute", "image"):
    print(f"mean hyperbolic radius of {role:9s} {report.radii[role]:.3f}")

# the learned bank, seen from each attribute's nearest category direction
bank = result.checkpoint.attributes
cos = (bank / np.linalg.norm(bank, axis=1, keepdims=True)) @ (data.text / 0.3).T
print("nearest category per learned attribute:", np.argmax(cos, axis=1))
