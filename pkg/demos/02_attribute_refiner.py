"""
Attribute-aware text refinement
===============================

Category embeddings are nudged towards attributes they resemble. The
affinity is a cosine matrix over the stacked rows, normalised by the sum of
absolute affinities per row.
"""
import numpy as np

from lathadapter.atr import cosine_affinity, refine, stack_features

rng = np.random.default_rng(0)
T = np.eye(4)[:2]                      # two orthogonal categories
A = np.array([[1.0, 0.2, 0.0, 0.0],    # close to category 0
              [0.0, 0.0, 1.0, 0.0],    # unrelated to both
              [-1.0, 0.0, 0.0, 0.0]])  # anti-aligned with category 0

F = stack_features(T, A)
aff = cosine_affinity(F)
np.set_printoptions(precision=3, suppress=True)
print("affinity S:\n", aff.S)
print("degrees D:", aff.D)

for beta in (0.0, 0.1, 0.5):
    print(f"beta={beta}: refined categories\n", refine(T, A, beta))

# attribute order does not matter
perm = rng.permutation(len(A))
print("max change under attribute permutation:",
      np.max(np.abs(refine(T, A[perm], 0.1) - refine(T, A, 0.1))))
