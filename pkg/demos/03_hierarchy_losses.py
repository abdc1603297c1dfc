"""
Triplets, lowest common ancestors and hierarchy hinges
======================================================

Images close to each other in the ball form positive pairs. The attribute
that best covers a pair (smallest worst-case distance) is its lowest common
ancestor; a triplet's ancestor must also cover the negative. The hinge loss
asks positives to sit nearer their pair ancestor and the negative nearer
the triplet ancestor.
"""
import numpy as np

from lathadapter import geometry as G
from lathadapter import hhl

c, sigma = 0.1, 0.1

# three images on a line and two candidate ancestors
V = np.array([[0.5, 0.0], [0.6, 0.0], [-0.5, 0.0]])
A = np.array([[0.55, 0.0], [0.0, 0.0]])

trip = hhl.mine_triplets(V, k=1, c=c, max_per_anchor=None)
print("mined triplets (anchor, positive, negative):\n", trip)

pair, _ = hhl.select_lca_pair(V[0], V[1], A, c)
whole, _ = hhl.select_lca_triplet(V[0], V[1], V[2], A, c)
print(f"pair LCA = attribute {pair}, triplet LCA = attribute {whole}")

loss = hhl.loss_image_attribute(np.array([[0, 1, 2]]), V, A, sigma, c)
print("image-attribute loss for the well-placed triplet:", float(loss))

# with a single ancestor both LCAs coincide, so each hinge misses by sigma
bad = hhl.loss_image_attribute(np.array([[0, 1, 2]]), V, A[:1], sigma, c)
print("single-ancestor loss (3 * sigma):", float(bad))

# Gumbel noise makes the choice stochastic but seeded
rng = np.random.default_rng(3)
anc = G.exp_map0(rng.normal(size=(6, 2)), c)
picks = [hhl.select_lca_pair(V[0], V[1], anc, c, gumbel=True, rng_seed=s)[0] for s in range(12)]
print("noisy picks over 12 seeds:", picks)
print("noise-free pick:", hhl.select_lca_pair(V[0], V[1], anc, c)[0])
