"""
Poincare ball basics
====================

Tangent vectors are wrapped onto the ball with the exponential map at the
origin. Points never reach the boundary, distances blow up near it, and at
vanishing curvature the ball distance approaches twice the Euclidean one.
"""
import numpy as np

from lathadapter import geometry as G

c = 0.1
print(f"ball radius 1/sqrt(c) = {1 / np.sqrt(c):.6f}")

# growing tangent vectors saturate just inside the boundary
for r in (0.5, 2.0, 10.0, 1e3, 1e300):
    y = G.exp_map0(np.array([r, 0.0]), c)
    print(f"|x| = {r:<8g} -> |exp_map0(x)| = {np.linalg.norm(y):.12f}")

# Mobius addition has the origin as identity and -u as left inverse
u = G.exp_map0(np.array([0.4, -1.2, 0.3]), c)
print("u (+) 0   =", G.mobius_add(u, np.zeros(3), c))
print("-u (+) u  =", G.mobius_add(-u, u, c))

# distances grow quickly towards the rim
origin = np.zeros(2)
for frac in (0.1, 0.5, 0.9, 0.99, 0.999):
    p = np.array([frac / np.sqrt(c), 0.0])
    print(f"point at {frac:5.3f} of the radius: distance from origin {G.hyp_dist(origin, p, c):8.4f}")

# flat limit
a, b = np.array([0.3, 0.1]), np.array([-0.2, 0.05])
print("flat-limit deviation at c=1e-8:", G.flat_limit_check(a, b, 1e-8))

# the same through the value-type wrapper
p = G.BallPoint.from_tangent(np.array([1.0, 0.0]), c)
q = G.BallPoint.from_tangent(np.array([0.0, 1.0]), c)
print(f"BallPoint distance {p.dist(q):.6f}, clamp events so far {G.clamp_events()}")
