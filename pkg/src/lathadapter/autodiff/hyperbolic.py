"""Differentiable twins of :mod:`lathadapter.geometry` built from tape primitives.

Forward values agree with the numpy versions to rounding; boundary clamps
are reported to the same counter.
"""
import numpy as np

from .. import geometry
from ..errors import DomainError
from . import tape as ad
from .tape import Var, value_of


def _needs_grad(x):
    return isinstance(x, Var) and x.requires_grad


def project(x, c):
    bound = geometry.max_norm(c)
    n = ad.norm(x, keepdims=True)
    over = value_of(n) > bound
    if not np.any(over):
        return x
    geometry.record_clamps(np.count_nonzero(over))
    return ad.mul(x, ad.div(bound, ad.maximum(n, bound)))


def exp_map0(x, c):
    xv = value_of(x)
    if not np.all(np.isfinite(xv)):
        raise DomainError("x contains non-finite values")
    if not _needs_grad(x):
        return geometry.exp_map0(xv, c)
    if np.any(np.linalg.norm(xv, axis=-1) < geometry.MIN_NORM):
        raise DomainError("exp_map0 is not differentiable through a zero vector here")
    s = ad.scale(ad.norm(x, keepdims=True), np.sqrt(c))
    return project(ad.mul(ad.div(ad.tanh(s), s), x), c)


def mobius_add(u, z, c):
    uz = ad.dot(u, z, keepdims=True)
    u2 = ad.dot(u, u, keepdims=True)
    z2 = ad.dot(z, z, keepdims=True)
    two_c_uz = ad.scale(uz, 2.0 * c)
    coef_u = ad.add(ad.add(1.0, two_c_uz), ad.scale(z2, c))
    coef_z = ad.sub(1.0, ad.scale(u2, c))
    num = ad.add(ad.mul(coef_u, u), ad.mul(coef_z, z))
    den = ad.add(ad.add(1.0, two_c_uz), ad.scale(ad.mul(u2, z2), c * c))
    return project(ad.div(num, den), c)


def hyp_dist(u, z, c):
    neg_u = ad.scale(u, -1.0) if isinstance(u, Var) else -np.asarray(u, dtype=np.float64)
    w = mobius_add(neg_u, z, c)
    sc = np.sqrt(c)
    arg = ad.scale(ad.norm(w), sc)
    limit = 1.0 - geometry.EPS_BOUNDARY
    over = value_of(arg) > limit
    if np.any(over):
        geometry.record_clamps(np.count_nonzero(over))
        arg = ad.clip(arg, hi=limit)
    return ad.scale(ad.arctanh(arg), 2.0 / sc)


def pairwise_dist(U, Z, c):
    """``(n, m)`` distances between rows of ``U`` and rows of ``Z``."""
    return hyp_dist(ad.expand_dims(U, 1), ad.expand_dims(Z, 0), c)
