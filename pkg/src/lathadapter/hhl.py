"""Hyperbolic hierarchical learning: ball projection, triplet mining, LCA
selection and the two hierarchical hinge losses.

Distances are hyperbolic throughout. Triplets are ``(m, 3)`` integer arrays of
``(anchor, positive, negative)`` row indices.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from . import geometry
from .autodiff import hyperbolic as hyp
from .autodiff import value_of
from .errors import HierarchyWarning, UsageError

MAX_TRIPLETS_PER_ANCHOR = 16


class Triplet(NamedTuple):
    anchor: int
    positive: int
    negative: int


@dataclass
class HypBatch:
    v_tilde: object
    t_tilde: object
    a_tilde: object
    c: float


@dataclass
class LcaSelection:
    """Chosen ancestor per triplet for the positive pair and the whole triplet."""

    pair: np.ndarray
    triplet: np.ndarray
    pair_scores: np.ndarray
    triplet_scores: np.ndarray


def embed_batch(V, T_hat, A, c=0.1) -> HypBatch:
    """Map images, refined categories and attributes into the ball."""
    return HypBatch(hyp.exp_map0(V, c), hyp.exp_map0(T_hat, c), hyp.exp_map0(A, c), c)


def knn(points, k, c):
    """Indices of the ``k`` nearest other points per row; ties go to the lower index."""
    P = np.asarray(value_of(points), dtype=np.float64)
    n = P.shape[0]
    D = geometry.pairwise_dist(P, P, c)
    idx = np.arange(n)
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        others = idx[idx != i]
        order = np.lexsort((others, D[i, others]))
        out[i] = others[order[:k]]
    return out


def mine_triplets(points, k=3, c=0.1, max_per_anchor=MAX_TRIPLETS_PER_ANCHOR, rng=None):
    """All ``(i, j, l)`` with ``j`` among the k nearest neighbours of ``i`` and ``l`` not.

    When an anchor has more than ``max_per_anchor`` combinations, a uniform
    subset is drawn from ``rng`` (``None`` disables the cap).
    """
    P = np.asarray(value_of(points), dtype=np.float64)
    n = P.shape[0]
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    if n < k + 2:
        raise UsageError(
            f"{n} points cannot yield negatives with k={k}; use k <= {n - 2} "
            f"or a batch of at least {k + 2}")
    rng = np.random.default_rng(rng)
    neighbours = knn(P, k, c)
    idx = np.arange(n)
    rows = []
    for i in range(n):
        pos = np.sort(neighbours[i])
        neg = idx[(idx != i) & ~np.isin(idx, pos)]
        jj, ll = np.meshgrid(pos, neg, indexing="ij")
        combos = np.stack([np.full(jj.size, i), jj.ravel(), ll.ravel()], axis=1)
        if max_per_anchor is not None and len(combos) > max_per_anchor:
            keep = np.sort(rng.choice(len(combos), max_per_anchor, replace=False))
            combos = combos[keep]
        rows.append(combos)
    return np.concatenate(rows).astype(np.int64)


def _select(dmax, rng):
    scores = np.exp(-dmax)
    if rng is None:
        return np.argmin(dmax, axis=-1), scores
    g = rng.gumbel(0.0, 1.0, size=scores.shape)
    return np.argmax(scores + g, axis=-1), scores


def select_lcas(triplets, dist, gumbel_rng=None) -> LcaSelection:
    """Pick LCAs for every triplet from a point-to-ancestor distance matrix.

    The likelihood of an ancestor is ``exp(-max distance to the group)``.
    Without noise the pick is the exhaustive minimiser of that max distance.
    """
    dist = np.asarray(value_of(dist))
    t = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    di, dj, dk = dist[t[:, 0]], dist[t[:, 1]], dist[t[:, 2]]
    pair_max = np.maximum(di, dj)
    trip_max = np.maximum(pair_max, dk)
    pair, pair_scores = _select(pair_max, gumbel_rng)
    trip, trip_scores = _select(trip_max, gumbel_rng)
    return LcaSelection(pair, trip, pair_scores, trip_scores)


def select_lca_pair(vi, vj, ancestors, c=0.1, gumbel=False, rng_seed=None):
    """LCA of one positive pair. Returns ``(index, scores)``."""
    pts = np.stack([np.asarray(vi, float), np.asarray(vj, float)])
    dmax = geometry.pairwise_dist(pts, value_of(ancestors), c).max(axis=0)
    rng = np.random.default_rng(rng_seed) if gumbel else None
    idx, scores = _select(dmax, rng)
    return int(idx), scores


def select_lca_triplet(vi, vj, vk, ancestors, c=0.1, gumbel=False, rng_seed=None):
    """LCA of a whole triplet. Returns ``(index, scores)``."""
    pts = np.stack([np.asarray(v, float) for v in (vi, vj, vk)])
    dmax = geometry.pairwise_dist(pts, value_of(ancestors), c).max(axis=0)
    rng = np.random.default_rng(rng_seed) if gumbel else None
    idx, scores = _select(dmax, rng)
    return int(idx), scores


def hierarchical_hinge(triplets, dist, selection: LcaSelection, sigma):
    """Mean over triplets of the three margin terms.

    ``dist[p, a]`` is the distance from point ``p`` to ancestor ``a``; positives
    must sit closer to their pair LCA than to the triplet LCA by ``sigma``, and
    the negative the other way round.
    """
    t = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    i, j, k = t[:, 0], t[:, 1], t[:, 2]
    p, q = selection.pair, selection.triplet

    def d(a, b):
        return ad.take(dist, (a, b))

    h1 = ad.relu(ad.add(ad.sub(d(i, p), d(i, q)), sigma))
    h2 = ad.relu(ad.add(ad.sub(d(j, p), d(j, q)), sigma))
    h3 = ad.relu(ad.add(ad.sub(d(k, q), d(k, p)), sigma))
    return ad.mean(ad.add(ad.add(h1, h2), h3))


def _hinge_loss(triplets, points, ancestors, sigma, c, selection, gumbel_rng, what):
    if sigma < 0:
        raise UsageError(f"sigma must be non-negative, got {sigma}")
    if triplets is None or len(triplets) == 0:
        warnings.warn(f"no {what} triplets; hierarchical loss set to 0", HierarchyWarning,
                      stacklevel=3)
        return 0.0
    dist = hyp.pairwise_dist(points, ancestors, c)
    if selection is None:
        selection = select_lcas(triplets, dist, gumbel_rng)
    return hierarchical_hinge(triplets, dist, selection, sigma)


def loss_image_attribute(triplets, v_tilde, a_tilde, sigma=0.1, c=0.1,
                         selection=None, gumbel_rng=None):
    """Image-attribute hierarchy loss; attributes act as ancestors of images."""
    return _hinge_loss(triplets, v_tilde, a_tilde, sigma, c, selection, gumbel_rng, "image")


def attribute_triplets(a_tilde, k=3, c=0.1, max_per_anchor=MAX_TRIPLETS_PER_ANCHOR, rng=None):
    """Mine attribute triplets with ``k_attr = min(k, N - 2)``; ``None`` if ``N < 3``."""
    n = value_of(a_tilde).shape[0]
    k_attr = min(k, n - 2)
    if k_attr < 1:
        warnings.warn(f"{n} attributes are too few for attribute triplets", HierarchyWarning,
                      stacklevel=2)
        return None
    return mine_triplets(value_of(a_tilde), k_attr, c, max_per_anchor, rng)


def loss_attribute_category(triplets, a_tilde, t_tilde, sigma=0.1, c=0.1,
                            selection=None, gumbel_rng=None):
    """Attribute-category hierarchy loss; categories act as ancestors of attributes."""
    return _hinge_loss(triplets, a_tilde, t_tilde, sigma, c, selection, gumbel_rng, "attribute")
