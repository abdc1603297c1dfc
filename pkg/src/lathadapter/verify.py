"""Finite-difference battery over every training loss.

Each trial draws a small random problem, rejects it if any hinge, LCA choice
or neighbour ranking sits within ``margin`` of a kink (where the loss is not
differentiable), and compares the tape gradient with central differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry, hhl
from .atr import refine
from .autodiff import analytic_grad, grad_check, hyperbolic as hyp, value_of
from .objective import l_ecls, l_hcls, total_loss

LOSSES = ("l_ecls", "l_hcls", "l_va", "l_at", "total")


@dataclass
class Problem:
    T: np.ndarray
    V: np.ndarray
    y: np.ndarray
    A: np.ndarray
    c: float = 0.1
    beta: float = 0.1
    sigma: float = 0.1
    tau: float = 0.5
    k: int = 2


def random_problem(rng, C=3, N=5, B=6, d=4):
    T = rng.normal(size=(C, d))
    T *= rng.uniform(0.4, 1.2, size=(C, 1)) / np.linalg.norm(T, axis=1, keepdims=True)
    V = rng.normal(size=(B, d))
    V *= rng.uniform(0.6, 1.4, size=(B, 1)) / np.linalg.norm(V, axis=1, keepdims=True)
    y = rng.integers(0, C, size=B)
    A = rng.normal(scale=0.5, size=(N, d))
    tau = float(10 ** rng.uniform(-2, 0))
    return Problem(T, V, y, A, tau=tau)


def loss_fn(p: Problem, which):
    """Return ``f(A)`` for one loss; selections and triplets are recomputed."""

    def parts(A):
        T_hat = refine(p.T, A, p.beta)
        t_t = hyp.exp_map0(T_hat, p.c)
        a_t = hyp.exp_map0(A, p.c)
        v_t = geometry.exp_map0(p.V, p.c)
        out = {}
        if which in ("l_ecls", "total"):
            out["l_ecls"] = l_ecls(p.V, T_hat, p.y, p.tau)
        if which in ("l_hcls", "total"):
            out["l_hcls"] = l_hcls(v_t, t_t, p.y, p.c)
        if which in ("l_va", "total"):
            trip = hhl.mine_triplets(v_t, p.k, p.c, max_per_anchor=None)
            out["l_va"] = hhl.loss_image_attribute(trip, v_t, a_t, p.sigma, p.c)
        if which in ("l_at", "total"):
            trip = hhl.attribute_triplets(a_t, p.k, p.c, max_per_anchor=None)
            out["l_at"] = hhl.loss_attribute_category(trip, a_t, t_t, p.sigma, p.c)
        return out

    def f(A):
        out = parts(A)
        if which == "total":
            return total_loss(out["l_ecls"], out["l_hcls"], out["l_va"], out["l_at"])[0]
        return out[which]

    return f


def _gap(sorted_rows):
    return float(np.min(sorted_rows[:, 1] - sorted_rows[:, 0])) if sorted_rows.shape[1] > 1 else np.inf


def _hinge_clearance(trip, dist, sigma):
    sel = hhl.select_lcas(trip, dist)
    dmax_pair = np.sort(np.maximum(dist[trip[:, 0]], dist[trip[:, 1]]), axis=1)
    dmax_trip = np.sort(np.maximum(np.maximum(dist[trip[:, 0]], dist[trip[:, 1]]),
                                   dist[trip[:, 2]]), axis=1)
    i, j, k = trip.T
    h = np.concatenate([
        dist[i, sel.pair] - dist[i, sel.triplet] + sigma,
        dist[j, sel.pair] - dist[j, sel.triplet] + sigma,
        dist[k, sel.triplet] - dist[k, sel.pair] + sigma,
    ])
    return min(_gap(dmax_pair), _gap(dmax_trip), float(np.min(np.abs(h))))


def _knn_clearance(points, k, c):
    D = geometry.pairwise_dist(points, points, c)
    np.fill_diagonal(D, np.inf)
    D = np.sort(D, axis=1)
    return float(np.min(D[:, k] - D[:, k - 1]))


def clearance(p: Problem):
    """Smallest distance of the problem from any kink or tie."""
    T_hat = refine(p.T, p.A, p.beta)
    t_t = geometry.exp_map0(T_hat, p.c)
    a_t = geometry.exp_map0(p.A, p.c)
    v_t = geometry.exp_map0(p.V, p.c)
    k_attr = min(p.k, len(p.A) - 2)
    v_trip = hhl.mine_triplets(v_t, p.k, p.c, max_per_anchor=None)
    a_trip = hhl.mine_triplets(a_t, k_attr, p.c, max_per_anchor=None)
    return min(
        _knn_clearance(v_t, p.k, p.c),
        _knn_clearance(a_t, k_attr, p.c),
        _hinge_clearance(v_trip, geometry.pairwise_dist(v_t, a_t, p.c), p.sigma),
        _hinge_clearance(a_trip, geometry.pairwise_dist(a_t, t_t, p.c), p.sigma),
    )


def smooth_problems(n, seed=0, margin=1e-4, **shape):
    """Draw ``n`` problems whose clearance exceeds ``margin``."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        p = random_problem(rng, **shape)
        if clearance(p) > margin:
            out.append(p)
    return out


def run_battery(trials=50, seed=0, step=1e-6, losses=LOSSES, fault=0.0):
    """Worst relative gradient error per loss over ``trials`` smooth problems.

    ``fault`` is added to every analytic gradient entry; it exists so callers
    can confirm that a wrong gradient is caught.
    """
    worst = {name: 0.0 for name in losses}
    for p in smooth_problems(trials, seed):
        for name in losses:
            f = loss_fn(p, name)
            g = analytic_grad(f, p.A) + fault if fault else None
            worst[name] = max(worst[name], grad_check(f, p.A, step, grad=g))
    return worst


def loss_value(p: Problem, which):
    return float(value_of(loss_fn(p, which)(p.A)))
