"""Attribute-aware text refinement.

Category rows ``T`` and attribute rows ``A`` are stacked, a cosine affinity
over all ``C + N`` rows is symmetrically degree-normalised, and the aggregated
messages are added back as a ``beta``-weighted residual. Only the category rows
of the result are returned.

Cosines may be negative, so the degree of a row is the sum of the absolute
affinities (``D_i >= S_ii = 1``). With signed sums the degree can reach zero
and ``D^-1/2`` explodes.
"""
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import value_of
from .errors import DomainError, UsageError

EPS_DEGREE = 1e-6


@dataclass(frozen=True)
class AffinityMatrix:
    S: np.ndarray
    D: np.ndarray


def _check_rows(F):
    norms = np.linalg.norm(value_of(F), axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DomainError(f"row {int(zero[0])} of the stacked features is zero")


def stack_features(T, A):
    """``F = [T; A]`` (categories first)."""
    Tv, Av = value_of(T), value_of(A)
    if Tv.ndim != 2 or Av.ndim != 2 or Tv.shape[1] != Av.shape[1]:
        raise UsageError(f"incompatible shapes {Tv.shape} and {Av.shape}")
    return ad.concat([T, A], axis=0)


def _abs(S):
    return ad.mul(S, np.sign(value_of(S)))


def _affinity(F):
    _check_rows(F)
    S = ad.cosine_similarity(F, F)
    D = ad.clip(ad.sum(_abs(S), axis=1), lo=EPS_DEGREE)
    return S, D


def cosine_affinity(F) -> AffinityMatrix:
    """Pairwise cosine affinity and the clamped degree vector of ``F``."""
    S, D = _affinity(np.asarray(F, dtype=np.float64))
    return AffinityMatrix(S=value_of(S), D=value_of(D))


def refine(T, A, beta=0.1):
    """Refined category embeddings ``(F + beta * D^-1/2 S D^-1/2 F)[:C]``.

    ``A`` may be a tape Var, in which case the result is differentiable in it.
    """
    if beta < 0:
        raise UsageError(f"beta must be non-negative, got {beta}")
    F = stack_features(T, A)
    C = value_of(T).shape[0]
    if beta == 0:
        return np.array(value_of(T), dtype=np.float64)
    S, D = _affinity(F)
    dinv = ad.div(1.0, ad.sqrt(D))
    M = ad.mul(ad.mul(S, ad.expand_dims(dinv, 1)), ad.expand_dims(dinv, 0))
    F_hat = ad.add(F, ad.scale(ad.matmul(M, F), beta))
    return ad.take(F_hat, slice(0, C))
