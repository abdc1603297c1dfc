"""Contrastive objectives and the combined Euclidean/hyperbolic classifier."""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from . import geometry
from .autodiff import hyperbolic as hyp
from .autodiff import value_of
from .errors import UsageError

DEFAULT_TAU = 0.01


@dataclass
class LossReport:
    l_ecls: float
    l_hcls: float
    l_va: float
    l_at: float
    total: float
    clamp_events: int = 0

    @classmethod
    def from_parts(cls, l_ecls, l_hcls, l_va, l_at, clamp_events=0):
        parts = [float(value_of(x)) for x in (l_ecls, l_hcls, l_va, l_at)]
        return cls(*parts, total=parts[0] + parts[1] + parts[2] + parts[3],
                   clamp_events=int(clamp_events))

    @classmethod
    def average(cls, reports):
        """Mean of each component; ``total`` is re-summed so the invariant holds exactly."""
        n = len(reports)
        means = [sum(getattr(r, k) for r in reports) / n for k in ("l_ecls", "l_hcls", "l_va", "l_at")]
        return cls.from_parts(*means, clamp_events=sum(r.clamp_events for r in reports))

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class ScoreMatrix:
    logits: np.ndarray
    probabilities: np.ndarray

    @property
    def predictions(self):
        return np.argmax(self.logits, axis=-1)


def _check_tau(tau):
    if not tau > 0:
        raise UsageError(f"tau must be positive, got {tau}")


def _check_labels(labels, n_classes, n_rows):
    labels = np.asarray(labels)
    if labels.shape != (n_rows,):
        raise UsageError(f"expected {n_rows} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise UsageError(f"labels must lie in [0, {n_classes})")
    return labels.astype(np.int64)


def softmax(logits):
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _cos(V, T):
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    T = np.asarray(T, dtype=np.float64)
    return value_of(ad.cosine_similarity(V, T))


def clip_probability(v, T, tau=DEFAULT_TAU):
    """Softmax of cosine similarities over temperature (one row per image)."""
    _check_tau(tau)
    p = softmax(_cos(v, T) / tau)
    return p[0] if np.ndim(v) == 1 else p


def _cross_entropy(logits, labels):
    rows = np.arange(len(labels))
    picked = ad.take(logits, (rows, labels))
    return ad.mean(ad.sub(ad.logsumexp(logits, axis=1), picked))


def l_ecls(V, T_hat, labels, tau=DEFAULT_TAU):
    """Mean cross-entropy of temperature-scaled cosine logits."""
    _check_tau(tau)
    labels = _check_labels(labels, value_of(T_hat).shape[0], value_of(V).shape[0])
    logits = ad.scale(ad.cosine_similarity(V, T_hat), 1.0 / tau)
    return _cross_entropy(logits, labels)


def l_hcls(v_tilde, t_tilde, labels, c=0.1):
    """Mean cross-entropy with negative hyperbolic distances as logits."""
    labels = _check_labels(labels, value_of(t_tilde).shape[0], value_of(v_tilde).shape[0])
    logits = ad.scale(hyp.pairwise_dist(v_tilde, t_tilde, c), -1.0)
    return _cross_entropy(logits, labels)


def total_loss(l_ecls, l_hcls, l_va, l_at, clamp_events=0):
    """Unweighted sum of the four parts.

    Returns the (possibly differentiable) total and its :class:`LossReport`.
    """
    total = ad.add(ad.add(ad.add(l_ecls, l_hcls), l_va), l_at)
    return total, LossReport.from_parts(l_ecls, l_hcls, l_va, l_at, clamp_events)


def predict(V, v_tilde, T_hat, t_tilde, tau=DEFAULT_TAU, lambda_h=1.0, c=0.1) -> ScoreMatrix:
    """Score classes by ``cos(v, t_hat)/tau - lambda_h * d_H(v~, t~)``.

    Accepts a single image (1-D) or a batch (2-D).
    """
    _check_tau(tau)
    if lambda_h < 0:
        raise UsageError(f"lambda_h must be non-negative, got {lambda_h}")
    logits = _cos(V, T_hat) / tau
    if lambda_h:
        vt = np.atleast_2d(np.asarray(v_tilde, dtype=np.float64))
        logits = logits - lambda_h * geometry.pairwise_dist(vt, t_tilde, c)
    probs = softmax(logits)
    if np.ndim(V) == 1:
        return ScoreMatrix(logits[0], probs[0])
    return ScoreMatrix(logits, probs)
