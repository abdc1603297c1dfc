"""Poincare-ball primitives in float64.

All functions operate on the last axis, so a ``(..., d)`` array is treated as a
batch of ``d``-vectors. Points are kept strictly inside the ball of radius
``1/sqrt(c)``: every constructing operation re-projects onto
``sqrt(c)*||x|| <= 1 - EPS_BOUNDARY`` and records the event in a process-wide
counter (see :func:`clamp_events`).
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UsageError

EPS_BOUNDARY = 1e-12
MIN_NORM = 1e-15


class _ClampCounter:
    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n):
        if n:
            with self._lock:
                self._count += int(n)

    def get(self):
        with self._lock:
            return self._count

    def reset(self):
        with self._lock:
            self._count = 0


_CLAMPS = _ClampCounter()


def clamp_events() -> int:
    """Number of boundary clamps performed since the last reset."""
    return _CLAMPS.get()


def reset_clamp_events() -> None:
    _CLAMPS.reset()


def record_clamps(n: int) -> None:
    """Add ``n`` clamp events (used by the differentiable twins of these ops)."""
    _CLAMPS.add(n)


def _check_curvature(c):
    c = float(c)
    if not np.isfinite(c) or c <= 0:
        raise DomainError(f"curvature must be a finite positive number, got {c}")
    return c


def _as_vectors(x, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        raise UsageError(f"{name} must have at least one axis")
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} contains non-finite values")
    return x


def _norm(x):
    # rescale by the largest entry so huge tangent vectors do not overflow
    scale = np.max(np.abs(x), axis=-1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    return safe * np.linalg.norm(x / safe, axis=-1, keepdims=True)


def max_norm(c: float) -> float:
    """Largest admissible Euclidean norm for a point of the ball."""
    return (1.0 - EPS_BOUNDARY) / np.sqrt(c)


def project(x, c: float) -> np.ndarray:
    """Pull points with ``sqrt(c)*||x|| > 1 - EPS_BOUNDARY`` back inside the ball."""
    c = _check_curvature(c)
    x = np.asarray(x, dtype=np.float64)
    norm = _norm(x)
    bound = max_norm(c)
    over = norm > bound
    n_over = int(np.count_nonzero(over))
    if n_over == 0:
        return x
    _CLAMPS.add(n_over)
    scale = np.where(over, bound / np.where(over, norm, 1.0), 1.0)
    return x * scale


def exp_map0(x, c: float) -> np.ndarray:
    """Exponential map at the origin, ``tanh(sqrt(c)|x|) x / (sqrt(c)|x|)``.

    Vectors with ``||x|| < 1e-15`` map to the origin (the analytic limit).
    """
    c = _check_curvature(c)
    x = _as_vectors(x)
    sc = np.sqrt(c)
    norm = _norm(x)
    tiny = norm < MIN_NORM
    s = sc * np.where(tiny, 1.0, norm)
    y = np.where(tiny, 0.0, np.tanh(s) * (x / np.where(tiny, 1.0, norm)) / sc)
    return project(y, c)


def mobius_add(u, z, c: float) -> np.ndarray:
    """Mobius addition ``u (+)_c z`` on the ball."""
    c = _check_curvature(c)
    u = _as_vectors(u, "u")
    z = _as_vectors(z, "z")
    if u.shape[-1] != z.shape[-1]:
        raise UsageError(f"dimension mismatch: {u.shape[-1]} vs {z.shape[-1]}")
    uz = np.sum(u * z, axis=-1, keepdims=True)
    u2 = np.sum(u * u, axis=-1, keepdims=True)
    z2 = np.sum(z * z, axis=-1, keepdims=True)
    num = (1.0 + 2.0 * c * uz + c * z2) * u + (1.0 - c * u2) * z
    den = 1.0 + 2.0 * c * uz + c * c * u2 * z2
    return project(num / den, c)


def hyp_dist(u, z, c: float) -> np.ndarray:
    """Geodesic distance ``(2/sqrt(c)) artanh(sqrt(c) ||-u (+)_c z||)``.

    Broadcasts over leading axes; returns an array of shape ``broadcast(u, z)[:-1]``.
    """
    c = _check_curvature(c)
    w = mobius_add(-np.asarray(u, dtype=np.float64), z, c)
    sc = np.sqrt(c)
    arg = sc * np.linalg.norm(w, axis=-1)
    limit = 1.0 - EPS_BOUNDARY
    over = arg > limit
    if np.any(over):
        _CLAMPS.add(np.count_nonzero(over))
        arg = np.minimum(arg, limit)
    return 2.0 / sc * np.arctanh(arg)


def pairwise_dist(U, Z, c: float) -> np.ndarray:
    """``(n, m)`` matrix of distances between rows of ``U`` and rows of ``Z``."""
    U = np.asarray(U, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    return hyp_dist(U[:, None, :], Z[None, :, :], c)


def hyp_norm(x, c: float) -> np.ndarray:
    """Distance of each ball point from the origin."""
    x = np.asarray(x, dtype=np.float64)
    return hyp_dist(np.zeros_like(x), x, c)


def flat_limit_check(u, z, c_small: float) -> float:
    """Deviation ``|d_H(u, z) - 2||u - z|||`` at a vanishing curvature.

    As ``c -> 0`` the ball distance tends to twice the Euclidean distance.
    """
    if c_small > 1e-6:
        raise UsageError(f"c_small must be <= 1e-6, got {c_small}")
    u = _as_vectors(u, "u")
    z = _as_vectors(z, "z")
    d = hyp_dist(u, z, c_small)
    return float(np.max(np.abs(d - 2.0 * np.linalg.norm(u - z, axis=-1))))


@dataclass(frozen=True)
class BallPoint:
    """A single point of the Poincare ball with its curvature attached."""

    coords: np.ndarray
    c: float

    def __post_init__(self):
        c = _check_curvature(self.c)
        coords = _as_vectors(self.coords, "coords")
        if coords.ndim != 1:
            raise UsageError("BallPoint coords must be a 1-D vector")
        if np.sqrt(c) * np.linalg.norm(coords) >= 1.0:
            raise DomainError("point lies outside the open ball")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "c", c)

    @classmethod
    def origin(cls, d, c):
        return cls(np.zeros(d), c)

    @classmethod
    def from_tangent(cls, x, c):
        return cls(exp_map0(x, c), c)

    def _check_peer(self, other):
        if other.c != self.c:
            raise UsageError(f"curvature mismatch: {self.c} vs {other.c}")
        if other.coords.shape != self.coords.shape:
            raise UsageError("dimension mismatch between ball points")

    def __add__(self, other):
        self._check_peer(other)
        return BallPoint(mobius_add(self.coords, other.coords, self.c), self.c)

    def __neg__(self):
        return BallPoint(-self.coords, self.c)

    def dist(self, other) -> float:
        self._check_peer(other)
        return float(hyp_dist(self.coords, other.coords, self.c))
