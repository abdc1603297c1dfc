"""Central finite-difference checks for tape gradients."""
import numpy as np

from ..errors import DomainError
from .tape import Tape, value_of


def numeric_grad(f, p, step=1e-6):
    """Central-difference gradient of scalar ``f`` at ``p`` (plain arrays in, float out)."""
    p = np.array(p, dtype=np.float64)
    grad = np.zeros_like(p)
    flat = p.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = float(value_of(f(p)))
        flat[i] = orig - step
        fm = float(value_of(f(p)))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise DomainError(f"f is not finite near coordinate {i}")
        gflat[i] = (fp - fm) / (2.0 * step)
    return grad


def analytic_grad(f, p):
    tape = Tape()
    x = tape.var(np.array(p, dtype=np.float64))
    out = f(x)
    grad, = tape.backward(out, [x])
    return grad


def grad_check(f, p, step=1e-6, grad=None):
    """Worst coordinate-wise ``|analytic - fd| / max(1, |fd|)``.

    ``f`` must accept either a tape Var or a plain array and return a scalar.
    ``grad`` overrides the analytic gradient (used to exercise the checker).
    """
    analytic = analytic_grad(f, p) if grad is None else np.asarray(grad, dtype=np.float64)
    fd = numeric_grad(f, p, step)
    return float(np.max(np.abs(analytic - fd) / np.maximum(1.0, np.abs(fd))))
