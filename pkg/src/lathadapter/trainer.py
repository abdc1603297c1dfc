"""Optimisation loop for the attribute bank and evaluation helpers."""
from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from . import geometry, hhl
from .atr import refine
from .autodiff import hyperbolic as hyp
from .data import Checkpoint
from .errors import DivergenceError, HierarchyWarning, UsageError
from .objective import LossReport, l_ecls, l_hcls, predict, total_loss

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    c: float = 0.1
    sigma: float = 0.1
    beta: float = 0.1
    k: int = 3
    n_attributes: int = 8
    tau: float = 0.01
    lambda_h: float = 1.0
    lr: float = 0.002
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    gumbel: bool = True
    max_triplets_per_anchor: int = hhl.MAX_TRIPLETS_PER_ANCHOR
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def validate(self):
        if self.c <= 0 or self.tau <= 0:
            raise UsageError("curvature and tau must be positive")
        if self.sigma < 0 or self.beta < 0 or self.lambda_h < 0 or self.lr < 0:
            raise UsageError("sigma, beta, lambda_h and lr must be non-negative")
        if self.k < 1 or self.n_attributes < 1 or self.batch_size < 1 or self.epochs < 0:
            raise UsageError("k, n_attributes, batch_size must be >= 1 and epochs >= 0")
        if self.batch_size < self.k + 2:
            warnings.warn(
                f"batch_size={self.batch_size} < k+2={self.k + 2}: no negatives can be mined; "
                "the image-attribute loss is disabled", HierarchyWarning, stacklevel=3)

    def echo(self):
        """Config as sorted ``str -> str`` pairs for the checkpoint."""
        return {k: repr(v) for k, v in sorted(asdict(self).items())}


@dataclass
class EvalReport:
    accuracy: float
    per_class: dict
    radii: dict
    harmonic_mean: float | None = None
    split_accuracy: dict = field(default_factory=dict)

    def as_json(self):
        out = {"accuracy": self.accuracy,
               "per_class": {str(k): v for k, v in self.per_class.items()},
               "radii": self.radii,
               "splits": self.split_accuracy}
        if self.harmonic_mean is not None:
            out["harmonic_mean"] = self.harmonic_mean
        return out


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    reports: list
    accuracies: list


def init_attributes(n, d, seed=0, std=0.02):
    """Seeded ``N(0, std^2)`` attribute bank of shape ``(n, d)``."""
    if n < 1 or d < 2:
        raise UsageError(f"need n >= 1 and d >= 2, got ({n}, {d})")
    return np.random.default_rng(seed).normal(0.0, std, size=(n, d))


def harmonic_mean(base, new):
    """``2bn / (b + n)``; zero when both inputs are zero."""
    if base + new == 0:
        return 0.0
    return 2.0 * base * new / (base + new)


class Adam:
    def __init__(self, shape, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, param, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return param - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _streams(seed):
    shuffle, gumbel, mining = (np.random.default_rng(s)
                               for s in np.random.SeedSequence(seed).spawn(3))
    return shuffle, gumbel, mining


def step_loss(A, T, V, y, cfg: TrainConfig, gumbel_rng=None, mining_rng=None):
    """Forward pass of one batch; ``A`` may be a tape Var or a plain array."""
    T_hat = refine(T, A, cfg.beta)
    t_t = hyp.exp_map0(T_hat, cfg.c)
    a_t = hyp.exp_map0(A, cfg.c)
    v_t = geometry.exp_map0(V, cfg.c)
    le = l_ecls(V, T_hat, y, cfg.tau)
    lh = l_hcls(v_t, t_t, y, cfg.c)
    if len(V) >= cfg.k + 2:
        trip = hhl.mine_triplets(v_t, cfg.k, cfg.c, cfg.max_triplets_per_anchor, mining_rng)
        lva = hhl.loss_image_attribute(trip, v_t, a_t, cfg.sigma, cfg.c, gumbel_rng=gumbel_rng)
    else:
        warnings.warn(f"batch of {len(V)} < k+2={cfg.k + 2}; image-attribute loss set to 0",
                      HierarchyWarning, stacklevel=2)
        lva = 0.0
    attr_trip = hhl.attribute_triplets(a_t, cfg.k, cfg.c, cfg.max_triplets_per_anchor, mining_rng)
    lat = hhl.loss_attribute_category(attr_trip, a_t, t_t, cfg.sigma, cfg.c,
                                      gumbel_rng=gumbel_rng)
    return le, lh, lva, lat


def train(cfg: TrainConfig, text, images, labels, metrics_log=None, init=None,
          callback=None) -> TrainResult:
    """Fit the attribute bank with Adam; deterministic for a fixed seed.

    ``metrics_log`` is an optional writable text stream receiving one
    tab-separated line per epoch. ``callback(epoch, bank, report)`` is called
    after every epoch with a copy of the current bank.
    """
    cfg.validate()
    text = np.asarray(text, dtype=np.float64)
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if text.shape[1] != images.shape[1]:
        raise UsageError(f"text dim {text.shape[1]} != image dim {images.shape[1]}")
    if len(np.unique(labels)) < 2:
        raise UsageError("training labels must cover at least 2 classes")
    A = init_attributes(cfg.n_attributes, text.shape[1], cfg.seed) if init is None else init.copy()
    opt = Adam(A.shape, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    shuffle_rng, gumbel_rng, mining_rng = _streams(cfg.seed)
    g_rng = gumbel_rng if cfg.gumbel else None
    reports, accuracies = [], []
    last = None
    step = 0
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(images))
        step_reports = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            tape = ad.Tape()
            A_var = tape.var(A)
            before = geometry.clamp_events()
            parts = step_loss(A_var, text, images[batch], labels[batch], cfg, g_rng, mining_rng)
            total, report = total_loss(*parts, clamp_events=geometry.clamp_events() - before)
            if not np.isfinite(report.total):
                raise DivergenceError(step, last)
            if isinstance(total, ad.Var):
                grad, = tape.backward(total, [A_var])
            else:
                grad = np.zeros_like(A)
            A = opt.step(A, grad)
            if not np.all(np.isfinite(A)):
                raise DivergenceError(step, report)
            last = report
            step_reports.append(report)
            step += 1
        epoch_report = LossReport.average(step_reports)
        acc = accuracy(A, text, images, labels, cfg)
        reports.append(epoch_report)
        accuracies.append(acc)
        log.info("epoch %d total %.6f acc %.4f", epoch + 1, epoch_report.total, acc)
        if metrics_log is not None:
            metrics_log.write(format_metrics(epoch + 1, epoch_report, acc) + "\n")
        if callback is not None:
            callback(epoch + 1, A.copy(), epoch_report)
    ckpt = Checkpoint(A, cfg.c, cfg.beta, cfg.sigma, cfg.tau, cfg.lambda_h, cfg.echo())
    return TrainResult(ckpt, reports, accuracies)


def format_metrics(epoch, report: LossReport, acc):
    cols = [report.l_ecls, report.l_hcls, report.l_va, report.l_at, report.total, acc]
    return "\t".join([str(epoch)] + [repr(float(x)) for x in cols])


def _scores(A, text, images, c, beta, tau, lambda_h):
    T_hat = refine(text, A, beta)
    return predict(images, geometry.exp_map0(images, c), T_hat,
                   geometry.exp_map0(T_hat, c), tau, lambda_h, c)


def accuracy(A, text, images, labels, cfg):
    pred = _scores(A, text, images, cfg.c, cfg.beta, cfg.tau, cfg.lambda_h).predictions
    return float(np.mean(pred == labels))


def evaluate(ckpt: Checkpoint, text, images, labels, second=None) -> EvalReport:
    """Accuracy, per-class accuracy and mean radii by role.

    ``second`` is an optional ``(images, labels)`` pair for a second split;
    the first split is then "base", the second "new", and the harmonic mean
    of their accuracies is reported.
    """
    text = np.asarray(text, dtype=np.float64)
    if text.shape[1] != ckpt.dim:
        raise UsageError(f"text dim {text.shape[1]} does not match checkpoint dim {ckpt.dim}")
    splits = [(np.asarray(images, dtype=np.float64), np.asarray(labels))]
    if second is not None:
        splits.append((np.asarray(second[0], dtype=np.float64), np.asarray(second[1])))
    for X, y in splits:
        if X.shape[1] != ckpt.dim:
            raise UsageError(f"image dim {X.shape[1]} does not match checkpoint dim {ckpt.dim}")
        if y.shape != (X.shape[0],):
            raise UsageError("every evaluated image needs a label")
    T_hat = refine(text, ckpt.attributes, ckpt.beta)
    t_t = geometry.exp_map0(T_hat, ckpt.c)
    correct = []
    for X, y in splits:
        v_t = geometry.exp_map0(X, ckpt.c)
        pred = predict(X, v_t, T_hat, t_t, ckpt.tau, ckpt.lambda_h, ckpt.c).predictions
        correct.append(pred == y)
    all_y = np.concatenate([y for _, y in splits])
    all_ok = np.concatenate(correct)
    per_class = {int(k): float(np.mean(all_ok[all_y == k])) for k in np.unique(all_y)}
    all_X = np.concatenate([X for X, _ in splits])
    radii = {
        "category": float(np.mean(geometry.hyp_norm(t_t, ckpt.c))),
        "attribute": float(np.mean(geometry.hyp_norm(geometry.exp_map0(ckpt.attributes, ckpt.c),
                                                      ckpt.c))),
        "image": float(np.mean(geometry.hyp_norm(geometry.exp_map0(all_X, ckpt.c), ckpt.c))),
    }
    split_acc = {}
    hm = None
    if second is None:
        split_acc["all"] = float(np.mean(correct[0]))
    else:
        split_acc["base"] = float(np.mean(correct[0]))
        split_acc["new"] = float(np.mean(correct[1]))
        hm = harmonic_mean(split_acc["base"], split_acc["new"])
    return EvalReport(float(np.mean(all_ok)), per_class, radii, hm, split_acc)
