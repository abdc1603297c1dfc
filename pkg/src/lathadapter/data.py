"""Binary embedding containers, attribute-bank checkpoints and synthetic data.

Embedding file (``.lha1``), all little-endian::

    offset  size  field
    0       4     magic b"LHA1"
    4       2     version (u16, currently 1)
    6       2     flags (u16, bit 0: labels present)
    8       4     n rows (u32)
    12      4     d columns (u32)
    16      4nd   float32 payload, row-major
    ...     4n    int32 labels (only if flag bit 0)

Checkpoint file (``.lhck``)::

    0       4     magic b"LHCK"
    4       2     version (u16, currently 1)
    6       2     reserved (0)
    8       40    c, beta, sigma, tau, lambda_h (float64 each)
    48      4     N attributes (u32)
    52      4     d (u32)
    56      8Nd   attribute matrix, float64 row-major
    ...     4     length L of the config block (u32)
    ...     L     UTF-8 "key=value\\n" lines, keys sorted
"""
from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import IncompatibleVersionError, ParseError, UsageError, ValidationError

EMB_MAGIC = b"LHA1"
EMB_VERSION = 1
EMB_HEADER = struct.Struct("<4sHHII")
FLAG_LABELS = 0x1

CKPT_MAGIC = b"LHCK"
CKPT_VERSION = 1
CKPT_HEADER = struct.Struct("<4sHH5dII")


def atomic_write(path, payload: bytes):
    """Write ``payload`` to ``path`` via a temp file in the same directory."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- embeddings ---------------------------------------------------------------

@dataclass
class EmbeddingMatrix:
    data: np.ndarray
    labels: np.ndarray | None = None

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def d(self):
        return self.data.shape[1]


def encode_embeddings(X, labels=None) -> bytes:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise UsageError(f"embedding matrix must be 2-D, got shape {X.shape}")
    with np.errstate(over="ignore"):
        X32 = X.astype("<f4")
    if not np.all(np.isfinite(X32)):
        raise ValidationError("embedding matrix has non-finite values in float32")
    flags = 0
    tail = b""
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (X.shape[0],):
            raise UsageError(f"expected {X.shape[0]} labels, got shape {labels.shape}")
        flags |= FLAG_LABELS
        tail = labels.astype("<i4").tobytes()
    header = EMB_HEADER.pack(EMB_MAGIC, EMB_VERSION, flags, X.shape[0], X.shape[1])
    return header + X32.tobytes() + tail


def decode_embeddings(buf: bytes) -> EmbeddingMatrix:
    if len(buf) < EMB_HEADER.size:
        raise ParseError("truncated header", offset=len(buf))
    magic, version, flags, n, d = EMB_HEADER.unpack_from(buf, 0)
    if magic != EMB_MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {EMB_MAGIC!r}", offset=0)
    if version != EMB_VERSION:
        raise IncompatibleVersionError(f"unsupported embedding file version {version}", offset=4)
    if flags & ~FLAG_LABELS:
        raise ParseError(f"unknown flag bits 0x{flags:04x}", offset=6)
    payload_end = EMB_HEADER.size + 4 * n * d
    expected = payload_end + (4 * n if flags & FLAG_LABELS else 0)
    if len(buf) < expected:
        what = "payload" if len(buf) < payload_end else "labels"
        raise ParseError(f"truncated {what}: file has {len(buf)} of {expected} bytes",
                         offset=len(buf))
    if len(buf) > expected:
        raise ParseError(f"{len(buf) - expected} trailing bytes", offset=expected)
    X = np.frombuffer(buf, dtype="<f4", count=n * d, offset=EMB_HEADER.size).reshape(n, d)
    bad = np.argwhere(~np.isfinite(X))
    if bad.size:
        r, col = (int(v) for v in bad[0])
        raise ValidationError(f"non-finite value at row {r}, col {col}",
                              offset=EMB_HEADER.size + 4 * (r * d + col))
    labels = None
    if flags & FLAG_LABELS:
        labels = np.frombuffer(buf, dtype="<i4", count=n, offset=payload_end).astype(np.int64)
    return EmbeddingMatrix(X.astype(np.float64), labels)


def save_embeddings(path, X, labels=None):
    atomic_write(path, encode_embeddings(X, labels))


def load_embeddings(path) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        return decode_embeddings(fh.read())


# --- checkpoints --------------------------------------------------------------

@dataclass
class Checkpoint:
    attributes: np.ndarray
    c: float = 0.1
    beta: float = 0.1
    sigma: float = 0.1
    tau: float = 0.01
    lambda_h: float = 1.0
    config: dict = field(default_factory=dict)

    @property
    def n_attributes(self):
        return self.attributes.shape[0]

    @property
    def dim(self):
        return self.attributes.shape[1]


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    A = np.ascontiguousarray(ckpt.attributes, dtype="<f8")
    if A.ndim != 2:
        raise UsageError("attribute bank must be 2-D")
    header = CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION, 0, ckpt.c, ckpt.beta, ckpt.sigma,
                              ckpt.tau, ckpt.lambda_h, A.shape[0], A.shape[1])
    lines = []
    for key in sorted(ckpt.config):
        key_s, val_s = str(key), str(ckpt.config[key])
        if "=" in key_s or "\n" in key_s or "\n" in val_s:
            raise UsageError(f"config entry {key_s!r} cannot be serialised")
        lines.append(f"{key_s}={val_s}\n")
    block = "".join(lines).encode("utf-8")
    return header + A.tobytes() + struct.pack("<I", len(block)) + block


def decode_checkpoint(buf: bytes) -> Checkpoint:
    if len(buf) < CKPT_HEADER.size:
        raise ParseError("truncated checkpoint header", offset=len(buf))
    magic, version, _, c, beta, sigma, tau, lambda_h, n, d = CKPT_HEADER.unpack_from(buf, 0)
    if magic != CKPT_MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {CKPT_MAGIC!r}", offset=0)
    if version != CKPT_VERSION:
        raise IncompatibleVersionError(
            f"checkpoint version {version} is incompatible with this reader (expects "
            f"{CKPT_VERSION})", offset=4)
    pos = CKPT_HEADER.size
    end = pos + 8 * n * d
    if len(buf) < end + 4:
        raise ParseError("truncated attribute matrix", offset=len(buf))
    A = np.frombuffer(buf, dtype="<f8", count=n * d, offset=pos).reshape(n, d).astype(np.float64)
    (length,) = struct.unpack_from("<I", buf, end)
    start = end + 4
    if len(buf) != start + length:
        raise ParseError("config block length does not match file size", offset=end)
    try:
        text = buf[start:].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("config block is not UTF-8", offset=start + exc.start) from None
    config = {}
    for line in text.splitlines():
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"malformed config line {line!r}", offset=start)
        config[key] = value
    return Checkpoint(A, c, beta, sigma, tau, lambda_h, config)


def save_checkpoint(path, ckpt: Checkpoint):
    atomic_write(path, encode_checkpoint(ckpt))
    return path


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())


# --- synthetic planted hierarchy ---------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    """Planted category -> attribute -> image data.

    ``text_radius`` is the norm of the category embeddings; images and
    attribute centres are unit vectors.
    """

    classes: int = 4
    attrs_per_class: int = 2
    samples_per_class: int = 50
    dim: int = 64
    noise_sigma: float = 0.05
    seed: int = 7
    attr_offset: float = 0.3
    text_radius: float = 0.3

    def validate(self):
        if self.classes < 2:
            raise UsageError("need at least 2 classes")
        if self.attrs_per_class < 1:
            raise UsageError("need at least 1 attribute per class")
        if self.samples_per_class < 2:
            raise UsageError("need at least 2 samples per class")
        if self.dim < 2:
            raise UsageError("dimension must be at least 2")
        if self.noise_sigma < 0 or self.attr_offset < 0 or self.text_radius <= 0:
            raise UsageError("noise, offset and text radius must be non-negative/positive")
        if self.dim < self.classes:
            raise UsageError(
                f"dim={self.dim} cannot hold {self.classes} orthogonal class directions; "
                f"use --dim >= {self.classes}")


@dataclass
class SynthData:
    text: np.ndarray
    images: np.ndarray
    labels: np.ndarray
    attr_centers: np.ndarray
    attr_index: np.ndarray


def _unit(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def generate_synthetic(spec: SynthSpec = SynthSpec()) -> SynthData:
    """Sample a planted hierarchy; a pure function of ``spec``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    C, m, s, d = spec.classes, spec.attrs_per_class, spec.samples_per_class, spec.dim
    q, r = np.linalg.qr(rng.standard_normal((d, C)))
    directions = (q * np.sign(np.diag(r))).T
    centers = np.empty((C * m, d))
    for ci in range(C):
        for a in range(m):
            t = rng.standard_normal(d)
            t -= (t @ directions[ci]) * directions[ci]
            centers[ci * m + a] = _unit(directions[ci] + spec.attr_offset * _unit(t))
    attr_index = np.array([ci * m + (i % m) for ci in range(C) for i in range(s)])
    noise = spec.noise_sigma * rng.standard_normal((C * s, d))
    images = _unit(centers[attr_index] + noise)
    labels = attr_index // m
    return SynthData(spec.text_radius * directions, images, labels, centers, attr_index)


def split_indices(labels, train_fraction=0.8, seed=0):
    """Stratified, seeded train/test split of row indices."""
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    train, test = [], []
    for cls in np.unique(labels):
        rows = rng.permutation(np.flatnonzero(labels == cls))
        cut = int(round(train_fraction * len(rows)))
        train.append(rows[:cut])
        test.append(rows[cut:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))
