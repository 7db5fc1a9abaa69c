"""Dataset containers, LIBSVM/IDX parsers and the preprocessing pipeline."""

from __future__ import annotations

import io
import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import RngStream


class ParseError(ValueError):
    """Malformed input; the message names the line number or byte offset."""


@dataclass(frozen=True)
class Example:
    features: np.ndarray
    label: int


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X must be (n, d) with one label per row")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("features must be finite")

    def __len__(self) -> int:
        return self.X.shape[0]

    def __getitem__(self, i) -> Example:
        return Example(self.X[i].copy(), int(self.y[i]))

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def n_pos(self) -> int:
        return int(np.sum(self.y == 1))

    @property
    def n_neg(self) -> int:
        return int(np.sum(self.y == -1))

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx].copy(), self.y[idx].copy(), dict(self.meta))

    def equals(self, other: "Dataset") -> bool:
        return self.X.shape == other.X.shape and np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y)


# -- LIBSVM ---------------------------------------------------------------------


MAX_FEATURES = 1 << 24


def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = data.count(b"\n", 0, exc.start) + 1
        raise ParseError(f"line {line}: invalid UTF-8 at byte {exc.start}") from None


_LABEL_LIMIT = 2**63


def _parse_label(tok: str, lineno: int) -> int:
    try:
        label = int(tok)
    except ValueError:
        try:
            val = float(tok)
        except ValueError:
            raise ParseError(f"line {lineno}: malformed label {tok!r}") from None
        if not math.isfinite(val):
            raise ParseError(f"line {lineno}: non-finite label {tok!r}")
        label = int(round(val))
    if not -_LABEL_LIMIT <= label < _LABEL_LIMIT:
        raise ParseError(f"line {lineno}: label {tok!r} out of the 64-bit integer range")
    return label


def parse_libsvm(source) -> Dataset:
    """Parse ``<label> <idx>:<val> ...`` lines into a dense dataset.

    ``source`` may be bytes, a path, or a binary/text stream. Indices are
    1-based and must increase strictly within a line; text after ``#`` is
    ignored; blank lines are skipped. The feature dimension is the largest
    index seen.
    """
    text = _read_text(source)
    labels: list[int] = []
    rows: list[tuple[list[int], list[float]]] = []
    max_idx = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        labels.append(_parse_label(toks[0], lineno))
        idxs, vals = [], []
        prev = 0
        for tok in toks[1:]:
            key, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(f"line {lineno}: expected <index>:<value>, got {tok!r}")
            try:
                j = int(key)
            except ValueError:
                raise ParseError(f"line {lineno}: malformed index {key!r}") from None
            try:
                x = float(val)
            except ValueError:
                raise ParseError(f"line {lineno}: malformed value {val!r}") from None
            if j < 1:
                raise ParseError(f"line {lineno}: index {j} is not 1-based")
            if j > MAX_FEATURES:
                raise ParseError(f"line {lineno}: index {j} exceeds the supported {MAX_FEATURES} features")
            if j <= prev:
                raise ParseError(f"line {lineno}: indices must increase strictly ({prev} then {j})")
            if not math.isfinite(x):
                raise ParseError(f"line {lineno}: non-finite value {val!r}")
            prev = j
            idxs.append(j)
            vals.append(x)
        max_idx = max(max_idx, prev)
        rows.append((idxs, vals))
    if not labels:
        raise ParseError("line 1: empty LIBSVM input")
    X = np.zeros((len(rows), max_idx))
    for r, (idxs, vals) in enumerate(rows):
        if idxs:
            X[r, np.asarray(idxs) - 1] = vals
    return Dataset(X, np.asarray(labels, dtype=np.int64), {"format": "libsvm"})


def serialize_libsvm(dataset: Dataset) -> str:
    """LIBSVM text with shortest round-tripping decimals; zeros are omitted.

    If the last feature column is all zero, the first line carries an explicit
    ``<dim>:0.0`` entry so reparsing recovers the dimension.
    """
    out = io.StringIO()
    pad = dataset.dim > 0 and not np.any(dataset.X[:, -1])
    for r, (x, label) in enumerate(zip(dataset.X, dataset.y)):
        parts = [f"{int(label):+d}" if label > 0 else str(int(label))]
        nz = np.flatnonzero(x)
        parts.extend(f"{j + 1}:{float(x[j])!r}" for j in nz)
        if pad and r == 0:
            parts.append(f"{dataset.dim}:0.0")
        out.write(" ".join(parts))
        out.write("\n")
    return out.getvalue()


# -- IDX ------------------------------------------------------------------------------


def parse_idx(source) -> np.ndarray:
    """Parse an IDX file of unsigned bytes into an array of its declared shape."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    if len(data) < 4:
        raise ParseError(f"byte 0: header truncated ({len(data)} bytes)")
    if data[0] != 0 or data[1] != 0:
        raise ParseError("byte 0: bad magic, expected two zero bytes")
    if data[2] != 0x08:
        raise ParseError(f"byte 2: unsupported element type 0x{data[2]:02x} (only unsigned byte 0x08)")
    ndim = data[3]
    if ndim < 1:
        raise ParseError("byte 3: zero dimensions")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise ParseError(f"byte 4: dimension sizes truncated, need {header} bytes, have {len(data)}")
    shape = struct.unpack(">" + "I" * ndim, data[4:header])
    expected = int(np.prod(shape, dtype=np.int64))
    actual = len(data) - header
    if actual != expected:
        raise ParseError(f"byte {header}: payload has {actual} bytes, expected {expected} for shape {shape}")
    return np.frombuffer(data, dtype=np.uint8, offset=header).reshape(shape).copy()


def load_idx_dataset(images_path, labels_path) -> Dataset:
    """Images (n, rows, cols) and labels (n,) as a dataset with raw pixel values."""
    images = parse_idx(images_path)
    labels = parse_idx(labels_path)
    if images.ndim != 3 or labels.ndim != 1:
        raise ParseError(f"byte 3: expected 3-D images and 1-D labels, got {images.ndim}-D and {labels.ndim}-D")
    if images.shape[0] != labels.shape[0]:
        raise ParseError(f"byte 4: {images.shape[0]} images but {labels.shape[0]} labels")
    X = images.reshape(images.shape[0], -1).astype(np.float64)
    return Dataset(X, labels.astype(np.int64), {"format": "idx", "value_range": (0.0, 255.0)})


# -- preprocessing -------------------------------------------------------------------------


def binarize_labels(dataset: Dataset, positive=None, negative=None, seed: int | None = None) -> Dataset:
    """Map labels in ``positive`` to +1 and the rest to -1.

    Without ``positive`` the observed classes are split at random (by
    ``seed``) into two halves of equal size. When ``negative`` is given too,
    every observed label must belong to one of the two sets.
    """
    observed = sorted(int(c) for c in np.unique(dataset.y))
    if positive is None:
        if len(observed) % 2:
            raise ValueError(f"random partition needs an even class count, got {len(observed)}")
        gen = RngStream(0 if seed is None else seed, 7).generator
        perm = gen.permutation(len(observed))
        positive = [observed[i] for i in sorted(perm[: len(observed) // 2])]
    positive = sorted(int(c) for c in positive)
    if negative is not None:
        negative = sorted(int(c) for c in negative)
        missing = [c for c in observed if c not in positive and c not in negative]
        if missing:
            raise ValueError(f"labels {missing} are in neither side of the partition")
    y = np.where(np.isin(dataset.y, positive), 1, -1)
    meta = dict(dataset.meta)
    meta["partition"] = {"positive": positive, "negative": [c for c in observed if c not in positive]}
    return Dataset(dataset.X.copy(), y, meta)


@dataclass(frozen=True)
class Transform:
    """Per-feature affine map ``(x - shift) * scale`` fitted on training data."""

    mode: str
    shift: np.ndarray
    scale: np.ndarray
    then: "Transform | None" = None

    def apply(self, dataset: Dataset) -> Dataset:
        X = (dataset.X - self.shift) * self.scale
        out = Dataset(X, dataset.y.copy(), dict(dataset.meta))
        return self.then.apply(out) if self.then is not None else out


STD_FLOOR = 1e-12


def _fit(X: np.ndarray, mode: str, value_range=None) -> Transform:
    if mode == "unit_interval":
        if value_range is not None:
            lo = np.full(X.shape[1], float(value_range[0]))
            span = np.full(X.shape[1], float(value_range[1]) - float(value_range[0]))
        else:
            lo = X.min(axis=0)
            span = X.max(axis=0) - lo
        scale = np.where(span > 0, 1.0 / np.where(span > 0, span, 1.0), 0.0)
        return Transform(mode, lo, scale)
    if mode == "standardize":
        mean = X.mean(axis=0)
        std = np.maximum(X.std(axis=0), STD_FLOOR)
        return Transform(mode, mean, 1.0 / std)
    raise ValueError(f"unknown normalisation mode {mode!r}")


def normalize(dataset: Dataset, mode: str = "unit_interval", value_range=None) -> tuple[Dataset, Transform]:
    """Normalise features; the returned transform reapplies the training statistics.

    ``unit_interval`` min-max scales each feature (constant features map to
    0), or uses ``value_range`` (e.g. ``(0, 255)`` for pixels) when given.
    ``standardize`` centres and divides by the standard deviation, floored
    at 1e-12. ``unit_then_standardize`` chains the two.
    """
    if len(dataset) == 0:
        raise ValueError("cannot normalise an empty dataset")
    if value_range is None:
        value_range = dataset.meta.get("value_range")
    if mode == "unit_then_standardize":
        first = _fit(dataset.X, "unit_interval", value_range)
        mid = first.apply(dataset)
        second = _fit(mid.X, "standardize")
        t = Transform(mode, first.shift, first.scale, then=second)
        return t.apply(dataset), t
    t = _fit(dataset.X, mode, value_range if mode == "unit_interval" else None)
    return t.apply(dataset), t


def split(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Shuffle by ``seed`` and cut into train/test parts."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    n = len(dataset)
    n_train = int(math.floor(train_fraction * n + 0.5))
    if n_train == 0 or n_train == n:
        raise ValueError(f"split of n={n} at {train_fraction} leaves an empty part")
    perm = RngStream(seed, 11).generator.permutation(n)
    return dataset.subset(perm[:n_train]), dataset.subset(perm[n_train:])


def neighboring(dataset: Dataset, index: int, replacement: Example) -> Dataset:
    """Copy of ``dataset`` with example ``index`` replaced."""
    if not 0 <= index < len(dataset):
        raise IndexError(f"index {index} out of range for n={len(dataset)}")
    feats = np.asarray(replacement.features, dtype=np.float64).reshape(-1)
    if feats.shape[0] != dataset.dim:
        raise ValueError(f"replacement has dimension {feats.shape[0]}, dataset has {dataset.dim}")
    X = dataset.X.copy()
    y = dataset.y.copy()
    X[index] = feats
    y[index] = int(replacement.label)
    return Dataset(X, y, dict(dataset.meta))


def make_binary_dataset(n: int, dim: int, seed: int = 0, separation: float = 1.0, pos_fraction: float = 0.3) -> Dataset:
    """Two Gaussian classes with means ``+-separation/2`` along a random unit direction.

    Features are mapped into ``[0, 1]`` by a fixed logistic squashing so the
    data resemble normalised benchmark features.
    """
    gen = RngStream(seed, 13).generator
    direction = gen.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    y = np.where(gen.random(n) < pos_fraction, 1, -1)
    if not (y == 1).any():
        y[0] = 1
    if not (y == -1).any():
        y[-1] = -1
    X = gen.standard_normal((n, dim)) + 0.5 * separation * y[:, None] * direction[None, :]
    X = 1.0 / (1.0 + np.exp(-X))
    return Dataset(X, y, {"format": "synthetic", "seed": seed})
