"""Datasets with partial binary labels, CSV I/O, synthetic generators and folds.

Labels are stored as integers in {-1, 0, +1}; 0 marks an unlabeled point.
"""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Raised for malformed datasets or CSV input."""


@dataclass(frozen=True)
class Dataset:
    """Points with partial +-1 labels.

    Attributes:
        points: (m, d) float array.
        labels: (m,) int array with entries in {-1, 0, +1}; 0 = unlabeled.
        truth: optional (m,) int array of +-1 ground-truth labels, used only
            for evaluation.
    """

    points: np.ndarray
    labels: np.ndarray
    truth: np.ndarray | None = field(default=None)

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        labels = np.asarray(self.labels).astype(int).ravel()
        if points.ndim != 2 or points.shape[1] < 1:
            raise DataError("points must be a 2-d array with at least one column")
        if labels.shape[0] != points.shape[0]:
            raise DataError(
                f"{labels.shape[0]} labels given for {points.shape[0]} points"
            )
        if not np.all(np.isin(labels, (-1, 0, 1))):
            raise DataError("labels must lie in {-1, 0, +1}")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)
        if self.truth is not None:
            truth = np.asarray(self.truth).astype(int).ravel()
            if truth.shape != labels.shape:
                raise DataError("truth must have one entry per point")
            object.__setattr__(self, "truth", truth)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def labeled(self) -> np.ndarray:
        """Indices of labeled points, ascending."""
        return np.flatnonzero(self.labels)

    @property
    def unlabeled(self) -> np.ndarray:
        return np.flatnonzero(self.labels == 0)

    @property
    def targets(self) -> np.ndarray:
        """Labels of the labeled points as a float vector."""
        return self.labels[self.labeled].astype(float)

    def with_labels(self, labels) -> Dataset:
        return replace(self, labels=np.asarray(labels))

    def fingerprint(self) -> str:
        """Short content hash of points and labels."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.points).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class GroupSet:
    """Disjoint index sets over the points of a dataset."""

    groups: tuple[np.ndarray, ...]
    m: int

    def __post_init__(self):
        groups = tuple(np.asarray(g, dtype=int).ravel() for g in self.groups)
        seen = np.zeros(self.m, dtype=bool)
        for g in groups:
            if g.size == 0:
                raise DataError("groups must be nonempty")
            if g.min() < 0 or g.max() >= self.m:
                raise DataError("group index out of range")
            if seen[g].any() or np.unique(g).size != g.size:
                raise DataError("groups must be disjoint")
            seen[g] = True
        object.__setattr__(self, "groups", groups)

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)


@dataclass(frozen=True)
class SplitPlan:
    """Assignment of labeled indices to cross-validation folds."""

    folds: tuple[np.ndarray, ...]
    seed: int

    def __len__(self):
        return len(self.folds)


# --------------------------------------------------------------------------
# CSV


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(path, label_column: int = -1) -> Dataset:
    """Read a comma-separated dataset.

    A first row containing any non-numeric field is treated as a header.
    The label column (default: last) must hold -1, 0 or 1.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(x.strip() for x in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    start = 0
    if not all(_is_number(x) for x in rows[0]):
        start = 1
    width = len(rows[start]) if start < len(rows) else 0
    if width < 2:
        raise DataError(f"{path}: need at least one feature and one label column")
    col = label_column % width
    points, labels = [], []
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
        feats = []
        for j, text in enumerate(row):
            try:
                value = float(text)
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: column {j + 1}: cannot parse {text!r}"
                ) from None
            if j == col:
                if value not in (-1.0, 0.0, 1.0):
                    raise DataError(
                        f"{path}:{lineno}: label {text.strip()!r} not in {{-1, 0, 1}}"
                    )
                labels.append(int(value))
            else:
                if not np.isfinite(value):
                    raise DataError(f"{path}:{lineno}: column {j + 1}: non-finite value")
                feats.append(value)
        points.append(feats)
    return Dataset(np.array(points, dtype=float), np.array(labels, dtype=int))


def save_csv(dataset: Dataset, path, header: bool = False) -> None:
    """Write features followed by the label column. Floats use repr, so
    load_csv(save_csv(d)) reproduces the points bit-exactly."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow([f"x{j}" for j in range(dataset.dim)] + ["label"])
        for x, y in zip(dataset.points, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


def load_table(path) -> list[dict]:
    """Read a headed CSV report (CV tables, benchmark tables, predictions,
    traces) into a list of row dicts; numeric fields become floats."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames:
            raise DataError(f"{path}: empty file")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                raise DataError(f"{path}:{lineno}: expected {len(reader.fieldnames)} fields")
            rows.append({k: float(v) if _is_number(v) else v for k, v in row.items()})
    return rows


# --------------------------------------------------------------------------
# Generators


def sample_labels(truth, per_class: int, rng: np.random.Generator) -> np.ndarray:
    """Reveal `per_class` uniformly chosen labels of each class."""
    truth = np.asarray(truth)
    labels = np.zeros_like(truth)
    for cls in (-1, 1):
        idx = np.flatnonzero(truth == cls)
        if per_class > idx.size:
            raise DataError(f"cannot label {per_class} points of class {cls:+d}")
        chosen = rng.choice(idx, size=per_class, replace=False)
        labels[chosen] = cls
    return labels


def two_moons(m: int = 200, noise: float = 0.05, labeled_per_class: int = 4,
              seed: int = 0) -> Dataset:
    """Two half circles of unit radius.

    The +1 moon is the upper half circle centred at the origin; the -1 moon
    is the lower half circle centred at (0.5, -0.25).
    """
    if m % 2:
        raise DataError("two_moons needs an even number of points")
    if labeled_per_class > m // 2:
        raise DataError("labeled_per_class exceeds class size")
    rng = np.random.default_rng(seed)
    half = m // 2
    theta_up = rng.uniform(0.0, np.pi, half)
    theta_lo = rng.uniform(0.0, np.pi, half)
    upper = np.column_stack([np.cos(theta_up), np.sin(theta_up)])
    lower = np.column_stack([np.cos(theta_lo) + 0.5, -np.sin(theta_lo) - 0.25])
    points = np.vstack([upper, lower])
    if noise > 0:
        points = points + noise * rng.standard_normal(points.shape)
    truth = np.r_[np.ones(half, dtype=int), -np.ones(half, dtype=int)]
    labels = sample_labels(truth, labeled_per_class, rng)
    return Dataset(points, labels, truth)


def two_gaussians(m: int = 1500, separation: float = 2.5, dims: int = 241,
                  labeled_per_class: int = 50, seed: int = 0) -> Dataset:
    """Balanced mixture of two unit-variance isotropic Gaussians whose means
    are `separation` apart (along a random direction)."""
    if m % 2:
        raise DataError("two_gaussians needs an even number of points")
    if dims < 1:
        raise DataError("dims must be >= 1")
    if labeled_per_class > m // 2:
        raise DataError("labeled_per_class exceeds class size")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(dims)
    direction /= np.linalg.norm(direction)
    shift = 0.5 * separation * direction
    half = m // 2
    points = rng.standard_normal((m, dims))
    points[:half] += shift
    points[half:] -= shift
    truth = np.r_[np.ones(half, dtype=int), -np.ones(half, dtype=int)]
    labels = sample_labels(truth, labeled_per_class, rng)
    return Dataset(points, labels, truth)


def relabel(dataset: Dataset, per_class: int, seed: int) -> Dataset:
    """Draw a fresh labeled subset from the ground truth."""
    if dataset.truth is None:
        raise DataError("relabel needs ground-truth labels")
    rng = np.random.default_rng(seed)
    return dataset.with_labels(sample_labels(dataset.truth, per_class, rng))


# --------------------------------------------------------------------------
# Groups and folds


def groups_from_labels(dataset: Dataset) -> GroupSet:
    """One group per label value present (+1 first), labeled points only."""
    groups = [np.flatnonzero(dataset.labels == v) for v in (1, -1)]
    groups = [g for g in groups if g.size]
    if not groups:
        raise DataError("groups_from_labels needs at least one labeled point")
    return GroupSet(tuple(groups), dataset.m)


def make_folds(dataset: Dataset, folds: int, seed: int = 0) -> SplitPlan:
    """Shuffle the labeled indices and deal them round-robin into folds.

    Fold sizes differ by at most one. Labeled points are dealt class by
    class so each fold mixes both classes when possible.
    """
    labeled = dataset.labeled
    if folds < 1:
        raise DataError("folds must be >= 1")
    if folds > labeled.size:
        raise DataError(f"{folds} folds requested for {labeled.size} labeled points")
    rng = np.random.default_rng(seed)
    order = []
    for cls in (1, -1):
        idx = labeled[dataset.labels[labeled] == cls]
        order.extend(rng.permutation(idx).tolist())
    buckets = [[] for _ in range(folds)]
    for k, i in enumerate(order):
        buckets[k % folds].append(i)
    return SplitPlan(tuple(np.sort(np.array(b, dtype=int)) for b in buckets), seed)


def hide(dataset: Dataset, indices) -> Dataset:
    """Copy of `dataset` with the given points marked unlabeled."""
    labels = dataset.labels.copy()
    labels[np.asarray(indices, dtype=int)] = 0
    return dataset.with_labels(labels)
