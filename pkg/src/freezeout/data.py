"""Small deterministic datasets for desk-scale runs."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

SPIRAL_TURNS = 1.75
SPIRAL_START = np.pi / 2


@dataclass
class Dataset:
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    num_classes: int

    @property
    def input_shape(self):
        return tuple(self.train_x.shape[1:])

    def __len__(self):
        return len(self.train_y) + len(self.test_y)

    def split(self, name):
        if name == "train":
            return self.train_x, self.train_y
        if name == "test":
            return self.test_x, self.test_y
        raise ConfigurationError(f"unknown split {name!r}")


def _split(x, y, num_classes, rng, test_fraction):
    order = rng.permutation(len(y))
    n_test = int(round(len(y) * test_fraction))
    test, train = order[:n_test], order[n_test:]
    return Dataset(x[train], y[train], x[test], y[test], num_classes)


def spiral_point(theta, label):
    """Noise-free point on spiral arm ``label`` at angle ``theta``."""
    theta_max = SPIRAL_START + SPIRAL_TURNS * 2 * np.pi
    r = theta / theta_max
    sign = 1.0 if label == 0 else -1.0
    return sign * np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def gen_two_spirals(n, noise=0.0, seed=0, test_fraction=0.2):
    """Two interleaved spirals, ``n`` points per class, radius at most 1.

    Arm 1 is arm 0 rotated by pi. Points are evenly spaced in angle, then
    perturbed by isotropic Gaussian noise of std ``noise``.
    """
    if n < 1 or noise < 0:
        raise ConfigurationError("need n >= 1 and noise >= 0")
    rng = np.random.default_rng(seed)
    theta_max = SPIRAL_START + SPIRAL_TURNS * 2 * np.pi
    theta = np.linspace(SPIRAL_START, theta_max, n)
    x = np.concatenate([spiral_point(theta, 0), spiral_point(theta, 1)])
    y = np.repeat(np.arange(2), n)
    if noise > 0:
        x = x + noise * rng.standard_normal(x.shape)
    return _split(x, y, 2, rng, test_fraction)


def bar_template(label, num_classes, size):
    """Unit-norm image of a bar through the centre at angle ``pi * label / num_classes``."""
    angle = np.pi * label / num_classes
    c = (size - 1) / 2
    yy, xx = np.mgrid[0:size, 0:size] - c
    # distance of each pixel centre from the line through the centre
    dist = np.abs(-np.sin(angle) * xx + np.cos(angle) * yy)
    img = np.clip(1.0 - dist, 0.0, None)
    return img / np.linalg.norm(img)


def gen_toy_images(num_classes, image_size, n, seed=0, noise=0.0, test_fraction=0.2):
    """``n`` single-channel images of oriented bars, one orientation per class.

    Each image is its class template times a random brightness in [0.5, 1.5],
    plus Gaussian pixel noise of std ``noise``. Labels cycle through the
    classes before shuffling, so the histogram is as flat as ``n`` allows.
    """
    if image_size < 8:
        raise ConfigurationError("image_size must be >= 8")
    if num_classes < 2 or n < 1:
        raise ConfigurationError("need num_classes >= 2 and n >= 1")
    rng = np.random.default_rng(seed)
    templates = np.stack([bar_template(k, num_classes, image_size) for k in range(num_classes)])
    y = np.arange(n) % num_classes
    scale = rng.uniform(0.5, 1.5, size=n)
    x = templates[y] * scale[:, None, None]
    if noise > 0:
        x = x + noise * rng.standard_normal(x.shape)
    return _split(x[:, None, :, :], y, num_classes, rng, test_fraction)


def load_csv(path, num_features, num_classes, test_fraction=0.2, seed=0):
    """Read ``f1,...,fk,label`` rows, split, and standardize with train statistics.

    Blank lines and lines starting with ``#`` are skipped.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"dataset file not found: {path}")
    feats, labels = [], []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) != num_features + 1:
                raise ConfigurationError(
                    f"{path}:{lineno}: expected {num_features + 1} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row[:-1]]
                label = int(row[-1])
            except ValueError as exc:
                raise ConfigurationError(f"{path}:{lineno}: {exc}") from None
            if not 0 <= label < num_classes:
                raise ConfigurationError(
                    f"{path}:{lineno}: label {label} outside [0, {num_classes})")
            feats.append(vals)
            labels.append(label)
    if not labels:
        raise ConfigurationError(f"{path}: no data rows")
    x = np.asarray(feats, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    ds = _split(x, y, num_classes, np.random.default_rng(seed), test_fraction)
    mean = ds.train_x.mean(axis=0)
    std = ds.train_x.std(axis=0)
    std[std == 0] = 1.0
    ds.train_x = (ds.train_x - mean) / std
    ds.test_x = (ds.test_x - mean) / std
    return ds
