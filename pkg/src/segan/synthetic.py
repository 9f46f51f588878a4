"""Synthetic datasets used by the test suite, benchmarks and README examples."""
from __future__ import annotations

import csv

import numpy as np


def correlated_gaussian(n: int = 2000, d: int = 8, rho: float = 0.8, seed: int = 0):
    """Equicorrelated Gaussian features and a binary label (sign of their sum).

    Returns ``(features, labels)`` with features shaped (n, d).
    """
    rng = np.random.default_rng(seed)
    cov = np.full((d, d), rho) + (1.0 - rho) * np.eye(d)
    x = rng.multivariate_normal(np.zeros(d), cov, size=n)
    y = (x.sum(axis=1) > 0).astype(int)
    return x, y


def separable_binary(n: int = 2000, d: int = 8, seed: int = 0, rho: float = 0.0,
                     margin: float = 0.25):
    """Two classes split by a random hyperplane with a clear margin.

    Features are equicorrelated Gaussians (correlation ``rho``); samples within
    ``margin`` of the hyperplane are rejected and redrawn.
    """
    rng = np.random.default_rng(seed)
    cov = np.full((d, d), rho) + (1.0 - rho) * np.eye(d)
    w = rng.normal(size=d)
    w /= np.linalg.norm(w)
    kept = np.empty((0, d))
    while kept.shape[0] < n:
        x = rng.multivariate_normal(np.zeros(d), cov, size=n)
        kept = np.vstack([kept, x[np.abs(x @ w) > margin]])
    x = kept[:n]
    return x, (x @ w > 0).astype(int)


def write_table(path, features, labels=None, missing_rate: float = 0.0, seed: int = 0,
                label_name: str = "label"):
    """Write features (n, d) and optional labels to CSV, blanking MCAR cells."""
    rng = np.random.default_rng(seed)
    n, d = features.shape
    blank = rng.random((n, d)) < missing_rate
    header = [f"x{j}" for j in range(d)] + ([label_name] if labels is not None else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(n):
            row = ["" if blank[i, j] else repr(float(features[i, j])) for j in range(d)]
            if labels is not None:
                row.append(str(int(labels[i])))
            writer.writerow(row)
