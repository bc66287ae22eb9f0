"""Shared-subspace synchronization of source and target anchor features.

Fit stacks the two training matrices, z-scores per column with pooled
moments, re-centers exactly, and takes the thin SVD of the centered matrix.
The right-singular-vector rows form an orthonormal basis; projection applies
the frozen standardization, centering, and rotation to new rows without
refitting. Near-zero singular values are dropped, and severe ill-conditioning
raises a fallback flag so the caller can retry with the global anchors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

_SV_DROP = 1e-10  # keep sigma_k >= 1e-10 * sigma_1
_COND_LIMIT = 1e8
_CONST_TOL = 1e-12


@dataclass
class AlignmentProjection:
    anchor_features: list
    mu: np.ndarray
    sigma: np.ndarray
    constant_cols: np.ndarray  # bool per column; z forced to 0 there
    center: np.ndarray
    basis: np.ndarray  # d x width, rows orthonormal
    singular_values: np.ndarray
    fallback_triggered: bool
    flags: list = field(default_factory=list)

    @property
    def d(self):
        return self.basis.shape[0]

    @property
    def width(self):
        return self.basis.shape[1]


def _standardize_cols(X, mu, sigma, constant_cols):
    z = np.zeros_like(X, dtype=np.float64)
    live = ~constant_cols
    z[:, live] = (X[:, live] - mu[live]) / sigma[live]
    return z


def fit_alignment(S_train, T_train, anchor_features=None):
    """Fit the shared projection on stacked source and target training rows.

    Either matrix may be empty (zero rows); combined rows must be >= 9.
    """
    S = np.asarray(S_train, dtype=np.float64)
    T = np.asarray(T_train, dtype=np.float64)
    if S.size == 0:
        S = S.reshape(0, T.shape[1] if T.ndim == 2 else 0)
    if T.size == 0:
        T = T.reshape(0, S.shape[1])
    if S.shape[1] != T.shape[1]:
        raise ValueError("source and target column counts differ")
    X = np.vstack([S, T])
    n, width = X.shape
    if n < 9:
        raise ValueError(f"need at least 9 combined training rows, got {n}")
    if not np.isfinite(X).all():
        raise ValueError("training matrix contains non-finite values")
    if anchor_features is None:
        anchor_features = list(range(width))
    if len(anchor_features) != width:
        raise ValueError("anchor feature count does not match matrix width")

    mu = X.mean(axis=0)
    sigma = X.std(axis=0)
    constant_cols = sigma < _CONST_TOL
    flags = []
    if constant_cols.any():
        flags.append("constant_columns")
    z = _standardize_cols(X, mu, sigma, constant_cols)
    center = z.mean(axis=0)  # ~0 already; re-center exactly
    zc = z - center

    _, svals, vt = np.linalg.svd(zc, full_matrices=False)
    fallback = False
    if svals[0] <= 0.0:
        keep = 0
    else:
        keep = int((svals >= _SV_DROP * svals[0]).sum())
    if keep < 2:
        fallback = True
        keep = max(keep, 1)
        flags.append("degenerate_rank")
    elif svals[0] / svals[keep - 1] > _COND_LIMIT:
        fallback = True
        flags.append("ill_conditioned")
    basis = vt[:keep].copy()
    for row in basis:
        lead = int(np.argmax(np.abs(row)))
        if row[lead] < 0:
            row *= -1.0
    return AlignmentProjection(
        anchor_features=list(anchor_features),
        mu=mu,
        sigma=sigma,
        constant_cols=constant_cols,
        center=center,
        basis=basis,
        singular_values=svals[:keep].copy(),
        fallback_triggered=fallback,
        flags=flags,
    )


def project(p, X):
    """Apply the frozen standardization, centering, and rotation to rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != p.width:
        raise ValueError(f"expected {p.width} columns, got {X.shape}")
    z = _standardize_cols(X, p.mu, p.sigma, p.constant_cols)
    return (z - p.center) @ p.basis.T


def reconstruct(p, projected):
    """Back-project aligned rows into standardized feature space."""
    projected = np.asarray(projected, dtype=np.float64)
    return projected @ p.basis + p.center


def save_projection(p, path):
    payload = {
        "anchor_features": [int(a) for a in p.anchor_features],
        "mu": p.mu.tolist(),
        "sigma": p.sigma.tolist(),
        "constant_cols": [bool(c) for c in p.constant_cols],
        "center": p.center.tolist(),
        "basis": p.basis.tolist(),
        "singular_values": p.singular_values.tolist(),
        "fallback_triggered": bool(p.fallback_triggered),
        "flags": list(p.flags),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_projection(path):
    with open(path) as fh:
        payload = json.load(fh)
    return AlignmentProjection(
        anchor_features=list(payload["anchor_features"]),
        mu=np.asarray(payload["mu"], dtype=np.float64),
        sigma=np.asarray(payload["sigma"], dtype=np.float64),
        constant_cols=np.asarray(payload["constant_cols"], dtype=bool),
        center=np.asarray(payload["center"], dtype=np.float64),
        basis=np.asarray(payload["basis"], dtype=np.float64),
        singular_values=np.asarray(payload["singular_values"], dtype=np.float64),
        fallback_triggered=bool(payload["fallback_triggered"]),
        flags=list(payload["flags"]),
    )
