"""Spectral machinery for H = L^2(0, 1) with A = -d^2/dx^2 (Dirichlet).

Elements of H are stored as 1-D float arrays of coefficients in the
orthonormal sine basis ``e_k(x) = sqrt(2) sin(k pi x)``; entry ``k - 1`` holds
``<x, e_k>``.  Every operator below is diagonal in this basis.
"""
from __future__ import annotations

import numpy as np


def as_spectral(v, name="v"):
    """Validate and return ``v`` as a finite 1-D float array of length >= 1."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"{name} must be a non-empty 1-D coefficient vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite coefficients")
    return arr


def unit_vector(k, dim):
    """Coefficient vector of e_k in a ``dim``-dimensional truncation."""
    if not 1 <= k <= dim:
        raise ValueError(f"mode {k} outside 1..{dim}")
    v = np.zeros(dim)
    v[k - 1] = 1.0
    return v


def eigenvalue(k):
    """lambda_k = (k pi)^2."""
    if k < 1:
        raise ValueError("eigenvalue index must be >= 1")
    return (k * np.pi) ** 2


def eigenvalues(dim):
    """lambda_1, ..., lambda_dim as an array."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return (np.arange(1, dim + 1) * np.pi) ** 2


def evaluate_basis(k, x):
    """Point values of e_k on [0, 1]."""
    if k < 1:
        raise ValueError("basis index must be >= 1")
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("x must lie in [0, 1]")
    return np.sqrt(2.0) * np.sin(k * np.pi * x)


def apply_semigroup(t, v):
    """S(t) v = sum_k exp(-lambda_k t) v_k e_k."""
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    v = as_spectral(v)
    return np.exp(-eigenvalues(v.size) * t) * v


def hs_fractional_norm(s, v):
    """||v||_s = ||A^{s/2} v||_H."""
    if s < 0:
        raise ValueError("smoothness index must be nonnegative")
    v = as_spectral(v)
    if s == 0:
        return float(np.sqrt(h_inner(v, v)))
    return float(np.sqrt(np.sum(eigenvalues(v.size) ** s * v**2)))


def h_inner(v, w):
    """Parseval form of <v, w>_H; the shorter vector is zero padded."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    n = min(v.size, w.size)
    return float(np.dot(v[:n], w[:n]))


def h_norm(v):
    return float(np.sqrt(h_inner(v, v)))


def pad(v, dim):
    """Zero-pad or truncate a coefficient vector to ``dim`` entries."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(dim)
    n = min(dim, v.size)
    out[:n] = v[:n]
    return out


def synthesize(v, x):
    """Evaluate sum_k v_k e_k(x) at points ``x``."""
    v = as_spectral(v)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k = np.arange(1, v.size + 1)
    return np.sqrt(2.0) * np.sin(np.pi * np.outer(x, k)) @ v
