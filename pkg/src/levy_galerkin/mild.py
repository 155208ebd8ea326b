"""Exact mild solutions X(T) and X_h(T) for additive Levy noise.

Forcing f and noise coefficient G = diag(g) are constant in time, so the
deterministic convolution has the closed form (1 - exp(-lambda T)) / lambda
per mode and the stochastic convolution is a finite sum over the jumps of the
sample path.  Nothing is time-stepped.

The reference solution X is the spectral solution with ``ref_dim`` modes,
i.e. ``solve_mild(spec, path, SpectralTruncation(ref_dim))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import (SpectralTruncation, discrete_eigenvalues, from_modal,
                  modal_load)
from .levy import LevyMeasureSpec, covariance_diag
from .spectral import as_spectral, eigenvalues, pad


@dataclass(frozen=True)
class ModelSpec:
    x0: np.ndarray
    f_const: np.ndarray
    g_diag: np.ndarray
    T: float
    levy: LevyMeasureSpec

    def __post_init__(self):
        for name in ("x0", "f_const", "g_diag"):
            arr = as_spectral(getattr(self, name), name).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError("horizon T must be positive")
        object.__setattr__(self, "T", float(self.T))

    @property
    def data_dim(self):
        """Number of sine modes that carry data or noise."""
        return max(self.x0.size, self.f_const.size, self.g_diag.size, self.levy.n_modes)

    def noise_weights(self, dim=None):
        """q_k g_k^2 for k = 1..dim (zero where either factor is absent)."""
        dim = self.data_dim if dim is None else dim
        return pad(covariance_diag(self.levy), dim) * pad(self.g_diag, dim) ** 2

    def __eq__(self, other):
        if not isinstance(other, ModelSpec):
            return NotImplemented
        return (self.T == other.T and self.levy == other.levy
                and all(np.array_equal(getattr(self, n), getattr(other, n))
                        for n in ("x0", "f_const", "g_diag")))

    __hash__ = None


@dataclass(frozen=True)
class SolutionSample:
    coeffs: np.ndarray  # natural coordinates of disc
    disc: object
    path_id: int | None = None


def _phi1(lam, T):
    # (1 - exp(-lam T)) / lam without cancellation for small lam T
    return -np.expm1(-lam * T) / lam


def modal_deterministic(spec, disc):
    """Modal coordinates of S_h(T) P_h x0 + int_0^T S_h(T-s) P_h f ds."""
    dim = max(spec.x0.size, spec.f_const.size)
    C = modal_load(disc, dim)
    lam = discrete_eigenvalues(disc)
    return (np.exp(-lam * spec.T) * (C @ pad(spec.x0, dim))
            + _phi1(lam, spec.T) * (C @ pad(spec.f_const, dim)))


def modal_stochastic(spec, path, disc):
    """Modal coordinates of the stochastic convolution for one path."""
    if path.horizon != spec.T:
        raise ValueError(f"path horizon {path.horizon} does not match T={spec.T}")
    lam = discrete_eigenvalues(disc)
    g = pad(spec.g_diag, max(path.n_modes, spec.g_diag.size))
    amp = g[path.modes - 1] * path.sizes
    lag = spec.T - path.times
    if isinstance(disc, SpectralTruncation):
        out = np.zeros(disc.N)
        sel = path.modes <= disc.N
        k = path.modes[sel] - 1
        np.add.at(out, k, np.exp(-lam[k] * lag[sel]) * amp[sel])
        return out
    if len(path) == 0:
        return np.zeros(lam.size)
    C = modal_load(disc, g.size)
    return (np.exp(-np.outer(lam, lag)) * C[:, path.modes - 1]) @ amp


def deterministic_part(spec, disc):
    return from_modal(modal_deterministic(spec, disc), disc)


def stochastic_convolution(spec, path, disc):
    """int_0^T S_h(T-s) P_h G dL(s), evaluated jump by jump."""
    return from_modal(modal_stochastic(spec, path, disc), disc)


def solve_mild(spec, path, disc, path_id=None):
    y = modal_deterministic(spec, disc) + modal_stochastic(spec, path, disc)
    return SolutionSample(from_modal(y, disc), disc, path_id)


def analytic_mean(spec, disc):
    """E X_h(T); the stochastic convolution has mean zero."""
    return deterministic_part(spec, disc)


def modal_noise_variance(spec, disc):
    """E y_i^2 of the stochastic convolution, per modal coordinate i."""
    lam = discrete_eigenvalues(disc)
    w = spec.noise_weights()
    if isinstance(disc, SpectralTruncation):
        out = np.zeros(disc.N)
        n = min(disc.N, w.size)
        out[:n] = w[:n] * _phi1(2 * lam[:n], spec.T)
        return out
    C = modal_load(disc, w.size)
    return (C**2 @ w) * _phi1(2 * lam, spec.T)


def analytic_second_moment(spec, disc):
    """E ||X_h(T)||_H^2 = ||E X_h(T)||^2 + trace of the noise covariance."""
    m = modal_deterministic(spec, disc)
    return float(m @ m + np.sum(modal_noise_variance(spec, disc)))


def coupled_noise_error(spec, disc, ref_dim):
    """E ||Z_h - Z||^2 for stochastic convolutions driven by the same path.

    Per noise mode k this is q_k g_k^2 int_0^T ||F_h(r) e_k||^2 dr, which has a
    closed form in the discrete eigenpairs.
    """
    w = spec.noise_weights(ref_dim)
    lam_ref = eigenvalues(ref_dim)
    T = spec.T
    if isinstance(disc, SpectralTruncation):
        tail = w[disc.N:]
        return float(np.sum(tail * _phi1(2 * lam_ref[disc.N:], T)))
    lam = discrete_eigenvalues(disc)
    C2 = modal_load(disc, ref_dim) ** 2
    own = C2.T @ _phi1(2 * lam, T)
    cross = np.einsum("ik,ik->k", C2, _phi1(lam[:, None] + lam_ref[None, :], T))
    per_mode = own - 2.0 * cross + _phi1(2 * lam_ref, T)
    return float(np.sum(w * per_mode))


def deterministic_error_sq(spec, disc, ref_dim):
    """||E X_h(T) - E X(T)||_H^2 computed exactly (reference: ref_dim modes)."""
    ref = modal_deterministic(spec, SpectralTruncation(ref_dim))
    if isinstance(disc, SpectralTruncation):
        return float(np.sum(ref[disc.N:] ** 2))
    y = modal_deterministic(spec, disc)
    C = modal_load(disc, ref_dim)
    return float(max(y @ y - 2.0 * y @ (C @ ref) + ref @ ref, 0.0))


def analytic_strong_error_sq(spec, disc, ref_dim):
    """E ||X_h(T) - X(T)||_H^2 for the coupled pair."""
    return deterministic_error_sq(spec, disc, ref_dim) + coupled_noise_error(spec, disc, ref_dim)
