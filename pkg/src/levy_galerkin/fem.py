"""Galerkin subspaces V_h: spectral truncation and P1 finite elements.

Both families are handled through a *modal* representation: coordinates
``y`` in an H-orthonormal eigenbasis of the discrete operator A_h.  In modal
coordinates the H inner product on V_h is the Euclidean one, S_h(t) is the
diagonal ``exp(-lambda_h t)``, and ``modal_load(disc, dim)`` maps spectral
coefficients of ``v`` to the modal coordinates of ``P_h v``.  Its transpose
expands a V_h element back into the sine basis.

Public projections return the natural coordinates of the family: the first
N sine coefficients for :class:`SpectralTruncation`, nodal values for
:class:`FemMesh`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .spectral import as_spectral, eigenvalues, pad


class ComputationError(RuntimeError):
    """A numerical routine failed to reach its accuracy contract."""


@dataclass(frozen=True)
class SpectralTruncation:
    """V_h = span(e_1, ..., e_N) with h := lambda_N^{-1/2} = 1/(N pi)."""

    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("SpectralTruncation needs N >= 1")

    @property
    def h(self):
        return 1.0 / (self.N * np.pi)

    @property
    def dim(self):
        return self.N


@dataclass(frozen=True)
class FemMesh:
    """Continuous P1 elements on the uniform mesh with M interior nodes."""

    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("FemMesh needs M >= 1")

    @property
    def h(self):
        return 1.0 / (self.M + 1)

    @property
    def dim(self):
        return self.M

    @property
    def nodes(self):
        return self.h * np.arange(1, self.M + 1)


@dataclass(frozen=True)
class FemOperator:
    h: float
    stiffness: np.ndarray
    mass: np.ndarray


@dataclass(frozen=True)
class DiscreteEigenSystem:
    """Generalized eigenpairs of (stiffness, mass); columns of ``vectors``
    are mass-orthonormal nodal vectors."""

    lambdas: np.ndarray
    vectors: np.ndarray


def _tridiag(diag, off, M):
    return (np.diag(np.full(M, diag)) + np.diag(np.full(M - 1, off), 1)
            + np.diag(np.full(M - 1, off), -1))


def assemble_p1(M):
    """Exact P1 stiffness and mass matrices for M interior nodes."""
    if int(M) != M or M < 1:
        raise ValueError("need at least one interior node")
    h = 1.0 / (M + 1)
    stiffness = _tridiag(2.0, -1.0, M) / h
    mass = _tridiag(4.0, 1.0, M) * (h / 6.0)
    for a in (stiffness, mass):
        a.setflags(write=False)
    return FemOperator(h, stiffness, mass)


def discrete_eigensystem(op):
    """Solve stiffness psi = lambda mass psi with mass-orthonormal psi."""
    try:
        lam, vecs = sla.eigh(op.stiffness, op.mass)
    except sla.LinAlgError as exc:
        raise ComputationError(f"generalized eigensolver failed: {exc}") from exc
    resid = np.linalg.norm(op.stiffness @ vecs - (op.mass @ vecs) * lam, axis=0)
    bad = np.flatnonzero(resid > 1e-10 * lam)
    if bad.size:
        raise ComputationError(
            f"eigenpair residuals too large for indices {bad.tolist()}: "
            f"max {resid[bad].max():.3e}")
    # fix the sign so that results are reproducible across LAPACK builds
    signs = np.sign(vecs[np.argmax(np.abs(vecs) > 1e-12, axis=0), np.arange(lam.size)])
    vecs = vecs * signs
    lam.setflags(write=False)
    vecs.setflags(write=False)
    return DiscreteEigenSystem(lam, vecs)


@lru_cache(maxsize=None)
def fem_system(M):
    op = assemble_p1(M)
    return op, discrete_eigensystem(op)


@lru_cache(maxsize=64)
def hat_loads(M, dim):
    """B[i, k-1] = <phi_i, e_k>_H by closed-form integration.

    For a hat function centred at x_i with half-width h,
    int phi_i sin(w x) dx = sin(w x_i) * 2 (1 - cos(w h)) / (w^2 h).
    """
    h = 1.0 / (M + 1)
    x = h * np.arange(1, M + 1)
    w = np.pi * np.arange(1, dim + 1)
    B = np.sqrt(2.0) * np.sin(np.outer(x, w)) * (2.0 * (1.0 - np.cos(w * h)) / (w**2 * h))
    B.setflags(write=False)
    return B


def discrete_eigenvalues(disc):
    if isinstance(disc, SpectralTruncation):
        return eigenvalues(disc.N)
    return fem_system(disc.M)[1].lambdas


@lru_cache(maxsize=64)
def modal_load(disc, dim):
    """Matrix C of shape (dim_h, dim) with modal(P_h v) = C @ v[:dim]."""
    if isinstance(disc, SpectralTruncation):
        C = np.eye(disc.N, dim)
    else:
        C = fem_system(disc.M)[1].vectors.T @ hat_loads(disc.M, dim)
    C.setflags(write=False)
    return C


def to_modal(c, disc):
    """Natural coordinates -> modal coordinates."""
    c = np.asarray(c, dtype=float)
    if isinstance(disc, SpectralTruncation):
        return c.copy()
    op, eig = fem_system(disc.M)
    return eig.vectors.T @ (op.mass @ c)


def from_modal(y, disc):
    y = np.asarray(y, dtype=float)
    if isinstance(disc, SpectralTruncation):
        return y.copy()
    return fem_system(disc.M)[1].vectors @ y


def _solve_spd_tridiag(a, rhs):
    if a.shape[0] == 1:  # solveh_banded rejects a 1x1 band
        return rhs / a[0, 0]
    # upper form for solveh_banded from a dense symmetric tridiagonal matrix
    band = np.vstack([np.r_[0.0, np.diag(a, 1)], np.diag(a)])
    return sla.solveh_banded(band, rhs)


def p_h_project(v, disc):
    """Coordinates of the H-orthogonal projection of ``v`` onto V_h."""
    v = as_spectral(v)
    if isinstance(disc, SpectralTruncation):
        return pad(v, disc.N)
    op, _ = fem_system(disc.M)
    rhs = hat_loads(disc.M, v.size) @ v
    return _solve_spd_tridiag(op.mass, rhs)


def r_h_project(v, disc):
    """Coordinates of the Hdot^1-orthogonal (Ritz) projection of ``v``."""
    v = as_spectral(v)
    if isinstance(disc, SpectralTruncation):
        return pad(v, disc.N)
    op, _ = fem_system(disc.M)
    rhs = hat_loads(disc.M, v.size) @ (eigenvalues(v.size) * v)
    return _solve_spd_tridiag(op.stiffness, rhs)


def to_spectral(c, disc, dim):
    """Sine coefficients (first ``dim``) of the V_h element with coordinates c."""
    c = np.asarray(c, dtype=float)
    if isinstance(disc, SpectralTruncation):
        return pad(c, dim)
    return hat_loads(disc.M, dim).T @ c


def h_inner_mixed(c, disc, v):
    """Exact <w, v>_H for w in V_h (coordinates c) and a sine-coefficient v."""
    v = np.asarray(v, dtype=float)
    if isinstance(disc, SpectralTruncation):
        n = min(disc.N, v.size)
        return float(np.dot(np.asarray(c)[:n], v[:n]))
    return float(np.asarray(c) @ (hat_loads(disc.M, v.size) @ v))


def vh_norm(c, disc):
    """H norm of a V_h element given in natural coordinates."""
    c = np.asarray(c, dtype=float)
    if isinstance(disc, SpectralTruncation):
        return float(np.linalg.norm(c))
    return float(np.sqrt(c @ (fem_system(disc.M)[0].mass @ c)))


def h_distance(c, disc, v):
    """Exact ||w - v||_H for w in V_h and v given by sine coefficients.

    Uses ||w||^2 - 2 <w, v> + ||v||^2, so nothing is lost to truncation of
    the (infinite) sine expansion of the piecewise linear w.
    """
    v = np.asarray(v, dtype=float)
    sq = vh_norm(c, disc) ** 2 - 2.0 * h_inner_mixed(c, disc, v) + float(v @ v)
    return float(np.sqrt(max(sq, 0.0)))


def apply_discrete_semigroup(t, c, disc):
    """S_h(t) c = exp(-t A_h) c in natural coordinates."""
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    y = to_modal(c, disc)
    return from_modal(np.exp(-discrete_eigenvalues(disc) * t) * y, disc)


def apply_F_h(t, v, disc, ref_dim):
    """(S_h(t) P_h - S(t)) v expanded in the first ``ref_dim`` sine modes."""
    if t <= 0:
        raise ValueError("F_h(t) needs t > 0")
    v = pad(as_spectral(v), ref_dim)
    C = modal_load(disc, ref_dim)
    y = np.exp(-discrete_eigenvalues(disc) * t) * (C @ v)
    return C.T @ y - np.exp(-eigenvalues(ref_dim) * t) * v


@lru_cache(maxsize=64)
def _alias_gram(disc, ref_dim):
    """I - C C^T: Gram matrix of the sine modes above ref_dim of V_h elements."""
    C = modal_load(disc, ref_dim)
    T = np.eye(C.shape[0]) - C @ C.T
    T = 0.5 * (T + T.T)
    T.setflags(write=False)
    return T


def _gram_matvec(t, disc, ref_dim):
    """v -> F^T F v, with ||F v||_H evaluated exactly for v in the first
    ref_dim modes.

    ||F v||^2 splits into the first ref_dim sine modes, where F is formed
    explicitly (C^T E C v - S v), and the higher modes of the V_h part,
    y^T (I - C C^T) y.  Forming the difference before squaring keeps the
    rounding error near eps / h^2 instead of eps / h^4.
    """
    C = modal_load(disc, ref_dim)
    alias = _alias_gram(disc, ref_dim)
    e = np.exp(-discrete_eigenvalues(disc) * t)
    s = np.exp(-eigenvalues(ref_dim) * t)

    def F(v):
        return C.T @ (e * (C @ v)) - s * v

    def matvec(v):
        return F(F(v)) + C.T @ (e * (alias @ (e * (C @ v))))

    return matvec


def operator_norm_F_h(t, disc, ref_dim, rtol=1e-10, max_iter=20000):
    """||F_h(t)||_{L(H)} on span(e_1..e_ref_dim) by power iteration on F^T F.

    ``rtol`` bounds the relative change of the Rayleigh quotient between
    sweeps; :class:`ComputationError` is raised if it is not met after
    ``max_iter`` sweeps.
    """
    if t <= 0:
        raise ValueError("operator norm estimate needs t > 0 (bound blows up at 0)")
    matvec = _gram_matvec(t, disc, ref_dim)
    # deterministic start with weight on every mode
    v = 1.0 / np.arange(1, ref_dim + 1)
    v /= np.linalg.norm(v)
    rq = 0.0
    for it in range(max_iter):
        w = matvec(v)
        new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if it > 0 and abs(new - rq) <= rtol * abs(new):
            return float(np.sqrt(max(new, 0.0)))
        rq = new
    raise ComputationError(
        f"power iteration stagnated after {max_iter} sweeps "
        f"(t={t}, h={disc.h}, last estimate {np.sqrt(max(rq, 0.0)):.6e})")
