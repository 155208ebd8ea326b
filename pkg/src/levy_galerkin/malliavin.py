"""Malliavin calculus on a Poisson random measure, on a finite cell partition.

Random variables are cylindrical: ``F = sum_i f_i(p(B_1), ..., p(B_M)) h_i``
with scalar functions ``f_i`` of the count vector and fixed vectors ``h_i``.
The functions are Python callables acting on integer arrays of shape
``(..., M)`` and returning arrays of shape ``(...)``; :meth:`CylindricalRV.from_table`
wraps tabulated values.

Expectations are taken exactly on a truncated product lattice of independent
Poisson counts (:class:`PoissonLattice`), whose neglected probability mass is
tracked.  Identities that hold with equality are therefore checked to near
machine precision instead of within Monte Carlo error.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .fem import discrete_eigenvalues, from_modal, modal_load
from .levy import sample_paths
from .mild import modal_deterministic, modal_noise_variance, modal_stochastic


class DomainError(ValueError):
    pass


class LatticeBudgetError(RuntimeError):
    pass


class NonPredictableError(ValueError):
    pass


@dataclass(frozen=True)
class CellPartition:
    """Disjoint cells B_1..B_M with finite measures mu_m.

    ``time_index`` (optional) records which time window each cell belongs to;
    it is only needed for predictability checks.
    """

    mu: tuple
    time_index: tuple | None = None

    def __post_init__(self):
        mu = tuple(float(m) for m in self.mu)
        if not mu or any(not (np.isfinite(m) and m > 0) for m in mu):
            raise ValueError("cell measures must be positive and finite")
        object.__setattr__(self, "mu", mu)
        if self.time_index is not None:
            ti = tuple(int(t) for t in self.time_index)
            if len(ti) != len(mu):
                raise ValueError("time_index must have one entry per cell")
            object.__setattr__(self, "time_index", ti)

    @property
    def M(self):
        return len(self.mu)

    @classmethod
    def product(cls, space_measures, time_grid):
        """Cells (t_n, t_{n+1}] x A_m ordered by time window, then by set.

        The measure of each cell is nu(A_m) * (t_{n+1} - t_n).
        """
        dt = np.diff(np.asarray(time_grid, dtype=float))
        if np.any(dt <= 0):
            raise ValueError("time grid must be strictly increasing")
        mu, ti = [], []
        for n, d in enumerate(dt):
            for a in space_measures:
                mu.append(a * d)
                ti.append(n)
        return cls(tuple(mu), tuple(ti))


def _shift(counts, m, by=1):
    out = np.array(counts, dtype=np.int64, copy=True)
    out[..., m] += by
    return out


@dataclass(frozen=True)
class CylindricalRV:
    """sum_i f_i(counts) h_i with all h_i of one common dimension."""

    funcs: tuple
    vectors: np.ndarray  # shape (n_terms, dim)

    def __post_init__(self):
        vec = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if vec.shape[0] != len(self.funcs):
            raise ValueError("need one vector per function")
        object.__setattr__(self, "funcs", tuple(self.funcs))
        object.__setattr__(self, "vectors", vec)

    @property
    def dim(self):
        return self.vectors.shape[1]

    @classmethod
    def constant(cls, h):
        h = np.asarray(h, dtype=float)
        return cls((lambda n: np.ones(np.shape(n)[:-1]),), h[None, :])

    @classmethod
    def count(cls, m, h, center=0.0):
        """(p(B_m) - center) h."""
        h = np.asarray(h, dtype=float)
        return cls((lambda n: np.asarray(n)[..., m] - center,), h[None, :])

    @classmethod
    def from_table(cls, tables, vectors):
        """Terms given as arrays indexed by the count vector."""
        tables = [np.asarray(t, dtype=float) for t in tables]

        def lookup(table):
            def f(n):
                n = np.asarray(n)
                if np.any(n < 0) or np.any(n >= np.array(table.shape)):
                    raise DomainError("count vector outside the tabulated lattice")
                return table[tuple(np.moveaxis(n, -1, 0))]
            return f

        return cls(tuple(lookup(t) for t in tables), vectors)

    def coefficients(self, counts):
        """f_i(counts) stacked along the last axis: shape (..., n_terms)."""
        counts = np.asarray(counts, dtype=np.int64)
        if not self.funcs:
            return np.zeros(counts.shape[:-1] + (0,))
        vals = [np.broadcast_to(np.asarray(f(counts), dtype=float), counts.shape[:-1])
                for f in self.funcs]
        return np.stack(vals, axis=-1)

    def evaluate(self, counts):
        """Realized value for count vectors of shape (..., M) -> (..., dim)."""
        return self.coefficients(counts) @ self.vectors

    def __add__(self, other):
        if not isinstance(other, CylindricalRV):
            return NotImplemented
        return CylindricalRV(self.funcs + other.funcs, np.vstack([self.vectors, other.vectors]))

    def __mul__(self, c):
        return CylindricalRV(self.funcs, c * self.vectors)

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other


def compose(phi_map, F, out_dim):
    """phi(F) as a cylindrical variable: coordinates g_k(n) = <phi(F(n)), e_k>."""

    def coord(k):
        return lambda n: np.asarray(phi_map(F.evaluate(n)))[..., k]

    return CylindricalRV(tuple(coord(k) for k in range(out_dim)), np.eye(out_dim))


def malliavin_derivative(F, part):
    """[DF]_m for each cell m: n -> f_i(n + e_m) - f_i(n) per term."""

    def diff(f, m):
        return lambda n: np.asarray(f(_shift(n, m)), dtype=float) - np.asarray(f(n), dtype=float)

    return [CylindricalRV(tuple(diff(f, m) for f in F.funcs), F.vectors)
            for m in range(part.M)]


@dataclass(frozen=True)
class SimpleField:
    """Deterministic Phi = sum_m 1_{B_m} h_m (at most one vector per cell)."""

    cells: tuple
    vectors: np.ndarray

    def __post_init__(self):
        cells = tuple(int(c) for c in self.cells)
        if len(set(cells)) != len(cells):
            raise ValueError("at most one value per cell")
        vec = np.asarray(self.vectors, dtype=float)
        vec = vec.reshape(len(cells), vec.shape[-1] if vec.ndim else 0)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "vectors", vec)

    def to_elementary(self):
        return ElementaryField({c: CylindricalRV.constant(h)
                                for c, h in zip(self.cells, self.vectors)})


@dataclass(frozen=True)
class ElementaryField:
    """Phi = sum_c 1_{B_c} G_c with random coefficients G_c (cylindrical)."""

    coefficients: dict

    def cells(self):
        return sorted(self.coefficients)


def divergence_simple(phi, part):
    """delta(phi) = sum_m q(B_m) h_m for deterministic phi."""
    if not phi.cells:
        return CylindricalRV((), np.zeros((0, phi.vectors.shape[-1])))
    funcs = tuple((lambda n, m=m, mu=part.mu[m]: np.asarray(n)[..., m] - mu)
                  for m in phi.cells)
    return CylindricalRV(funcs, phi.vectors)


class PoissonLattice:
    """Truncated product lattice {0..n_max}^M with Poisson(mu_m) weights."""

    def __init__(self, part, n_max=None, tol=1e-12, budget=5_000_000):
        self.part = part
        mu = np.asarray(part.mu)
        if n_max is None:
            n_max = 0
            while self._tail(mu, n_max) > tol:
                n_max += 1
        self.n_max = int(n_max)
        size = (self.n_max + 1) ** part.M
        if size > budget:
            raise LatticeBudgetError(
                f"lattice of {size} points exceeds budget {budget}; "
                f"reduce the number of cells or their measures")
        self.tail_mass = self._tail(mu, self.n_max)
        grid = np.arange(self.n_max + 1)
        self.points = np.array(list(itertools.product(grid, repeat=part.M)), dtype=np.int64)
        pmf = stats.poisson.pmf(grid[:, None], mu[None, :])  # (n_max+1, M)
        self.weights = np.prod(pmf[self.points, np.arange(part.M)], axis=1)

    @staticmethod
    def _tail(mu, n_max):
        # 1 - prod_m P(N_m <= n_max), computed without cancellation
        sf = stats.poisson.sf(n_max, mu)
        return float(-np.expm1(np.sum(np.log1p(-sf))))


def expectation(F, lattice):
    """E F over the lattice; error at most tail_mass * sup|f| * ||h||."""
    vals = F.evaluate(lattice.points)
    if not np.all(np.isfinite(vals)):
        raise DomainError("F is not finite on the lattice")
    return lattice.weights @ vals


def truncation_bound(F, lattice):
    coeffs = np.abs(F.coefficients(lattice.points))
    return float(lattice.tail_mass * np.sum(coeffs.max(axis=0) * np.linalg.norm(F.vectors, axis=1)))


def _as_elementary(phi):
    return phi.to_elementary() if isinstance(phi, SimpleField) else phi


def skorohod_divergence_values(phi, part, counts):
    """delta(Phi) at the given count vectors, for any elementary Phi.

    Uses delta(u) = sum over atoms of u(atom, omega minus atom) - int u dmu, which
    on cells reads sum_c [n_c G_c(n - e_c) - mu_c G_c(n)].  No predictability is
    assumed.
    """
    phi = _as_elementary(phi)
    counts = np.asarray(counts, dtype=np.int64)
    out = 0.0
    for c, G in sorted(phi.coefficients.items()):
        n_c = counts[..., c]
        down = _shift(counts, c, -1)
        down[..., c] = np.maximum(down[..., c], 0)  # multiplied by n_c = 0 there
        out = out + n_c[..., None] * G.evaluate(down) - part.mu[c] * G.evaluate(counts)
    return out


def ito_sum_values(phi, part, counts):
    """I(Phi)(T) = sum_c G_c(n) q(B_c) at the given count vectors."""
    phi = _as_elementary(phi)
    counts = np.asarray(counts, dtype=np.int64)
    out = 0.0
    for c, G in sorted(phi.coefficients.items()):
        out = out + (counts[..., c] - part.mu[c])[..., None] * G.evaluate(counts)
    return out


def duality_residual(F, phi, part, lattice):
    """|E sum_m mu_m <[DF]_m, Phi_m> - E <F, delta(Phi)>| on the lattice."""
    phi = _as_elementary(phi)
    pts = lattice.points
    DF = malliavin_derivative(F, part)
    lhs_vals = np.zeros(len(pts))
    for c, G in sorted(phi.coefficients.items()):
        lhs_vals += part.mu[c] * np.einsum("ld,ld->l", DF[c].evaluate(pts), G.evaluate(pts))
    rhs_vals = np.einsum("ld,ld->l", F.evaluate(pts), skorohod_divergence_values(phi, part, pts))
    return float(abs(lattice.weights @ lhs_vals - lattice.weights @ rhs_vals))


def chain_rule_check(phi_map, F, part, lattice, out_dim=None):
    """max over lattice points and cells of
    ||D[phi(F)]_m - (phi(F + [DF]_m) - phi(F))||."""
    pts = lattice.points
    if out_dim is None:
        out_dim = np.asarray(phi_map(F.evaluate(pts[:1]))).shape[-1]
    G = compose(phi_map, F, out_dim)
    DG = malliavin_derivative(G, part)
    DF = malliavin_derivative(F, part)
    Fv = F.evaluate(pts)
    worst = 0.0
    for m in range(part.M):
        direct = DG[m].evaluate(pts)
        chained = np.asarray(phi_map(Fv + DF[m].evaluate(pts))) - np.asarray(phi_map(Fv))
        worst = max(worst, float(np.max(np.linalg.norm(direct - chained, axis=-1))))
    return worst


def d_delta_identity_check(phi, part, lattice):
    """max over lattice points and cells of ||[D delta(phi)]_m - phi_m||."""
    dim = phi.vectors.shape[-1]
    target = np.zeros((part.M, dim))
    target[list(phi.cells)] = phi.vectors
    pts = lattice.points
    if not phi.cells:
        return 0.0
    D = malliavin_derivative(divergence_simple(phi, part), part)
    return max(float(np.max(np.linalg.norm(D[m].evaluate(pts) - target[m], axis=-1)))
               for m in range(part.M))


def check_predictable(phi, part, lattice):
    """Reject coefficients that read counts of their own or later time windows.

    G_c is F_{t_n}-measurable iff its derivative vanishes on every cell whose
    time window starts at or after that of cell c.
    """
    if part.time_index is None:
        raise ValueError("predictability needs a time-refined partition")
    phi = _as_elementary(phi)
    pts = lattice.points
    for c, G in sorted(phi.coefficients.items()):
        D = malliavin_derivative(G, part)
        for c2 in range(part.M):
            if part.time_index[c2] < part.time_index[c]:
                continue
            worst = float(np.max(np.abs(D[c2].evaluate(pts))))
            if worst != 0.0:
                raise NonPredictableError(
                    f"coefficient of cell {c} (window {part.time_index[c]}) depends on "
                    f"cell {c2} (window {part.time_index[c2]}); max |D| = {worst:.3e}")


def skorohod_ito_check(phi, part, lattice):
    """max over the lattice of ||delta(Phi) - I(Phi)(T)|| for predictable Phi."""
    check_predictable(phi, part, lattice)
    pts = lattice.points
    diff = skorohod_divergence_values(phi, part, pts) - ito_sum_values(phi, part, pts)
    return float(np.max(np.linalg.norm(np.atleast_2d(diff), axis=-1)))


def isometry_residual(phi, part, lattice):
    """|E ||I(Phi)(T)||^2 - E sum_c mu_c ||G_c||^2| for predictable Phi."""
    check_predictable(phi, part, lattice)
    phi = _as_elementary(phi)
    pts = lattice.points
    I = ito_sum_values(phi, part, pts)
    lhs = lattice.weights @ np.sum(I**2, axis=-1)
    rhs_vals = sum(part.mu[c] * np.sum(G.evaluate(pts) ** 2, axis=-1)
                   for c, G in phi.coefficients.items())
    return float(abs(lhs - lattice.weights @ rhs_vals))


# Lipschitz maps used by the chain-rule family

def identity_map(x):
    return np.asarray(x)


def norm_scaling(u):
    """x -> ||x|| u."""
    u = np.asarray(u, dtype=float)
    return lambda x: np.linalg.norm(x, axis=-1, keepdims=True) * u


def clamped_affine(A, b, lo=-1.0, hi=1.0):
    """x -> clip(A x + b, lo, hi) componentwise."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    return lambda x: np.clip(np.asarray(x) @ A.T + b, lo, hi)


def random_polynomial_rv(rng, part, dim, n_terms=2, degree=3, scale=1.0):
    """Cylindrical variable with random polynomial coefficient functions."""
    monos = [e for e in itertools.product(range(degree + 1), repeat=part.M)
             if sum(e) <= degree]
    exps = np.array(monos)

    def poly(coef):
        return lambda n: np.prod(np.asarray(n, dtype=float)[..., None, :] ** exps, axis=-1) @ coef

    funcs = tuple(poly(scale * rng.standard_normal(len(monos)) / len(monos))
                  for _ in range(n_terms))
    return CylindricalRV(funcs, rng.standard_normal((n_terms, dim)))


def random_simple_field(rng, part, dim):
    k = int(rng.integers(1, part.M + 1))
    cells = tuple(sorted(rng.choice(part.M, size=k, replace=False).tolist()))
    return SimpleField(cells, rng.standard_normal((k, dim)))


# Malliavin derivative of the Galerkin solution and the integration by parts

def solution_derivative(spec, disc, s, mode, size):
    """[D X_h(T)](s, u) for u = size * e_mode: the field S_h(T-s) P_h G u.

    Returned in natural coordinates of ``disc``.
    """
    if not 0 <= s <= spec.T:
        raise ValueError("s must lie in [0, T]")
    g = spec.g_diag[mode - 1] if mode <= spec.g_diag.size else 0.0
    C = modal_load(disc, max(mode, 1))
    y = np.exp(-discrete_eigenvalues(disc) * (spec.T - s)) * C[:, mode - 1] * g * size
    return from_modal(y, disc)


@dataclass(frozen=True)
class IBPReport:
    lhs: float
    rhs: float
    std_error: float
    samples: int

    @property
    def residual(self):
        return abs(self.lhs - self.rhs)

    @property
    def passed(self):
        return self.residual <= 4.0 * self.std_error or self.residual == 0.0


def integration_by_parts_check(spec, disc, samples, seed, threads=1):
    """E<X_h(T), int Phi dL> by Monte Carlo against the closed-form right side.

    Phi(s) = S_h(T-s) P_h G, and with F = X_h(T) the right side is
    int_0^T int_U ||S_h(T-s) P_h G u||^2 nu(du) ds.
    """
    m = modal_deterministic(spec, disc)
    paths = sample_paths(spec.levy, spec.T, seed, range(samples), threads=threads)
    vals = np.empty(samples)
    for i, path in enumerate(paths):
        z = modal_stochastic(spec, path, disc)
        vals[i] = (m + z) @ z
    rhs = float(np.sum(modal_noise_variance(spec, disc)))
    se = float(vals.std(ddof=1) / np.sqrt(samples)) if samples > 1 else float("inf")
    return IBPReport(float(vals.mean()), rhs, se, samples)

