"""Finite-activity, symmetric pure-jump Levy noise in U = H.

A jump of the process lands in a single sine mode ``k`` (chosen with
probability ``p_k``) with size ``+a_k`` or ``-a_k`` (fair coin).  The jump law
is symmetric, so L is a mean-zero martingale without a compensator, and the
covariance operator Q is diagonal with ``q_k = intensity * p_k * a_k**2``.

Random numbers come from counter-based Philox substreams keyed by
``(seed, stream, sample index)``; see :func:`substream`.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .spectral import as_spectral

# above this mean, Poisson counts fall back to numpy's PTRS rejection sampler
INVERSION_MAX_MEAN = 30.0


@dataclass(frozen=True)
class LevyMeasureSpec:
    intensity: float
    mode_probs: np.ndarray
    jump_scales: np.ndarray

    def __post_init__(self):
        p = np.array(self.mode_probs, dtype=float)
        a = np.array(self.jump_scales, dtype=float)
        if p.ndim != 1 or p.size < 1 or p.shape != a.shape:
            raise ValueError("mode_probs and jump_scales must be 1-D of equal length")
        if not (np.isfinite(self.intensity) and self.intensity >= 0):
            raise ValueError("intensity must be finite and nonnegative")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("mode_probs must be nonnegative and sum to 1")
        if np.any(~np.isfinite(a)) or np.any(a <= 0):
            raise ValueError("jump_scales must be positive and finite")
        p.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "mode_probs", p)
        object.__setattr__(self, "jump_scales", a)
        object.__setattr__(self, "intensity", float(self.intensity))

    @property
    def n_modes(self):
        return self.mode_probs.size

    @classmethod
    def power_law(cls, intensity, modes, exponent, trace=1.0):
        """q_k proportional to k**exponent with sum(q) = trace.

        Jumps hit mode k with probability proportional to k**exponent and all
        have the same size sqrt(trace / intensity).
        """
        if intensity <= 0 or trace <= 0:
            raise ValueError("power-law measure needs positive intensity and trace")
        w = np.arange(1, modes + 1, dtype=float) ** exponent
        p = w / w.sum()
        return cls(intensity, p, np.full(modes, math.sqrt(trace / intensity)))

    def __eq__(self, other):
        if not isinstance(other, LevyMeasureSpec):
            return NotImplemented
        return (self.intensity == other.intensity
                and np.array_equal(self.mode_probs, other.mode_probs)
                and np.array_equal(self.jump_scales, other.jump_scales))

    __hash__ = None


def covariance_diag(spec):
    """Diagonal of Q: q_k = intensity * p_k * a_k^2."""
    return spec.intensity * spec.mode_probs * spec.jump_scales**2


def second_moment_of_measure(spec):
    """int ||u||^2 nu(du), which equals trace(Q)."""
    return float(np.sum(covariance_diag(spec)))


def q_sqrt_apply(spec, v):
    """Q^{1/2} v; modes beyond the excited ones are mapped to zero."""
    v = as_spectral(v)
    q = np.zeros(v.size)
    n = min(v.size, spec.n_modes)
    q[:n] = covariance_diag(spec)[:n]
    return np.sqrt(q) * v


@dataclass(frozen=True)
class PoissonSamplePath:
    """Marks of one Poisson random measure realization on (0, T] x U."""

    horizon: float
    times: np.ndarray
    modes: np.ndarray  # 1-based sine mode of each jump
    sizes: np.ndarray
    n_modes: int

    def __len__(self):
        return self.times.size

    def with_jump(self, time, mode, size):
        """A copy with one extra jump inserted (used for path-space derivatives)."""
        if not 0 < time <= self.horizon:
            raise ValueError("jump time must lie in (0, T]")
        pos = int(np.searchsorted(self.times, time))
        return PoissonSamplePath(
            self.horizon,
            np.insert(self.times, pos, time),
            np.insert(self.modes, pos, mode),
            np.insert(self.sizes, pos, size),
            max(self.n_modes, int(mode)),
        )


def substream(seed, index, stream=0):
    """Independent generator for one sample: Philox keyed by the seed, with
    ``stream`` and ``index`` placed in the high counter words."""
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    bitgen = np.random.Philox(key=int(seed), counter=[0, 0, int(stream), int(index)])
    return np.random.Generator(bitgen)


def poisson_count(rng, mean):
    """Poisson variate; sequential inversion for small means."""
    if mean <= 0:
        return 0
    if mean > INVERSION_MAX_MEAN:
        return int(rng.poisson(mean))
    u = rng.random()
    n = 0
    p = math.exp(-mean)
    cdf = p
    while u > cdf:
        n += 1
        p *= mean / n
        cdf += p
        if p == 0.0:  # rounding left u above the reachable cdf
            break
    return n


def sample_path(spec, T, rng):
    """Draw one compound-Poisson path on (0, T].

    Draw order is fixed (count, times, modes, signs) so a given substream
    always yields the same path.
    """
    if T <= 0:
        raise ValueError("horizon must be positive")
    n = poisson_count(rng, spec.intensity * T)
    times = np.sort(T * (1.0 - rng.random(n)))
    while n > 1 and np.any(np.diff(times) == 0):
        times = np.sort(T * (1.0 - rng.random(n)))
    cdf = np.cumsum(spec.mode_probs)
    modes = np.minimum(np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right"),
                       spec.n_modes - 1) + 1
    signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    sizes = signs * spec.jump_scales[modes - 1]
    return PoissonSamplePath(float(T), times, modes.astype(np.int64), sizes, spec.n_modes)


def sample_paths(spec, T, seed, indices, stream=0, threads=1):
    """Paths for the given sample indices, returned in the order of ``indices``."""
    indices = list(indices)

    def draw(i):
        return sample_path(spec, T, substream(seed, i, stream))

    if threads <= 1:
        return [draw(i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(draw, indices))


def evaluate_L(path, t, dim=None):
    """L(t) = sum over jumps with time <= t of size * e_mode."""
    if t < 0 or t > path.horizon:
        raise ValueError(f"t={t} outside [0, {path.horizon}]")
    dim = path.n_modes if dim is None else dim
    out = np.zeros(dim)
    sel = (path.times <= t) & (path.modes <= dim)
    np.add.at(out, path.modes[sel] - 1, path.sizes[sel])
    return out


def jump_counts(path, edges):
    """Number of jumps in each window (edges[i], edges[i+1]]."""
    edges = np.asarray(edges, dtype=float)
    return np.diff(np.searchsorted(path.times, edges, side="right"))


PATH_CSV_HEADER = ("sample_id", "jump_time", "mode", "size")


def write_paths_csv(fh, paths, sample_ids=None):
    """One row per jump: sample_id, jump_time, mode, size."""
    sample_ids = range(len(paths)) if sample_ids is None else sample_ids
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PATH_CSV_HEADER)
    for sid, path in zip(sample_ids, paths):
        for t, k, s in zip(path.times, path.modes, path.sizes):
            w.writerow((sid, repr(float(t)), int(k), repr(float(s))))


def read_paths_csv(fh, horizon, n_modes):
    """Inverse of :func:`write_paths_csv`; returns {sample_id: path}."""
    rows = {}
    reader = csv.reader(fh)
    header = next(reader)
    if tuple(header) != PATH_CSV_HEADER:
        raise ValueError(f"unexpected path CSV header {header}")
    for sid, t, k, s in reader:
        rows.setdefault(int(sid), []).append((float(t), int(k), float(s)))
    out = {}
    for sid, jumps in rows.items():
        jumps.sort()
        t, k, s = (np.array(c) for c in zip(*jumps))
        out[sid] = PoissonSamplePath(float(horizon), t, k.astype(np.int64), s, n_modes)
    return out
