"""Empirical and discrete probability measures on R^d.

Provides the atomic-measure containers used everywhere else, weighted
moments, the exact 1-d Wasserstein-2 distance, and the exhaustive
enumeration of empirical measures of N i.i.d. draws from a small
discrete law.  The enumeration is the brute-force oracle substrate for
all exact bias computations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import (
    DimensionMismatchError,
    EnumerationTooLargeError,
    UnsupportedDimensionError,
)

WEIGHT_TOL = 1e-12
DEFAULT_ATOM_CAP = 8
ENUMERATION_CAP = 10**7


def _as_points(atoms) -> np.ndarray:
    """Coerce input into an (n, d) float array; 1-d input means d=1."""
    arr = np.asarray(atoms, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionMismatchError(f"atoms must be (n,) or (n, d), got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Weighted atomic measure (1/N) sum of point masses, or any convex mix."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = _as_points(self.atoms)
        weights = np.asarray(self.weights, dtype=float)
        if atoms.shape[0] != weights.shape[0]:
            raise ValueError("atoms and weights must have equal length")
        if atoms.shape[0] < 1:
            raise ValueError("need at least one atom")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(float(weights.sum()) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1 within {WEIGHT_TOL}")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_points(cls, points) -> "EmpiricalMeasure":
        """Uniform measure (1/N) sum delta_{x_i} over the given points."""
        pts = _as_points(points)
        n = pts.shape[0]
        return cls(pts, np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, x) -> "EmpiricalMeasure":
        pt = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
        return cls(pt, np.array([1.0]))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def moment(self, order: int, coordinate: int = 0) -> float:
        return moment(self, order, coordinate)

    def is_close(self, other: "EmpiricalMeasure", tol: float = 1e-12) -> bool:
        """Equality as measures: compare grouped atom/weight tables."""
        a = _group_atoms(self.atoms, self.weights)
        b = _group_atoms(other.atoms, other.weights)
        if len(a) != len(b):
            return False
        return all(
            np.allclose(xa, xb, atol=tol) and abs(wa - wb) <= tol
            for (xa, wa), (xb, wb) in zip(a, b)
        )


def _group_atoms(atoms, weights):
    order = np.lexsort(atoms.T[::-1])
    grouped = []
    for i in order:
        if grouped and np.array_equal(grouped[-1][0], atoms[i]):
            grouped[-1][1] += weights[i]
        else:
            grouped.append([atoms[i], weights[i]])
    return [(x, w) for x, w in grouped if w > 0]


@dataclass(frozen=True)
class DiscreteLaw:
    """A finitely supported law small enough for exhaustive enumeration."""

    atoms: np.ndarray
    probs: np.ndarray
    atom_cap: int = DEFAULT_ATOM_CAP
    _moment_cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        atoms = _as_points(self.atoms)
        probs = np.asarray(self.probs, dtype=float)
        if atoms.shape[0] != probs.shape[0]:
            raise ValueError("atoms and probs must have equal length")
        if np.any(probs <= 0):
            raise ValueError("probs must be positive")
        if abs(float(probs.sum()) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"probs must sum to 1 within {WEIGHT_TOL}")
        if atoms.shape[0] > self.atom_cap:
            raise ValueError(f"atom count {atoms.shape[0]} exceeds enumeration cap {self.atom_cap}")
        atoms.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def bernoulli(cls, p: float = 0.5) -> "DiscreteLaw":
        return cls(np.array([[0.0], [1.0]]), np.array([1.0 - p, p]))

    @classmethod
    def point_mass(cls, x) -> "DiscreteLaw":
        return cls(np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1), np.array([1.0]))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def to_measure(self) -> EmpiricalMeasure:
        return EmpiricalMeasure(self.atoms, self.probs)

    def mean(self) -> np.ndarray:
        return self.probs @ self.atoms

    def variance(self, coordinate: int = 0) -> float:
        m = self.mean()[coordinate]
        return self.moment(2, coordinate) - m * m

    def moment(self, order: int, coordinate: int = 0) -> float:
        key = (order, coordinate)
        if key not in self._moment_cache:
            self._moment_cache[key] = moment(self, order, coordinate)
        return self._moment_cache[key]

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        """Draw i.i.d. variates; returns shape + (d,)."""
        idx = rng.choice(self.atoms.shape[0], size=shape, p=self.probs)
        return self.atoms[idx]


def moment(mu, order: int, coordinate: int = 0) -> float:
    """Weighted power sum: sum_i w_i (x_i[coordinate])^order."""
    if order < 0 or order > 16:
        raise ValueError("order must be in [0, 16]")
    atoms = mu.atoms
    weights = mu.probs if isinstance(mu, DiscreteLaw) else mu.weights
    if not 0 <= coordinate < atoms.shape[1]:
        raise DimensionMismatchError(f"coordinate {coordinate} out of range for d={atoms.shape[1]}")
    return float(weights @ atoms[:, coordinate] ** order)


def wasserstein2_1d(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Exact W_2 between two 1-d atomic measures via the monotone coupling.

    Integrates the squared difference of the two quantile functions over
    the merged grid of cumulative-weight breakpoints.
    """
    if mu.dim != 1 or nu.dim != 1:
        raise UnsupportedDimensionError("wasserstein2_1d requires 1-dimensional measures")

    def sorted_cdf(m):
        x = m.atoms[:, 0]
        order = np.argsort(x, kind="stable")
        return x[order], np.cumsum(m.weights[order])

    xa, ca = sorted_cdf(mu)
    xb, cb = sorted_cdf(nu)
    levels = np.unique(np.concatenate([ca, cb, [0.0]]))
    levels = np.clip(levels, 0.0, 1.0)
    total = 0.0
    prev = 0.0
    for lv in levels:
        if lv <= prev:
            continue
        # quantile at any level inside (prev, lv]
        qa = xa[np.searchsorted(ca, prev, side="right").clip(max=len(xa) - 1)]
        qb = xb[np.searchsorted(cb, prev, side="right").clip(max=len(xb) - 1)]
        total += (lv - prev) * (qa - qb) ** 2
        prev = lv
    return math.sqrt(max(total, 0.0))


@dataclass(frozen=True)
class OutcomeEnumeration:
    """All distinct empirical measures of N i.i.d. draws with their probabilities."""

    law: DiscreteLaw
    draws: int

    @property
    def outcome_count(self) -> int:
        k = self.law.atoms.shape[0]
        return math.comb(self.draws + k - 1, k - 1)

    def __iter__(self) -> Iterator[tuple[EmpiricalMeasure, float]]:
        n = self.draws
        atoms = self.law.atoms
        probs = self.law.probs
        k = atoms.shape[0]
        log_fact_n = math.lgamma(n + 1)
        for counts in _compositions(n, k):
            log_p = log_fact_n
            for c, p in zip(counts, probs):
                log_p += c * math.log(p) - math.lgamma(c + 1)
            mask = np.array(counts) > 0
            mu = EmpiricalMeasure(atoms[mask], np.array(counts)[mask] / n)
            yield mu, math.exp(log_p)

    def expectation(self, func) -> float:
        """Exact E[func(mu_N)] as a compensated sum over all outcomes."""
        return math.fsum(p * func(mu) for mu, p in self)


def _compositions(n: int, k: int):
    """Yield all k-tuples of nonnegative ints summing to n."""
    if k == 1:
        yield (n,)
        return
    for head in range(n + 1):
        for tail in _compositions(n - head, k - 1):
            yield (head,) + tail


def enumerate_empirical(law: DiscreteLaw, n: int) -> OutcomeEnumeration:
    """Exhaustive multiset enumeration with multinomial probabilities."""
    if n < 1:
        raise ValueError("need at least one draw")
    enum = OutcomeEnumeration(law, n)
    if enum.outcome_count > ENUMERATION_CAP:
        raise EnumerationTooLargeError(
            f"{enum.outcome_count} outcomes exceed cap {ENUMERATION_CAP}"
        )
    return enum
