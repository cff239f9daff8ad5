"""Romberg extrapolation over particle counts and the ensemble estimator.

The order-k scheme combines systems of sizes N, 2N, ..., kN with weights
alpha_m = (-1)^(k-m) m^k / (m! (k-m)!), which cancel the first k-1 terms
of the 1/N bias expansion.  The ensemble estimator averages M independent
Romberg stacks; its cost is measured in pairwise interactions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .functional import LinearFunctional, MeasureFunctional
from .model import McKVModel, limit_functional_value
from .simulate import SimConfig, phi_values

MAX_ORDER = 8


def romberg_weights(k: int) -> np.ndarray:
    """Extrapolation weights alpha_1..alpha_k, exact via integer factorials."""
    if not 1 <= k <= MAX_ORDER:
        raise ValueError(f"order k must be in [1, {MAX_ORDER}]")
    weights = [
        Fraction((-1) ** (k - m) * m**k, math.factorial(m) * math.factorial(k - m))
        for m in range(1, k + 1)
    ]
    return np.array([float(w) for w in weights])


@dataclass(frozen=True)
class RombergScheme:
    k: int
    base_n: int

    def __post_init__(self):
        if not 1 <= self.k <= MAX_ORDER:
            raise ValueError(f"order k must be in [1, {MAX_ORDER}]")
        if self.base_n < 1:
            raise ValueError("base particle count must be >= 1")

    @property
    def weights(self) -> np.ndarray:
        return romberg_weights(self.k)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(m * self.base_n for m in range(1, self.k + 1))


@dataclass(frozen=True)
class EnsembleEstimate:
    value: float
    variance_estimate: float
    ensembles: int
    per_ensemble: tuple[float, ...]

    def __post_init__(self):
        if self.variance_estimate < 0:
            raise ValueError("variance estimate must be nonnegative")


@dataclass(frozen=True)
class CostPlan:
    epsilon: float
    k: int
    n: int
    m: int
    interactions: int
    n_single: int
    interactions_single: int

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "k": self.k,
            "N": self.n,
            "M": self.m,
            "C": self.interactions,
            "N_single": self.n_single,
            "C_single": self.interactions_single,
        }


def cost_plan(epsilon: float, k: int) -> CostPlan:
    """Ensemble sizing and interaction count for a target accuracy.

    N = ceil(eps^(-1/k)), M = ceil(eps^(-2+1/k)), C = M sum_m (mN)^2; the
    single-system comparison uses N = ceil(eps^-2), C = N^2.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must be in (0, 1)")
    if k < 1:
        raise ValueError("k must be >= 1")
    n = math.ceil(epsilon ** (-1.0 / k))
    m = math.ceil(epsilon ** (-2.0 + 1.0 / k))
    interactions = m * sum((j * n) ** 2 for j in range(1, k + 1))
    n_single = math.ceil(epsilon**-2.0)
    return CostPlan(
        epsilon=epsilon,
        k=k,
        n=n,
        m=m,
        interactions=interactions,
        n_single=n_single,
        interactions_single=n_single**2,
    )


def romberg_estimate(
    model: McKVModel,
    u: MeasureFunctional,
    scheme: RombergScheme,
    reps: int,
    config: SimConfig,
    threads: int = 1,
) -> tuple[float, float]:
    """MC mean and stderr of the weighted combination over replications.

    Each replication simulates k independent systems of sizes N..kN (their
    noise streams are keyed by the size index, so they are uncoupled) and
    combines the U-values with the extrapolation weights.
    """
    if reps < 2:
        raise ValueError("reps must be >= 2")
    weights = scheme.weights
    combined = np.zeros(reps)
    for m, alpha in zip(range(1, scheme.k + 1), weights):
        combined += alpha * phi_values(
            model, u, m * scheme.base_n, reps, config, stream=(0, m), threads=threads
        )
    mean = math.fsum(combined) / reps
    stderr = float(np.std(combined, ddof=1)) / math.sqrt(reps)
    return mean, stderr


def ensemble_estimate(
    model: McKVModel,
    u: MeasureFunctional,
    n: int,
    m_ensembles: int,
    k: int,
    config: SimConfig,
    stream_base: int = 0,
    threads: int = 1,
) -> EnsembleEstimate:
    """The M-ensemble estimator: one Romberg stack per ensemble, averaged.

    Restricted to linear functionals, matching the setting in which the
    estimator's mean-square error is analysed.
    """
    if not isinstance(u, LinearFunctional):
        raise ValueError("ensemble estimator requires a linear functional")
    if m_ensembles < 1:
        raise ValueError("need at least one ensemble")
    scheme = RombergScheme(k=k, base_n=n)
    per_ensemble = np.zeros(m_ensembles)
    for m, alpha in zip(range(1, k + 1), scheme.weights):
        per_ensemble += alpha * phi_values(
            model, u, m * n, m_ensembles, config, stream=(stream_base, m), threads=threads
        )
    value = math.fsum(per_ensemble) / m_ensembles
    if m_ensembles > 1:
        variance = float(np.var(per_ensemble, ddof=1)) / m_ensembles
    else:
        variance = 0.0
    return EnsembleEstimate(
        value=value,
        variance_estimate=variance,
        ensembles=m_ensembles,
        per_ensemble=tuple(float(v) for v in per_ensemble),
    )


@dataclass(frozen=True)
class MseReport:
    bias_squared: float
    variance: float
    mse: float
    mse_stderr: float
    bias: float
    bias_stderr: float
    outer_replications: int

    @property
    def decomposition_gap(self) -> float:
        return self.mse - (self.bias_squared + self.variance)


def mse_report(
    model: McKVModel,
    u: MeasureFunctional,
    n: int,
    m_ensembles: int,
    k: int,
    config: SimConfig,
    reference: float | None = None,
    outer_reps: int = 100,
    threads: int = 1,
) -> MseReport:
    """Empirical mean-square error decomposition of the ensemble estimator.

    Runs the full estimator outer_reps times on independent streams and
    splits E[(estimate - reference)^2] into squared bias plus sampling
    variance across estimator realizations.
    """
    if reference is None:
        reference = limit_functional_value(model, u)
    if outer_reps < 2:
        raise ValueError("outer_reps must be >= 2")
    estimates = np.array(
        [
            ensemble_estimate(
                model, u, n, m_ensembles, k, config, stream_base=1 + r, threads=threads
            ).value
            for r in range(outer_reps)
        ]
    )
    errors = estimates - reference
    bias = math.fsum(errors) / outer_reps
    bias_stderr = float(np.std(errors, ddof=1)) / math.sqrt(outer_reps)
    variance = float(np.var(estimates, ddof=1))
    sq = errors**2
    mse = math.fsum(sq) / outer_reps
    mse_stderr = float(np.std(sq, ddof=1)) / math.sqrt(outer_reps)
    return MseReport(
        bias_squared=bias**2,
        variance=variance,
        mse=mse,
        mse_stderr=mse_stderr,
        bias=bias,
        bias_stderr=bias_stderr,
        outer_replications=outer_reps,
    )
