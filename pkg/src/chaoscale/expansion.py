"""Weak-error bias grids, static constants, and 1/N expansion fits.

Static biases of E[U(mu_N)] - U(mu) for i.i.d. samples are computed both
exactly (outcome enumeration) and by Monte Carlo; the leading constants
come from inclusion-exclusion estimators of the signed tensor integrals.
Dynamic biases over particle counts are collected into grids and fitted
by weighted least squares on the regressors 1/N, 1/N^2, ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import OracleUnavailableError
from .functional import MeasureFunctional, MomentCylinder
from .measure import DiscreteLaw, enumerate_empirical
from .model import GaussianLaw, McKVModel, limit_functional_value
from .simulate import SimConfig, phi_estimate, stream_generator

SAMPLE_CHUNK = 1 << 16


@dataclass(frozen=True)
class BiasGrid:
    """Bias estimates across particle counts, with a common reference value."""

    ns: tuple[int, ...]
    biases: tuple[float, ...]
    stderrs: tuple[float, ...]
    reps: tuple[int, ...]
    source: str  # static-enumeration | static-mc | dynamic-mc
    reference: float
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.ns[1:], self.ns)):
            raise ValueError("N values must be strictly increasing")
        if any(s < 0 for s in self.stderrs):
            raise ValueError("stderr must be nonnegative")
        if self.source == "static-enumeration" and any(s != 0 for s in self.stderrs):
            raise ValueError("enumeration grids have zero stderr")


@dataclass(frozen=True)
class ExpansionFit:
    """Fitted coefficients of bias(N) = sum_j C_j / N^j, j = 1..k-1."""

    k: int
    coefficients: tuple[float, ...]
    coefficient_stderrs: tuple[float, ...]
    residuals: tuple[float, ...]
    residual_norm: float
    slope: float
    fit_weights: tuple[float, ...]


@dataclass(frozen=True)
class StaticConstant:
    order: int
    value: float
    stderr: float
    estimator: str  # inclusion-exclusion-mc | closed-form


# ---------------------------------------------------------------------------
# static biases


def static_reference(u: MeasureFunctional, law) -> float:
    """U evaluated at the sampling law itself."""
    if isinstance(law, DiscreteLaw):
        return u(law.to_measure())
    if isinstance(law, GaussianLaw) and isinstance(u, MomentCylinder):
        return float(u.derivatives[0](float(law.mean()[0])))
    raise OracleUnavailableError("no reference value for this (functional, law) pair")


def static_bias_exact(u: MeasureFunctional, law: DiscreteLaw, n: int) -> float:
    """Exact E[U(mu_N)] - U(law) by enumerating all empirical outcomes."""
    enum = enumerate_empirical(law, n)
    return enum.expectation(u) - u(law.to_measure())


def static_bias_mc(
    u: MeasureFunctional,
    law,
    n: int,
    reps: int,
    seed: int = 0,
    reference: Optional[float] = None,
) -> tuple[float, float]:
    """Monte Carlo estimate of E[U(mu_N)] - reference with standard error."""
    if reps < 2:
        raise ValueError("reps must be >= 2")
    if reference is None:
        reference = static_reference(u, law)
    gen = stream_generator(seed, 0)
    values = np.empty(reps)
    done = 0
    while done < reps:
        b = min(SAMPLE_CHUNK, reps - done)
        draws = law.sample(gen, (b, n))
        values[done : done + b] = u.eval_batch(draws)
        done += b
    bias = math.fsum(values) / reps - reference
    stderr = float(np.std(values, ddof=1)) / math.sqrt(reps)
    return bias, stderr


def static_constant_cp(
    u: MeasureFunctional,
    law,
    p: int,
    mc_samples: int,
    seed: int = 0,
) -> StaticConstant:
    """MC estimate of the order-p expansion constant (with the 1/p! prefactor).

    Averages the inclusion-exclusion expansion of the p-fold signed product
    measure: (1/p!) sum over subsets S of {1..p} of (-1)^{p-|S|}
    lfd(p, mu, y) with y_k = xi for k in S and y_k = xi_hat_k otherwise.
    """
    gen = stream_generator(seed, 1)
    masks = [
        np.array([(subset >> k) & 1 for k in range(p)], dtype=bool)
        for subset in range(1 << p)
    ]
    signs = [(-1) ** (p - int(mask.sum())) for mask in masks]
    inv_pfact = 1.0 / math.factorial(p)

    values = np.empty(mc_samples)
    done = 0
    while done < mc_samples:
        b = min(SAMPLE_CHUNK, mc_samples - done)
        xi = law.sample(gen, (b,))  # (b, d)
        xi_hat = law.sample(gen, (b, p))  # (b, p, d)
        acc = np.zeros(b)
        for mask, sign in zip(masks, signs):
            y = np.where(mask[None, :, None], xi[:, None, :], xi_hat)
            acc += sign * u.lfd_batch(p, law, y)
        values[done : done + b] = inv_pfact * acc
        done += b
    value = math.fsum(values) / mc_samples
    stderr = float(np.std(values, ddof=1)) / math.sqrt(mc_samples)
    return StaticConstant(order=p, value=value, stderr=stderr, estimator="inclusion-exclusion-mc")


def first_order_bias_constant(
    u: MeasureFunctional,
    law,
    mc_samples: int,
    seed: int = 0,
) -> tuple[float, float]:
    """MC estimate of the 1/N coefficient via the second-derivative identity.

    Estimates (1/2) E[lfd2(mu)(xi_t, xi_t) - lfd2(mu)(xi_t, xi)] with xi_t
    and xi independent draws from the law.
    """
    gen = stream_generator(seed, 2)
    values = np.empty(mc_samples)
    done = 0
    while done < mc_samples:
        b = min(SAMPLE_CHUNK, mc_samples - done)
        xi_t = law.sample(gen, (b,))
        xi = law.sample(gen, (b,))
        same = np.stack([xi_t, xi_t], axis=1)
        cross = np.stack([xi_t, xi], axis=1)
        values[done : done + b] = 0.5 * (u.lfd_batch(2, law, same) - u.lfd_batch(2, law, cross))
        done += b
    value = math.fsum(values) / mc_samples
    stderr = float(np.std(values, ddof=1)) / math.sqrt(mc_samples)
    return value, stderr


def static_bias_grid_exact(u: MeasureFunctional, law: DiscreteLaw, n_list: Sequence[int]) -> BiasGrid:
    """Enumeration grid over the given particle counts."""
    biases = tuple(static_bias_exact(u, law, n) for n in n_list)
    return BiasGrid(
        ns=tuple(int(n) for n in n_list),
        biases=biases,
        stderrs=(0.0,) * len(biases),
        reps=(0,) * len(biases),
        source="static-enumeration",
        reference=u(law.to_measure()),
    )


# ---------------------------------------------------------------------------
# dynamic grids


def dynamic_bias_grid(
    model: McKVModel,
    u: MeasureFunctional,
    n_list: Sequence[int],
    reps: int,
    config: SimConfig,
    threads: int = 1,
) -> BiasGrid:
    """Bias of E[U(terminal mu_N)] against the analytic limit value, per N."""
    reference = limit_functional_value(model, u)
    biases, stderrs = [], []
    for n in n_list:
        mean, stderr = phi_estimate(model, u, int(n), reps, config, stream=(int(n),), threads=threads)
        biases.append(mean - reference)
        stderrs.append(stderr)

    warnings = ()
    if config.scheme == "euler_maruyama":
        warnings = _dt_bias_guard(model, u, int(max(n_list)), reps, config, min(biases, key=abs), threads)

    return BiasGrid(
        ns=tuple(int(n) for n in n_list),
        biases=tuple(biases),
        stderrs=tuple(stderrs),
        reps=(reps,) * len(biases),
        source="dynamic-mc",
        reference=reference,
        warnings=warnings,
    )


def _dt_bias_guard(model, u, n, reps, config, smallest_bias, threads) -> tuple[str, ...]:
    """Two-level Richardson check that dt bias is below 10% of the smallest bias."""
    guard_reps = min(reps, 20000)
    fine = SimConfig(
        step_count=2 * config.step_count,
        scheme=config.scheme,
        master_seed=config.master_seed,
    )
    coarse_val, _ = phi_estimate(model, u, n, guard_reps, config, stream=(9901,), threads=threads)
    fine_val, fine_err = phi_estimate(model, u, n, guard_reps, fine, stream=(9902,), threads=threads)
    dt_bias = abs(coarse_val - fine_val)
    threshold = 0.1 * abs(smallest_bias)
    if dt_bias > threshold + 3 * fine_err:
        return (
            f"dt-bias guard: Richardson check {dt_bias:.3e} exceeds 10% of smallest bias "
            f"{smallest_bias:.3e}; refine step_count",
        )
    return ()


# ---------------------------------------------------------------------------
# fitting


def fit_expansion(grid: BiasGrid, k: int) -> ExpansionFit:
    """Weighted least squares of bias on N^-1 .. N^-(k-1).

    MC grids are weighted by 1/stderr^2.  Enumeration grids (stderr = 0)
    are weighted by N^(2k): the model's remainder after k-1 terms is
    O(N^-k), so this weighting equalizes the expected residual scale and
    keeps higher-order terms from leaking into the fitted coefficients.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    n_coeff = k - 1
    ns = np.array(grid.ns, dtype=float)
    biases = np.array(grid.biases)
    if len(ns) < n_coeff + 1:
        raise ValueError(f"need at least {n_coeff + 1} grid points to fit {n_coeff} coefficients")

    if all(s == 0 for s in grid.stderrs):
        weights = ns ** (2 * k)
        mc_weights = False
    else:
        if any(s == 0 for s in grid.stderrs):
            raise ValueError("mixed zero/nonzero stderr grid cannot be weighted")
        weights = 1.0 / np.array(grid.stderrs) ** 2
        mc_weights = True

    design = np.column_stack([ns ** (-j) for j in range(1, k)])
    sw = np.sqrt(weights)
    a = design * sw[:, None]
    rhs = biases * sw
    coeffs, _, rank, _ = np.linalg.lstsq(a, rhs, rcond=None)
    if rank < n_coeff:
        raise ValueError("singular normal equations: N values too clustered")

    residuals = biases - design @ coeffs
    if mc_weights:
        cov = np.linalg.inv(a.T @ a)
        coeff_stderrs = np.sqrt(np.diag(cov))
    else:
        coeff_stderrs = np.zeros(n_coeff)

    abs_bias = np.abs(biases)
    floor = max(abs_bias.max(), 1.0) * np.finfo(float).eps
    slope = float(np.polyfit(np.log(ns), np.log(abs_bias + floor), 1)[0])

    return ExpansionFit(
        k=k,
        coefficients=tuple(float(c) for c in coeffs),
        coefficient_stderrs=tuple(float(s) for s in coeff_stderrs),
        residuals=tuple(float(r) for r in residuals),
        residual_norm=float(np.linalg.norm(residuals)),
        slope=slope,
        fit_weights=tuple(float(w) for w in weights),
    )


def loglog_slope(ns: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log|values| against log ns."""
    v = np.abs(np.asarray(values, dtype=float))
    floor = max(v.max(), 1.0) * np.finfo(float).eps
    return float(np.polyfit(np.log(np.asarray(ns, dtype=float)), np.log(v + floor), 1)[0])
