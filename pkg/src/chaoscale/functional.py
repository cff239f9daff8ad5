"""Measure functionals U: P_2(R^d) -> R with linear functional derivatives.

Each built-in family carries a closed-form table of derivatives
delta^p U / delta m^p up to a declared order, under the normalization
delta^p U / delta m^p (m, 0) = 0.  Discrete measures make every tensor
integral an exact finite sum, which is what the oracle tests rely on.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DerivativeUnavailableError, DimensionMismatchError
from .measure import DiscreteLaw, EmpiricalMeasure

FD_STEP = 1e-5  # central finite-difference step for consistency checks


def _points_array(ys, p: int, dim: int) -> np.ndarray:
    arr = np.asarray(ys, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape != (p, dim):
        raise DimensionMismatchError(f"expected {p} points in R^{dim}, got shape {arr.shape}")
    return arr


def _mean_of(base) -> np.ndarray:
    return base.mean()


class MeasureFunctional:
    """Base class; subclasses fill in evaluation and the derivative table."""

    family = "custom"

    def __init__(self, dim: int = 1, max_order: int = 99, name: str = "functional"):
        self.dim = dim
        self.max_order = max_order
        self.name = name

    def __call__(self, mu) -> float:
        if mu.dim != self.dim:
            raise DimensionMismatchError(f"functional is on R^{self.dim}, measure is on R^{mu.dim}")
        return self._eval(mu)

    def _eval(self, mu) -> float:
        raise NotImplementedError

    def lfd(self, p: int, base, ys) -> float:
        """p-th linear functional derivative at base measure and point tuple."""
        if p < 1 or p > self.max_order:
            raise DerivativeUnavailableError(
                f"derivative order {p} unavailable (max_order={self.max_order})"
            )
        pts = _points_array(ys, p, self.dim)
        return float(self._lfd(p, base, pts))

    def _lfd(self, p: int, base, pts: np.ndarray) -> float:
        raise NotImplementedError

    # Vectorized paths; subclasses override where a closed form allows it.

    def eval_batch(self, positions: np.ndarray) -> np.ndarray:
        """Evaluate on a batch of uniform empirical measures (B, N, d)."""
        return np.array([self._eval(EmpiricalMeasure.from_points(rows)) for rows in positions])

    def lfd_batch(self, p: int, base, ys: np.ndarray) -> np.ndarray:
        """Evaluate lfd on a batch of point tuples (S, p, d)."""
        return np.array([self.lfd(p, base, tup) for tup in ys])


class LinearFunctional(MeasureFunctional):
    """U(m) = integral of f dm; the only functional with vanishing curvature."""

    family = "linear"

    def __init__(self, f, name: str = "linear", dim: int = 1):
        super().__init__(dim=dim, max_order=99, name=name)
        self.f = f
        self._f0 = float(f(np.zeros(dim)))

    def _eval(self, mu) -> float:
        weights = mu.probs if isinstance(mu, DiscreteLaw) else mu.weights
        vals = np.apply_along_axis(self.f, 1, mu.atoms).astype(float)
        return float(weights @ vals)

    def _lfd(self, p, base, pts):
        if p == 1:
            return float(self.f(pts[0])) - self._f0
        return 0.0

    def eval_batch(self, positions):
        b, n, d = positions.shape
        flat = positions.reshape(b * n, d)
        vals = np.apply_along_axis(self.f, 1, flat).astype(float).reshape(b, n)
        return vals.mean(axis=1)

    def lfd_batch(self, p, base, ys):
        if p == 1:
            s = ys.shape[0]
            vals = np.apply_along_axis(self.f, 1, ys[:, 0, :]).astype(float)
            return vals - self._f0
        return np.zeros(ys.shape[0])


class FirstMomentLinear(LinearFunctional):
    """U(m) = mean of the first coordinate; fast vectorized special case."""

    def __init__(self, dim: int = 1):
        super().__init__(lambda x: x[0], name="mean", dim=dim)

    def _eval(self, mu) -> float:
        return float(_mean_of(mu)[0])

    def eval_batch(self, positions):
        return positions[..., 0].mean(axis=1)

    def lfd_batch(self, p, base, ys):
        if p == 1:
            return ys[:, 0, 0].copy()
        return np.zeros(ys.shape[0])


class MomentCylinder(MeasureFunctional):
    """U(m) = b(first-coordinate mean of m) with closed-form outer derivatives.

    lfd(p, m, y) = y_1 ... y_p * b^(p)(mean), evaluated on first coordinates;
    the normalization at zero points holds by construction.
    """

    family = "moment-cylinder"

    def __init__(self, derivatives, name: str = "cylinder", dim: int = 1):
        # derivatives[p] is b^(p); derivatives[0] is b itself
        super().__init__(dim=dim, max_order=len(derivatives) - 1, name=name)
        self.derivatives = list(derivatives)

    def _statistic(self, mu) -> float:
        return float(_mean_of(mu)[0])

    def _eval(self, mu) -> float:
        return float(self.derivatives[0](self._statistic(mu)))

    def _lfd(self, p, base, pts):
        s = self._statistic(base)
        return float(np.prod(pts[:, 0]) * self.derivatives[p](s))

    def eval_batch(self, positions):
        means = positions[..., 0].mean(axis=1)
        return np.asarray(self.derivatives[0](means), dtype=float)

    def lfd_batch(self, p, base, ys):
        if p > self.max_order:
            raise DerivativeUnavailableError(
                f"derivative order {p} unavailable (max_order={self.max_order})"
            )
        s = self._statistic(base)
        return np.prod(ys[:, :, 0], axis=1) * float(self.derivatives[p](s))


def mean_power(k: int, dim: int = 1) -> MomentCylinder:
    """U(m) = (mean)^k with the full derivative table (falling factorials)."""

    def deriv(p):
        coeff = math.perm(k, p) if p <= k else 0
        return lambda s, c=coeff, e=max(k - p, 0): c * s**e if c else 0.0 * s

    return MomentCylinder([deriv(p) for p in range(k + 2)], name=f"mean_power_{k}", dim=dim)


def sin_mean(dim: int = 1, order: int = 8) -> MomentCylinder:
    cycle = [np.sin, np.cos, lambda s: -np.sin(s), lambda s: -np.cos(s)]
    return MomentCylinder([cycle[p % 4] for p in range(order + 1)], name="sin_mean", dim=dim)


def cos_mean(dim: int = 1, order: int = 8) -> MomentCylinder:
    cycle = [np.cos, lambda s: -np.sin(s), lambda s: -np.cos(s), np.sin]
    return MomentCylinder([cycle[p % 4] for p in range(order + 1)], name="cos_mean", dim=dim)


class ProductOfLinear(MeasureFunctional):
    """U(m) = prod_j integral f_j dm with factor functions vanishing at 0.

    The f_j(0) = 0 constraint makes the natural derivative formula satisfy
    the zero-point normalization without additive corrections.
    """

    family = "product"

    def __init__(self, factors, name: str = "product", dim: int = 1):
        for f in factors:
            if abs(float(f(np.zeros(dim)))) > 1e-14:
                raise ValueError("product factors must vanish at the origin")
        super().__init__(dim=dim, max_order=len(factors), name=name)
        self.factors = list(factors)

    def _factor_integrals(self, mu) -> np.ndarray:
        weights = mu.probs if isinstance(mu, DiscreteLaw) else mu.weights
        return np.array(
            [float(weights @ np.apply_along_axis(f, 1, mu.atoms)) for f in self.factors]
        )

    def _eval(self, mu) -> float:
        return float(np.prod(self._factor_integrals(mu)))

    def _lfd(self, p, base, pts):
        ints = self._factor_integrals(base)
        k = len(self.factors)
        total = 0.0
        for chosen in itertools.permutations(range(k), p):
            rest = np.prod([ints[j] for j in range(k) if j not in chosen])
            total += rest * np.prod([float(self.factors[j](pts[i])) for i, j in enumerate(chosen)])
        return total


class CustomFunctional(MeasureFunctional):
    """User-supplied evaluation and derivative table.

    The caller declares compliance with the zero-point normalization.
    """

    family = "custom"

    def __init__(self, eval_fn, lfd_fn=None, max_order: int = 0, dim: int = 1, name: str = "custom"):
        super().__init__(dim=dim, max_order=max_order, name=name)
        self._eval_fn = eval_fn
        self._lfd_fn = lfd_fn

    def _eval(self, mu) -> float:
        return float(self._eval_fn(mu))

    def _lfd(self, p, base, pts):
        if self._lfd_fn is None:
            raise DerivativeUnavailableError("custom functional has no derivative table")
        return float(self._lfd_fn(p, base, pts))


def signed_difference(m_to: EmpiricalMeasure, m_from: EmpiricalMeasure):
    """Atoms and signed weights of the measure (m_to - m_from)."""
    atoms = np.vstack([m_to.atoms, m_from.atoms])
    weights = np.concatenate([m_to.weights, -m_from.weights])
    return atoms, weights


def lfd_tensor_integral(u: MeasureFunctional, p: int, base, atoms, signed_weights) -> float:
    """Exact integral of lfd(p, base, .) against the p-fold signed product measure."""
    n = atoms.shape[0]
    idx = np.array(list(itertools.product(range(n), repeat=p)))
    pts = atoms[idx]  # (n^p, p, d)
    coeffs = np.prod(signed_weights[idx], axis=1)
    vals = u.lfd_batch(p, base, pts)
    return float(math.fsum(coeffs * vals))


def taylor_measure_expand(u: MeasureFunctional, m: EmpiricalMeasure, m_prime: EmpiricalMeasure, q: int):
    """Taylor-in-measure terms of U(m') around m, plus subtraction remainder.

    Returns (terms, remainder) with terms[p-1] = (1/p!) * the p-fold tensor
    integral, p = 1..q-1.  The remainder is U(m') - U(m) - sum(terms), not
    an evaluation of the integral-form remainder.
    """
    if q < 2:
        raise ValueError("q must be at least 2")
    if q > u.max_order:
        raise DerivativeUnavailableError(f"expansion to order {q} needs max_order >= {q}")
    atoms, signed = signed_difference(m_prime, m)
    terms = [
        lfd_tensor_integral(u, p, m, atoms, signed) / math.factorial(p) for p in range(1, q)
    ]
    remainder = u(m_prime) - u(m) - math.fsum(terms)
    return terms, remainder


def mix_measures(m: EmpiricalMeasure, m_prime: EmpiricalMeasure, t: float) -> EmpiricalMeasure:
    """The interpolated measure (1 - t) m + t m'."""
    atoms = np.vstack([m.atoms, m_prime.atoms])
    weights = np.concatenate([(1.0 - t) * m.weights, t * m_prime.weights])
    keep = weights > 0
    if not keep.any():
        keep[:] = True
    return EmpiricalMeasure(atoms[keep], weights[keep] / weights[keep].sum())


@dataclass(frozen=True)
class GrowthReport:
    passed: bool
    worst_ratio: float
    sample_count: int
    bound_constant: float


def verify_polynomial_growth(
    u: MeasureFunctional,
    p: int,
    sample_count: int,
    bound_constant: float,
    seed: int = 0,
) -> GrowthReport:
    """Sample random (measure, points) pairs and check the p-th derivative bound.

    Checks |lfd(p, m, y)| <= C * (|y_1|^p + ... + |y_p|^p) and reports the
    worst observed ratio.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(sample_count):
        n_atoms = int(rng.integers(1, 6))
        atoms = rng.normal(0.0, 1.5, size=(n_atoms, u.dim))
        w = rng.dirichlet(np.ones(n_atoms))
        m = EmpiricalMeasure(atoms, w)
        ys = rng.normal(0.0, 2.0, size=(p, u.dim))
        denom = bound_constant * float(np.sum(np.linalg.norm(ys, axis=1) ** p))
        if denom == 0.0:
            continue
        ratio = abs(u.lfd(p, m, ys)) / denom
        worst = max(worst, ratio)
    return GrowthReport(worst <= 1.0 + 1e-12, worst, sample_count, bound_constant)


def directional_derivative_fd(u: MeasureFunctional, m, m_prime, t: float, h: float = FD_STEP) -> float:
    """Central finite difference of t -> U((1-t) m + t m')."""
    return (u(mix_measures(m, m_prime, t + h)) - u(mix_measures(m, m_prime, t - h))) / (2 * h)


def directional_derivative_exact(u: MeasureFunctional, m, m_prime, t: float) -> float:
    """First-order contraction: integral of lfd(1, m_t, y) d(m' - m)(y)."""
    m_t = mix_measures(m, m_prime, t)
    atoms, signed = signed_difference(m_prime, m)
    return lfd_tensor_integral(u, 1, m_t, atoms, signed)
