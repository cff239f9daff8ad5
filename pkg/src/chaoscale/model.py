"""McKean-Vlasov model definitions and analytic reference laws.

A model bundles drift and diffusion coefficients with a declared
measure-dependence form, a horizon, and an initial law.  The linear
mean-field Ornstein-Uhlenbeck model carries a closed-form limit law and
is the analytic oracle for every dynamic bias experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatchError, OracleUnavailableError
from .functional import LinearFunctional, MeasureFunctional, MomentCylinder
from .measure import DiscreteLaw

GH_NODES = 96  # Gauss-Hermite nodes for expectations under Gaussian limits


# ---------------------------------------------------------------------------
# initial laws


class GaussianLaw:
    """Parametric 1-d Gaussian initial law with closed-form moments."""

    def __init__(self, mean: float = 0.0, std: float = 1.0):
        if std < 0:
            raise ValueError("std must be nonnegative")
        self.mean_value = float(mean)
        self.std = float(std)
        self.dim = 1

    def mean(self) -> np.ndarray:
        return np.array([self.mean_value])

    def variance(self, coordinate: int = 0) -> float:
        return self.std**2

    def moment(self, order: int, coordinate: int = 0) -> float:
        # raw moment via binomial expansion of (m + s Z)^order
        total = 0.0
        for j in range(0, order + 1, 2):
            double_fact = math.prod(range(j - 1, 0, -2)) if j else 1
            total += math.comb(order, j) * self.mean_value ** (order - j) * self.std**j * double_fact
        return total

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        return self.mean_value + self.std * rng.standard_normal((*shape, 1))


InitialLaw = DiscreteLaw | GaussianLaw


# ---------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True)
class CoefficientSpec:
    """A drift or diffusion coefficient with declared measure dependence.

    form:
      constant     -- value independent of state and measure
      pointwise    -- g(x)
      kernel       -- beta0(x) + integral B(x, y) mu(dy)
      statistic    -- h(x, s) with s the first-moment vector of mu
    """

    form: str
    func: Callable | float
    beta0: Optional[Callable] = None
    lipschitz: Optional[float] = None
    bound: Optional[float] = None
    uniformly_bounded: bool = False

    def evaluate(self, x: np.ndarray, atoms: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Pointwise value for particles x (N, d) against the measure (atoms, weights)."""
        return self.evaluate_batch(x[None, ...], atoms[None, ...], weights[None, ...])[0]

    def evaluate_batch(self, x: np.ndarray, atoms: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Batched evaluation: x (B, N, d), atoms (B, K, d), weights (B, K)."""
        if self.form == "constant":
            return np.broadcast_to(np.asarray(self.func, dtype=float), x.shape).copy()
        if self.form == "pointwise":
            return np.asarray(self.func(x), dtype=float)
        if self.form == "statistic":
            s = np.einsum("bk,bkd->bd", weights, atoms)
            return np.asarray(self.func(x, s[:, None, :]), dtype=float)
        if self.form == "kernel":
            base = self.beta0(x) if self.beta0 is not None else 0.0
            out = []
            for xb, ab, wb in zip(x, atoms, weights):
                kernel = np.asarray(self.func(xb[:, None, :], ab[None, :, :]), dtype=float)
                out.append(np.einsum("k,nkd->nd", wb, kernel))
            return base + np.stack(out)
        raise ValueError(f"unknown coefficient form '{self.form}'")


# ---------------------------------------------------------------------------
# analytic reference for the linear model


@dataclass(frozen=True)
class AnalyticReference:
    """Closed-form limit law of the mean-field OU model.

    The limit marginal at time t is alpha(t) * (X_0 - m_0) + m(t) + sqrt(v_noise(t)) Z
    with Z standard normal independent of X_0.
    """

    a: float
    c: float
    sigma: float
    initial_law: InitialLaw

    def mean_at(self, t: float) -> float:
        m0 = float(self.initial_law.mean()[0])
        return m0 * math.exp((self.c - self.a) * t)

    def decay_at(self, t: float) -> float:
        return math.exp(-self.a * t)

    def noise_variance_at(self, t: float) -> float:
        return ou_variance(self.a, self.sigma, t)

    def variance_at(self, t: float) -> float:
        v0 = self.initial_law.variance()
        return self.decay_at(t) ** 2 * v0 + self.noise_variance_at(t)

    def second_moment_at(self, t: float) -> float:
        return self.variance_at(t) + self.mean_at(t) ** 2


def ou_variance(rate: float, sigma: float, t: float) -> float:
    """Stationary-relaxation variance sigma^2 (1 - e^{-2 rate t}) / (2 rate)."""
    if sigma == 0.0 or t == 0.0:
        return 0.0
    x = 2.0 * rate * t
    if abs(x) < 1e-12:
        return sigma**2 * t
    return sigma**2 * (-math.expm1(-x)) / (2.0 * rate)


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class McKVModel:
    name: str
    dim: int
    drift: CoefficientSpec
    diffusion: CoefficientSpec
    horizon: float
    initial_law: InitialLaw
    linear_params: Optional[tuple[float, float, float]] = None  # (a, c, sigma)
    analytic: Optional[AnalyticReference] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.initial_law.dim != self.dim:
            raise DimensionMismatchError("initial law dimension does not match model dimension")

    @property
    def is_linear(self) -> bool:
        return self.linear_params is not None


def _make_initial_law(spec) -> InitialLaw:
    if isinstance(spec, (DiscreteLaw, GaussianLaw)):
        return spec
    if isinstance(spec, (int, float)):
        return DiscreteLaw.point_mass(float(spec))
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if kind == "bernoulli":
            return DiscreteLaw.bernoulli(spec.get("p", 0.5))
        if kind == "point":
            return DiscreteLaw.point_mass(spec.get("x", 0.0))
        if kind == "gaussian":
            return GaussianLaw(spec.get("mean", 0.0), spec.get("std", 1.0))
        if kind == "discrete":
            return DiscreteLaw(np.asarray(spec["atoms"], dtype=float), np.asarray(spec["probs"], dtype=float))
        raise ValueError(f"unknown initial law kind '{kind}'")
    raise ValueError(f"cannot interpret initial law spec {spec!r}")


def builtin_model(name: str, **params) -> McKVModel:
    """Construct one of the named test models.

    mean_field_ou          dX = (-a X + c E[X]) dt + sigma dW; carries the
                           analytic reference law.
    measure_diffusion_toy  dX = sigma(mu) dW with sigma(mu) = s0 + eps tanh(E[X]);
                           uniformly bounded diffusion.
    bounded_kuramoto       dX = kappa integral sin(y - x) mu(dy) dt + sigma dW;
                           globally bounded smooth coefficients.
    """
    horizon = float(params.pop("horizon", params.pop("T", 1.0)))
    init = _make_initial_law(params.pop("initial_law", 0.0))

    if name == "mean_field_ou":
        a = float(params.pop("a", 1.0))
        c = float(params.pop("c", 0.0))
        sigma = float(params.pop("sigma", 1.0))
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if params:
            raise ValueError(f"unknown parameters {sorted(params)}")
        drift = CoefficientSpec(
            form="statistic",
            func=lambda x, s: -a * x + c * s,
            lipschitz=abs(a) + abs(c),
        )
        diffusion = CoefficientSpec(
            form="constant",
            func=sigma,
            lipschitz=0.0,
            bound=sigma,
            uniformly_bounded=True,
        )
        return McKVModel(
            name=name,
            dim=1,
            drift=drift,
            diffusion=diffusion,
            horizon=horizon,
            initial_law=init,
            linear_params=(a, c, sigma),
            analytic=AnalyticReference(a, c, sigma, init),
            params={"a": a, "c": c, "sigma": sigma},
        )

    if name == "measure_diffusion_toy":
        s0 = float(params.pop("s0", 1.0))
        eps = float(params.pop("eps", 0.1))
        if params:
            raise ValueError(f"unknown parameters {sorted(params)}")
        drift = CoefficientSpec(form="constant", func=0.0, lipschitz=0.0)
        diffusion = CoefficientSpec(
            form="statistic",
            func=lambda x, s: s0 + eps * np.tanh(s) + 0.0 * x,
            lipschitz=abs(eps),
            bound=s0 + abs(eps),
            uniformly_bounded=True,
        )
        return McKVModel(
            name=name,
            dim=1,
            drift=drift,
            diffusion=diffusion,
            horizon=horizon,
            initial_law=init,
            params={"s0": s0, "eps": eps},
        )

    if name == "bounded_kuramoto":
        kappa = float(params.pop("kappa", 1.0))
        sigma = float(params.pop("sigma", 0.5))
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if params:
            raise ValueError(f"unknown parameters {sorted(params)}")
        drift = CoefficientSpec(
            form="kernel",
            func=lambda x, y: kappa * np.sin(y - x),
            lipschitz=2.0 * abs(kappa),
            bound=abs(kappa),
            uniformly_bounded=True,
        )
        diffusion = CoefficientSpec(
            form="constant",
            func=sigma,
            lipschitz=0.0,
            bound=sigma,
            uniformly_bounded=True,
        )
        return McKVModel(
            name=name,
            dim=1,
            drift=drift,
            diffusion=diffusion,
            horizon=horizon,
            initial_law=init,
            params={"kappa": kappa, "sigma": sigma},
        )

    raise ValueError(f"unknown model '{name}'")


def limit_functional_value(model: McKVModel, u: MeasureFunctional) -> float:
    """Exact value of U at the limit marginal law at the horizon.

    Moment cylinders use the closed-form limit mean; linear functionals are
    integrated by Gauss-Hermite quadrature against the limit law (a scaled
    copy of the initial variable plus independent Gaussian noise).
    """
    ref = model.analytic
    if ref is None:
        raise OracleUnavailableError(f"model '{model.name}' has no analytic reference")
    t = model.horizon

    if isinstance(u, MomentCylinder):
        return float(u.derivatives[0](ref.mean_at(t)))

    if isinstance(u, LinearFunctional):
        alpha = ref.decay_at(t)
        m0 = float(ref.initial_law.mean()[0])
        shift = ref.mean_at(t) - alpha * m0
        nodes, gh_weights = np.polynomial.hermite.hermgauss(GH_NODES)
        gh_weights = gh_weights / math.sqrt(math.pi)

        def gaussian_expectation(center, var):
            if var <= 0:
                return float(u.f(np.array([center])))
            pts = center + math.sqrt(2.0 * var) * nodes
            vals = np.array([float(u.f(np.array([p]))) for p in pts])
            return float(gh_weights @ vals)

        noise_var = ref.noise_variance_at(t)
        law = ref.initial_law
        if isinstance(law, DiscreteLaw):
            return float(
                math.fsum(
                    p * gaussian_expectation(alpha * x0 + shift, noise_var)
                    for x0, p in zip(law.atoms[:, 0], law.probs)
                )
            )
        # Gaussian initial law: the limit marginal is exactly Gaussian
        total_var = alpha**2 * law.variance() + noise_var
        return gaussian_expectation(alpha * m0 + shift, total_var)

    raise OracleUnavailableError(f"no quadrature route for functional family '{u.family}'")
