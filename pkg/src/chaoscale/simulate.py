"""Particle-system propagation with reproducible, schedule-independent noise.

Randomness is counter-based: every replication chunk owns a Philox stream
keyed by (master seed, stream tuple, chunk index), and variates are drawn
in a fixed documented order (initial draws, then per step the particle
normals followed by the mean-channel normal for the exact linear scheme).
Results are therefore byte-identical for a fixed seed regardless of the
number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericalBlowupError
from .functional import MeasureFunctional
from .measure import EmpiricalMeasure
from .model import McKVModel, ou_variance

# Replications are generated in fixed blocks of this size; the block size is
# part of the reproducibility contract (changing it changes the variates).
CHUNK = 4096

SCHEMES = ("euler_maruyama", "exact_linear")


@dataclass(frozen=True)
class SimConfig:
    step_count: int = 1
    scheme: str = "exact_linear"
    master_seed: int = 0
    replication_count: int = 1

    def __post_init__(self):
        if self.step_count < 1:
            raise ValueError("step_count must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")

    def validate_for(self, model: McKVModel):
        if self.scheme == "exact_linear" and not model.is_linear:
            raise ValueError("exact_linear scheme requires a linear (mean_field_ou) model")


@dataclass(frozen=True)
class ParticleSystemState:
    positions: np.ndarray  # (N, d)
    time: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        object.__setattr__(self, "positions", pos)

    @property
    def measure(self) -> EmpiricalMeasure:
        return EmpiricalMeasure.from_points(self.positions)


def stream_generator(master_seed: int, *key: int) -> np.random.Generator:
    """Philox generator for a fully keyed stream; identical keys give identical variates."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# single-step updates (batched over replications in the leading axis)


def euler_update(model: McKVModel, x: np.ndarray, dt: float, z: np.ndarray, step_index: int = 0) -> np.ndarray:
    """One Euler-Maruyama step with the pre-step empirical measure frozen.

    x and z have shape (B, N, d); all particles in a replication see the
    same frozen measure (the particle cloud itself, uniform weights).
    """
    b, n, _ = x.shape
    weights = np.full((b, n), 1.0 / n)
    drift = model.drift.evaluate_batch(x, x, weights)
    diff = model.diffusion.evaluate_batch(x, x, weights)
    out = x + drift * dt + diff * math.sqrt(dt) * z
    if not np.all(np.isfinite(out)):
        raise NumericalBlowupError(step_index)
    return out


def exact_linear_update(
    model: McKVModel, x: np.ndarray, dt: float, z: np.ndarray, z_mean: np.ndarray, step_index: int = 0
) -> np.ndarray:
    """Exact Gaussian transition of the linear N-particle system over dt.

    The system splits exactly into the sample-mean process (an OU process
    with rate a - c and volatility sigma / sqrt(N)) and centered deviations
    (OU with rate a, noise projected orthogonally to the mean direction);
    the two noise channels are independent.  x, z: (B, N); z_mean: (B,).
    """
    a, c, sigma = model.linear_params
    n = x.shape[1]
    rate_mean = a - c
    decay_mean = math.exp(-rate_mean * dt)
    decay_dev = math.exp(-a * dt)
    var_dev = ou_variance(a, sigma, dt)
    var_mean = ou_variance(rate_mean, sigma, dt) / n

    xbar = x.mean(axis=1, keepdims=True)
    dev = x - xbar
    g = math.sqrt(var_dev) * z
    g_centered = g - g.mean(axis=1, keepdims=True)
    new_mean = decay_mean * xbar[:, 0] + math.sqrt(var_mean) * z_mean
    out = new_mean[:, None] + decay_dev * dev + g_centered
    if not np.all(np.isfinite(out)):
        raise NumericalBlowupError(step_index)
    return out


def step(state: ParticleSystemState, model: McKVModel, dt: float, rng: np.random.Generator) -> ParticleSystemState:
    """Single Euler-Maruyama step of one particle system."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    z = rng.standard_normal(state.positions.shape)
    new = euler_update(model, state.positions[None, ...], dt, z[None, ...])[0]
    return ParticleSystemState(new, state.time + dt)


def step_exact_linear(
    state: ParticleSystemState, model: McKVModel, dt: float, rng: np.random.Generator
) -> ParticleSystemState:
    """Single exact transition step; model must be linear."""
    if not model.is_linear:
        raise ValueError("exact linear step requires a linear model")
    n = state.positions.shape[0]
    z = rng.standard_normal((1, n))
    z_mean = rng.standard_normal(1)
    new = exact_linear_update(model, state.positions[:, 0][None, :], dt, z, z_mean)[0]
    return ParticleSystemState(new[:, None], state.time + dt)


# ---------------------------------------------------------------------------
# chunked terminal simulation


def _simulate_chunk(model: McKVModel, n: int, config: SimConfig, gen: np.random.Generator) -> np.ndarray:
    """Terminal positions (CHUNK, N, d) for one replication chunk."""
    dt = model.horizon / config.step_count
    init = model.initial_law.sample(gen, (CHUNK, n))  # (B, N, d)
    if config.scheme == "exact_linear":
        x = init[..., 0]
        for s in range(config.step_count):
            z = gen.standard_normal((CHUNK, n))
            z_mean = gen.standard_normal(CHUNK)
            x = exact_linear_update(model, x, dt, z, z_mean, step_index=s)
        return x[..., None]
    x = init
    for s in range(config.step_count):
        z = gen.standard_normal((CHUNK, n, model.dim))
        x = euler_update(model, x, dt, z, step_index=s)
    return x


def terminal_positions(
    model: McKVModel,
    n: int,
    reps: int,
    config: SimConfig,
    stream: tuple[int, ...] = (),
    threads: int = 1,
) -> np.ndarray:
    """Terminal positions (reps, N, d) over independent replications.

    Chunks are independent keyed streams; the output is a deterministic
    function of (model, n, reps, config, stream) for any thread count.
    """
    config.validate_for(model)
    n_chunks = -(-reps // CHUNK)

    def run(ci):
        gen = stream_generator(config.master_seed, *stream, ci)
        return _simulate_chunk(model, n, config, gen)

    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run, range(n_chunks)))
    else:
        chunks = [run(ci) for ci in range(n_chunks)]
    return np.concatenate(chunks, axis=0)[:reps]


def run_terminal_measure(
    model: McKVModel,
    n: int,
    config: SimConfig,
    ensemble: int = 0,
    replication: int = 0,
) -> EmpiricalMeasure:
    """Terminal empirical measure of replication r within ensemble j."""
    ci, offset = divmod(replication, CHUNK)
    gen = stream_generator(config.master_seed, ensemble, ci)
    config.validate_for(model)
    positions = _simulate_chunk(model, n, config, gen)
    return EmpiricalMeasure.from_points(positions[offset])


def phi_values(
    model: McKVModel,
    u: MeasureFunctional,
    n: int,
    reps: int,
    config: SimConfig,
    stream: tuple[int, ...] = (),
    threads: int = 1,
) -> np.ndarray:
    """Per-replication values U(mu_N^(r)), r = 0..reps-1."""
    config.validate_for(model)
    n_chunks = -(-reps // CHUNK)

    def run(ci):
        gen = stream_generator(config.master_seed, *stream, ci)
        positions = _simulate_chunk(model, n, config, gen)
        return u.eval_batch(positions)

    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    else:
        parts = [run(ci) for ci in range(n_chunks)]
    return np.concatenate(parts)[:reps]


def phi_estimate(
    model: McKVModel,
    u: MeasureFunctional,
    n: int,
    reps: int,
    config: SimConfig,
    stream: tuple[int, ...] = (),
    threads: int = 1,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of U(mu_N) over replications.

    The reduction is a compensated sum in fixed replication order, so the
    result does not depend on the degree of parallelism.
    """
    if reps < 2:
        raise ValueError("reps must be >= 2")
    values = phi_values(model, u, n, reps, config, stream=stream, threads=threads)
    mean = math.fsum(values) / reps
    stderr = float(np.std(values, ddof=1)) / math.sqrt(reps)
    return mean, stderr


def with_seed(config: SimConfig, seed: int) -> SimConfig:
    return replace(config, master_seed=seed)
