"""Arithmetic Asian basket option pricing by batched (quasi-)Monte Carlo simulation."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .gauss import transform_batch
from .lowdisc import Sampler
from .market import ConstantVolatility, MarketSpec, TimeGrid, covariance_blocks, drift_vector
from .pathgen import GeneratingMatrix, generator_cholesky, synthesize

log = logging.getLogger(__name__)

EXP_CLAMP = 700.0
PAYOFF_CAP = 1e300
CHUNK_ROWS = 2048


@dataclass(frozen=True)
class PayoffSpec:
    strike: float
    maturity: float

    def __post_init__(self):
        if not self.strike > 0:
            raise ValidationError(f"strike must be positive, got {self.strike}")
        if not self.maturity > 0:
            raise ValidationError(f"maturity must be positive, got {self.maturity}")


@dataclass
class PriceEstimate:
    price: float
    rmse: float
    batch_means: np.ndarray
    batches: int
    paths: int
    E: int
    method: str
    sampler: str
    seconds: float | None = None
    events: dict = field(default_factory=dict)
    discarded_variance: float = 0.0


@dataclass
class _Events:
    clamped: int = 0
    capped: int = 0

    def add(self, other: "_Events"):
        self.clamped += other.clamped
        self.capped += other.capped


def _payoff(z, mu, strike, cap, events: _Events | None):
    x = mu + z
    hit = np.abs(x) > EXP_CLAMP
    if hit.any():
        if events is not None:
            events.clamped += int(hit.sum())
        x = np.clip(x, -EXP_CLAMP, EXP_CLAMP)
    basket = np.exp(x).sum(axis=-1)
    pay = np.maximum(basket - strike, 0.0)
    over = ~(pay <= cap)
    if over.any():
        if events is not None:
            events.capped += int(over.sum())
        pay = np.where(over, cap, pay)
    return pay


def payoff(z, mu, spec: PayoffSpec, cap: float = PAYOFF_CAP):
    """Undiscounted payoff ``max(sum_k exp(mu_k + z_k) - K, 0)`` for one path or a stack of rows.

    Exponents are clamped to ``[-700, 700]`` and payoffs to ``cap``; either event is logged.
    """
    events = _Events()
    pay = _payoff(np.asarray(z, dtype=float), np.asarray(mu, dtype=float), spec.strike, cap, events)
    if events.clamped or events.capped:
        log.warning("payoff guard: %d exponent clamps, %d payoff caps", events.clamped, events.capped)
    return float(pay) if np.ndim(pay) == 0 else pay


def batch_rmse(batch_means) -> float:
    """Standard error of the grand mean from ``B >= 2`` independent batch means."""
    a = np.asarray(batch_means, dtype=float)
    b = a.size
    if b < 2:
        raise ValidationError("batch RMSE needs at least two batches")
    return float(np.sqrt(np.sum((a - _shifted_mean(a)) ** 2) / (b * (b - 1))))


def _shifted_mean(a) -> float:
    # mean taken relative to the first value; exact when all values agree
    a = np.asarray(a, dtype=float)
    return float(a[0] + math.fsum(a - a[0]) / a.size)


def batch_seeds(seed, batches: int) -> list:
    """One independent child seed per batch, stable for a given master seed."""
    return np.random.SeedSequence(seed).spawn(batches)


def _one_batch(gen: GeneratingMatrix, sampler: Sampler, mu, strike, n, seed, cap, chunk):
    rng = np.random.default_rng(seed)
    u = sampler.draw(n, rng)
    events = _Events()
    parts = []
    for lo in range(0, n, chunk):
        eps = transform_batch(u[lo:lo + chunk])
        parts.append(_payoff(synthesize(gen, eps), mu, strike, cap, events))
    total = np.concatenate(parts).mean() if parts else float("nan")
    return float(total), events


def price(spec: PayoffSpec, market: MarketSpec, grid: TimeGrid, generator: GeneratingMatrix,
          sampler: Sampler, batches: int = 10, paths: int = 8192, seed=0, jobs: int = 1,
          cap: float = PAYOFF_CAP, chunk: int = CHUNK_ROWS, timing: bool = True) -> PriceEstimate:
    """Discounted price and batch RMSE.

    Every batch draws ``paths`` fresh points from ``sampler`` with its own child
    seed; batches may run on ``jobs`` threads and are reduced in batch order, so
    the result does not depend on ``jobs``.
    """
    if batches < 2:
        raise ValidationError("at least two batches are needed to estimate the RMSE")
    if paths < 1:
        raise ValidationError("paths per batch must be positive")
    if sampler.dimension != generator.columns:
        raise ValidationError(
            f"sampler dimension {sampler.dimension} does not match generator columns {generator.columns}")
    if not math.isclose(grid.maturity, spec.maturity, rel_tol=1e-12):
        raise ValidationError(f"grid ends at {grid.maturity}, payoff maturity is {spec.maturity}")
    if generator.size != market.n_assets * len(grid):
        raise ValidationError("generator size does not match the market and grid")
    mu = drift_vector(market, grid)
    seeds = batch_seeds(seed, batches)
    start = time.perf_counter()

    def work(s):
        return _one_batch(generator, sampler, mu, spec.strike, paths, s, cap, chunk)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, seeds))
    else:
        results = [work(s) for s in seeds]
    disc = math.exp(-market.rate * spec.maturity)
    means = np.array([r[0] for r in results]) * disc
    events = _Events()
    for _, ev in results:
        events.add(ev)
    if events.clamped or events.capped:
        log.warning("payoff guard: %d exponent clamps, %d payoff caps", events.clamped, events.capped)
    elapsed = time.perf_counter() - start
    return PriceEstimate(
        price=_shifted_mean(means),
        rmse=batch_rmse(means),
        batch_means=means,
        batches=batches,
        paths=paths,
        E=generator.columns,
        method=generator.method,
        sampler=sampler.name,
        seconds=elapsed if timing else None,
        events={"clamped": events.clamped, "capped": events.capped},
        discarded_variance=generator.discarded_variance,
    )


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def black_scholes_call(spot: float, strike: float, rate: float, sigma: float, maturity: float) -> float:
    """European call value; ``sigma = 0`` gives the discounted intrinsic forward value."""
    forward = math.exp(math.log(spot) + rate * maturity)
    disc = math.exp(-rate * maturity)
    if sigma == 0:
        return disc * max(forward - strike, 0.0)
    vol = sigma * math.sqrt(maturity)
    d1 = (math.log(forward / strike) + 0.5 * vol * vol) / vol
    return disc * (forward * _norm_cdf(d1) - strike * _norm_cdf(d1 - vol))


@dataclass(frozen=True)
class SanityReport:
    estimate: PriceEstimate
    closed_form: float
    deviation: float

    @property
    def within(self) -> bool:
        """Deviation inside three standard errors (or exact when the RMSE is zero)."""
        return self.deviation <= 3.0 * self.estimate.rmse


def put_call_sanity(spec: PayoffSpec, market: MarketSpec, grid: TimeGrid, sampler: Sampler,
                    batches: int = 10, paths: int = 8192, seed=0) -> SanityReport:
    """Price a one-asset, one-date basket by simulation and compare with Black-Scholes."""
    if market.n_assets != 1 or len(grid) != 1:
        raise ValidationError("the Black-Scholes check needs one asset and one monitoring date")
    if not isinstance(market.volatility, ConstantVolatility):
        raise ValidationError("the Black-Scholes check needs constant volatility")
    sigma = float(market.volatility.sigmas[0])
    cov = covariance_blocks(market, grid)
    if sigma == 0:
        gen = GeneratingMatrix("cholesky", np.zeros((1, 1)), 1, 1, 0.0)
    else:
        gen = generator_cholesky(cov, grid)
    est = price(spec, market, grid, gen, sampler, batches, paths, seed)
    spot = float(market.spots[0] * market.weight_matrix(grid)[0, 0])
    ref = black_scholes_call(spot, spec.strike, market.rate, sigma, spec.maturity)
    return SanityReport(est, ref, abs(est.price - ref))
