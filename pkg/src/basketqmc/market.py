"""Multi-asset Black-Scholes market: time grids, volatility models, covariance blocks and drifts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError
from .kronlin import BlockCovariance


@dataclass(frozen=True)
class TimeGrid:
    """Monitoring dates ``0 < t_1 < ... < t_N = T`` in years."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        if t.size == 0:
            raise ValidationError("time grid needs at least one date")
        if not np.all(np.isfinite(t)):
            raise ValidationError("time grid contains non-finite values")
        if t[0] <= 0:
            raise ValidationError(f"first monitoring date must be positive, got {t[0]}")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("monitoring dates must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @classmethod
    def equally_spaced(cls, n: int, maturity: float) -> "TimeGrid":
        """``t_j = j T / n`` for ``j = 1..n``."""
        if n < 1:
            raise ValidationError("grid size must be at least 1")
        if maturity <= 0:
            raise ValidationError("maturity must be positive")
        return cls(np.arange(1, n + 1) * (maturity / n))

    @property
    def size(self) -> int:
        return self.times.size

    @property
    def maturity(self) -> float:
        return float(self.times[-1])

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.times, prepend=0.0)

    def __len__(self):
        return self.size

    def __array__(self, dtype=None, copy=None):
        return np.array(self.times, dtype=dtype)


class VolatilityModel:
    """Deterministic per-asset volatility ``sigma_i(t)``."""

    kind = "abstract"
    constant = False

    @property
    def n_assets(self) -> int:
        raise NotImplementedError

    def sigma(self, t) -> np.ndarray:
        """Volatilities at time ``t``: shape ``(M,)`` for scalar ``t``, ``(len(t), M)`` otherwise."""
        raise NotImplementedError

    def integrated_covariance(self, t: float, corr: np.ndarray) -> np.ndarray:
        """``int_0^t sigma_i(s) sigma_k(s) rho_ik ds`` as an ``M x M`` matrix."""
        raise NotImplementedError

    def initial(self) -> np.ndarray:
        return np.asarray(self.sigma(0.0))


@dataclass(frozen=True)
class ConstantVolatility(VolatilityModel):
    sigmas: np.ndarray
    kind = "constant"
    constant = True

    def __post_init__(self):
        s = np.asarray(self.sigmas, dtype=float).ravel()
        if s.size == 0 or np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValidationError("constant volatilities must be finite and non-negative")
        object.__setattr__(self, "sigmas", s)

    @property
    def n_assets(self) -> int:
        return self.sigmas.size

    def sigma(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.sigmas, t.shape + self.sigmas.shape).copy()

    def integrated_covariance(self, t, corr):
        return t * corr * np.outer(self.sigmas, self.sigmas)


@dataclass(frozen=True)
class ExpDecayVolatility(VolatilityModel):
    """``sigma_i(t) = hat_i exp(-t / tau_i) + inf_i`` with ``hat_i = sigma_i(0) - inf_i``."""

    hat: np.ndarray
    asymptotic: np.ndarray
    tau: np.ndarray
    kind = "expdecay"

    def __post_init__(self):
        arrays = np.broadcast_arrays(*(np.asarray(a, dtype=float).ravel()
                                       for a in (self.hat, self.asymptotic, self.tau)))
        hat, asym, tau = (np.array(a) for a in arrays)
        if hat.size == 0:
            raise ValidationError("exp-decay volatility needs at least one asset")
        if np.any(hat < 0) or np.any(asym < 0):
            raise ValidationError("volatility parameters must be non-negative")
        if np.any(tau <= 0):
            raise ValidationError("decay constants must be positive")
        object.__setattr__(self, "hat", hat)
        object.__setattr__(self, "asymptotic", asym)
        object.__setattr__(self, "tau", tau)

    @classmethod
    def from_initial(cls, initial, asymptotic, tau) -> "ExpDecayVolatility":
        """Build from initial volatilities ``sigma_i(0)`` instead of the decaying part."""
        initial, asymptotic = np.broadcast_arrays(np.asarray(initial, dtype=float),
                                                  np.asarray(asymptotic, dtype=float))
        return cls(initial - asymptotic, asymptotic, tau)

    @property
    def n_assets(self) -> int:
        return self.hat.size

    def sigma(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return self.hat * np.exp(-t / self.tau) + self.asymptotic

    def integrated_covariance(self, t, corr):
        a, b, tau = self.hat, self.asymptotic, self.tau
        tau_ik = np.outer(tau, tau) / np.add.outer(tau, tau)
        # tau * (1 - exp(-t / tau)), written with expm1 for small t
        decay_ik = -tau_ik * np.expm1(-t / tau_ik)
        decay_i = -tau * np.expm1(-t / tau)
        val = (np.outer(a, a) * decay_ik
               + np.outer(decay_i * a, b)
               + np.outer(b, decay_i * a)
               + np.outer(b, b) * t)
        return corr * val


def correlation_matrix(m: int, rho: float) -> np.ndarray:
    """Equicorrelation matrix: unit diagonal, ``rho`` elsewhere."""
    c = np.full((m, m), float(rho))
    np.fill_diagonal(c, 1.0)
    return c


def validate_correlation(corr, m: int | None = None, tol: float = 1e-10) -> np.ndarray:
    c = np.asarray(corr, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValidationError(f"correlation matrix must be square, got shape {c.shape}")
    if m is not None and c.shape[0] != m:
        raise ValidationError(f"correlation matrix is {c.shape[0]}x{c.shape[0]} but there are {m} assets")
    if not np.allclose(c, c.T, atol=tol, rtol=0):
        raise ValidationError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(c), 1.0, atol=tol, rtol=0):
        raise ValidationError("correlation matrix must have a unit diagonal")
    if np.any(np.abs(c) > 1 + tol):
        raise ValidationError("correlations must lie in [-1, 1]")
    eig = np.linalg.eigvalsh(0.5 * (c + c.T))
    if eig[0] < -tol * max(eig[-1], 1.0):
        raise ValidationError(f"correlation matrix is not positive semi-definite (min eigenvalue {eig[0]:.3e})")
    return 0.5 * (c + c.T)


@dataclass(frozen=True)
class MarketSpec:
    """Spots, short rate, correlation, volatility model and basket weights.

    ``weights`` has shape ``(M, N)`` for an ``N``-date grid; when omitted every
    weight is ``1 / (M N)``. Scalars or a length-``M`` vector are broadcast
    over dates and rescaled so the weights sum to one.
    """

    spots: np.ndarray
    rate: float
    correlation: np.ndarray
    volatility: VolatilityModel
    weights: np.ndarray | None = field(default=None)

    def __post_init__(self):
        spots = np.asarray(self.spots, dtype=float).ravel()
        m = self.volatility.n_assets
        if spots.size == 1 and m > 1:
            spots = np.full(m, spots[0])
        if spots.size != m:
            raise ValidationError(f"{spots.size} spot prices for {m} assets")
        if np.any(spots <= 0):
            raise ValidationError("spot prices must be positive")
        if not np.isfinite(self.rate):
            raise ValidationError("rate must be finite")
        object.__setattr__(self, "spots", spots)
        object.__setattr__(self, "correlation", validate_correlation(self.correlation, m))
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < 0):
                raise ValidationError("basket weights must be non-negative")
            object.__setattr__(self, "weights", w)

    @property
    def n_assets(self) -> int:
        return self.spots.size

    def weight_matrix(self, grid: TimeGrid) -> np.ndarray:
        """``(M, N)`` weights summing to one."""
        m, n = self.n_assets, len(grid)
        if self.weights is None:
            return np.full((m, n), 1.0 / (m * n))
        w = self.weights
        if w.ndim == 1 and w.size == m:
            w = np.repeat(w[:, None], n, axis=1)
        elif w.ndim == 0:
            w = np.full((m, n), float(w))
        if w.shape != (m, n):
            raise ValidationError(f"weights have shape {w.shape}, expected {(m, n)}")
        total = w.sum()
        if total <= 0:
            raise ValidationError("basket weights sum to zero")
        return w / total


def covariance_blocks(spec: MarketSpec, grid: TimeGrid) -> BlockCovariance:
    """Blocks ``Sigma(t_l)`` of integrated covariance; carries the constant-volatility Kronecker factor."""
    t = np.asarray(grid, dtype=float)
    vol = spec.volatility
    if vol.constant:
        base = spec.correlation * np.outer(vol.sigmas, vol.sigmas)
        return BlockCovariance(t[:, None, None] * base, kron_factor=base)
    blocks = np.stack([vol.integrated_covariance(tl, spec.correlation) for tl in t])
    return BlockCovariance(0.5 * (blocks + blocks.transpose(0, 2, 1)))


def integrated_variance(spec: MarketSpec, grid: TimeGrid) -> np.ndarray:
    """``int_0^{t_l} sigma_i(s)^2 ds`` as an ``(N, M)`` array."""
    t = np.asarray(grid, dtype=float)
    ident = np.eye(spec.n_assets)
    return np.stack([np.diag(spec.volatility.integrated_covariance(tl, ident)) for tl in t])


def drift_vector(spec: MarketSpec, grid: TimeGrid) -> np.ndarray:
    """``mu_k = ln(w S(0)) + r t - var/2`` per (time, asset) pair, asset index fastest."""
    w = spec.weight_matrix(grid)
    if np.any(w <= 0):
        raise DomainError("drift needs strictly positive weights (their logarithm is taken)")
    t = np.asarray(grid, dtype=float)
    log_ws = np.log(w.T * spec.spots)  # (N, M)
    mu = log_ws + spec.rate * t[:, None] - 0.5 * integrated_variance(spec, grid)
    return mu.ravel()
