"""Generating matrices ``C`` with ``C C^T = Sigma_MN``: Cholesky, PCA and Kronecker-approximation PCA.

``Z = C eps`` maps independent standard normals ``eps`` to the correlated
log-price increments, stored time-major with the asset index fastest.
PCA and KPA order the columns by importance so a truncated ``C`` keeps only
the leading ``E`` random sources.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kronlin
from .errors import FactorizationError, ValidationError
from .kronlin import BlockCholesky, BlockCovariance, EigenDecomposition

log = logging.getLogger(__name__)

METHODS = ("cholesky", "pca", "kpa")


@dataclass(frozen=True)
class EffectiveDimension:
    """Truncation dimension ``E`` chosen at variance threshold ``p`` and the share it explains."""

    E: int
    p: float | None
    explained: float


def effective_dimension(eigenvalues, p: float) -> EffectiveDimension:
    """Number of leading factors whose cumulative variance share does not exceed ``p``.

    At least one factor is always kept and ``p >= 1`` keeps them all.
    """
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    if lam.size == 0:
        raise ValidationError("empty spectrum")
    if not 0 < p:
        raise ValidationError(f"variance threshold must be positive, got {p}")
    total = lam.sum()
    if total <= 0:
        return EffectiveDimension(lam.size, p, 1.0)
    share = np.cumsum(lam) / total
    if p >= 1:
        e = lam.size
    else:
        e = max(1, int(np.count_nonzero(share <= p)))
    return EffectiveDimension(e, p, float(share[e - 1]))


@dataclass(frozen=True)
class GeneratingMatrix:
    """Dense ``MN x E`` map from ``E`` independent normals to one path vector.

    ``eigenvalues`` is the (approximating, for KPA) spectrum that ordered the
    columns; ``total_variance`` is ``tr(Sigma_MN)``.
    """

    method: str
    matrix: np.ndarray
    n_times: int
    n_assets: int
    total_variance: float
    eigenvalues: np.ndarray | None = None
    effective: EffectiveDimension | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def columns(self) -> int:
        return self.matrix.shape[1]

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def kept_variance(self) -> float:
        return float(np.einsum("ij,ij->", self.matrix, self.matrix))

    @property
    def discarded_variance(self) -> float:
        return max(self.total_variance - self.kept_variance, 0.0)

    def truncate(self, e: int) -> "GeneratingMatrix":
        """Keep the first ``e`` columns."""
        if not 1 <= e <= self.columns:
            raise ValidationError(f"cannot keep {e} of {self.columns} columns")
        eff = EffectiveDimension(e, None, self.kept_share(e))
        return GeneratingMatrix(self.method, self.matrix[:, :e], self.n_times, self.n_assets,
                                self.total_variance, self.eigenvalues, eff, dict(self.metadata))

    def kept_share(self, e: int | None = None) -> float:
        cols = self.matrix if e is None else self.matrix[:, :e]
        if self.total_variance <= 0:
            return 1.0
        return float(np.einsum("ij,ij->", cols, cols) / self.total_variance)

    def apply(self, normals) -> np.ndarray:
        return synthesize(self, normals)


def _full_or(e: int | None, size: int) -> int:
    if e is None:
        return size
    if not 1 <= e <= size:
        raise ValidationError(f"effective dimension override {e} outside 1..{size}")
    return int(e)


def _check(cov: BlockCovariance, grid) -> np.ndarray:
    t = np.asarray(grid, dtype=float)
    if t.size != cov.n_times:
        raise ValidationError(f"grid has {t.size} dates, covariance has {cov.n_times}")
    return t


def generator_cholesky(cov: BlockCovariance, grid) -> GeneratingMatrix:
    """Lower-triangular ``C``; ``C_R kron C_Sigma`` when volatilities are constant."""
    t = _check(cov, grid)
    if cov.kron_factor is not None:
        try:
            c_sigma = np.linalg.cholesky(cov.kron_factor)
        except np.linalg.LinAlgError:
            raise FactorizationError("asset covariance is not positive definite", index=0) from None
        mat = kronlin.kron(kronlin.boomerang_cholesky(t), c_sigma)
    else:
        mat = kronlin.block_cholesky(cov, t).assemble()
    eff = EffectiveDimension(mat.shape[1], None, 1.0)
    return GeneratingMatrix("cholesky", mat, cov.n_times, cov.n_assets, cov.trace(), None, eff)


def _spectrum(cov: BlockCovariance, grid) -> EigenDecomposition:
    t = np.asarray(grid, dtype=float)
    if cov.kron_factor is not None:
        return kronlin.kron_eigen(kronlin.sym_eigen(kronlin.build_boomerang(t)),
                                  kronlin.sym_eigen(cov.kron_factor))
    # no Kronecker structure: dense eigendecomposition of the assembled matrix
    return kronlin.sym_eigen(cov.assemble())


def generator_pca(cov: BlockCovariance, grid, p: float = 0.99,
                  eff_dim: int | None = None) -> tuple[GeneratingMatrix, EffectiveDimension]:
    """``C = E Lambda^{1/2}`` truncated at the effective dimension for threshold ``p``.

    ``eff_dim`` overrides the threshold rule.
    """
    _check(cov, grid)
    eig = _spectrum(cov, grid)
    eff = effective_dimension(eig.values, p)
    if eff_dim is not None:
        e = _full_or(eff_dim, eig.size)
        eff = EffectiveDimension(e, None, float(eig.values[:e].sum() / eig.values.sum()))
    mat = eig.factor(eff.E)
    gen = GeneratingMatrix("pca", mat, cov.n_times, cov.n_assets, cov.trace(), eig.values, eff)
    return gen, eff


@dataclass(frozen=True)
class KPAPieces:
    """Factored form of the KPA generator: ``C_Sigma (C_R^{-1} kron C_K^{-1}) E_2 Lambda^{1/2}``."""

    k: np.ndarray
    chol_k_inv: np.ndarray
    cholesky: BlockCholesky
    floored: bool

    def correction(self, y) -> np.ndarray:
        """Apply ``C_Sigma (C_R^{-1} kron C_K^{-1})`` to the columns of ``y`` (shape ``(N*M, ...)``)."""
        y = np.asarray(y, dtype=float)
        n, m = self.cholesky.n_times, self.cholesky.n_assets
        yb = y.reshape((n, m) + y.shape[1:])
        diff = np.diff(yb, axis=0, prepend=np.zeros_like(yb[:1]))
        scale = 1.0 / np.sqrt(self.cholesky.increments)
        diff *= scale.reshape((n, 1) + (1,) * (y.ndim - 1))
        x = np.einsum("ik,lk...->li...", self.chol_k_inv, diff)
        return self.cholesky.apply(x.reshape(y.shape))


def kpa_pieces(cov: BlockCovariance, grid) -> KPAPieces:
    t = _check(cov, grid)
    k = kronlin.kpa_fit(cov, t)
    k, floored = kronlin.ensure_positive_definite(k)
    try:
        c_k = np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        raise FactorizationError("fitted asset covariance is not positive definite after flooring") from None
    c_k_inv = np.linalg.solve(c_k, np.eye(k.shape[0]))
    return KPAPieces(k, np.tril(c_k_inv), kronlin.block_cholesky(cov, t), floored)


def generator_kpa(cov: BlockCovariance, grid, p: float = 0.99,
                  eff_dim: int | None = None) -> tuple[GeneratingMatrix, EffectiveDimension]:
    """Factor ordering from the spectrum of ``R kron K``, exact path law through the Cholesky correction.

    Only the ``M x M`` fit ``K`` and the ``N x N`` boomerang are eigendecomposed.
    """
    t = _check(cov, grid)
    pieces = kpa_pieces(cov, t)
    eig_r = kronlin.sym_eigen(kronlin.build_boomerang(t))
    eig_k = kronlin.sym_eigen(pieces.k)
    values = np.outer(eig_r.values, eig_k.values).ravel()
    values = values[np.argsort(-values, kind="stable")]
    eff = effective_dimension(values, p)
    if eff_dim is not None:
        eff = EffectiveDimension(_full_or(eff_dim, values.size), None, float("nan"))
    approx = kronlin.kron_eigen(eig_r, eig_k, columns=eff.E)
    mat = pieces.correction(approx.factor(eff.E))
    gen = GeneratingMatrix("kpa", mat, cov.n_times, cov.n_assets, cov.trace(), approx.values, eff,
                           {"kpa_floored": pieces.floored, "kpa_k": pieces.k})
    if eff_dim is not None:
        eff = EffectiveDimension(eff.E, None, gen.kept_share())
        gen = GeneratingMatrix("kpa", mat, cov.n_times, cov.n_assets, cov.trace(), approx.values, eff,
                               gen.metadata)
    return gen, eff


def build_generator(method: str, cov: BlockCovariance, grid, p: float = 0.99,
                    eff_dim: int | None = None) -> GeneratingMatrix:
    """Dispatch on ``method``; Cholesky ignores ``p`` but honors an ``eff_dim`` truncation."""
    method = method.lower()
    if method == "cholesky":
        gen = generator_cholesky(cov, grid)
        return gen if eff_dim is None else gen.truncate(_full_or(eff_dim, gen.columns))
    if method == "pca":
        return generator_pca(cov, grid, p, eff_dim)[0]
    if method == "kpa":
        return generator_kpa(cov, grid, p, eff_dim)[0]
    raise ValidationError(f"unknown generator {method!r}; choose from {', '.join(METHODS)}")


def synthesize(gen: GeneratingMatrix, normals) -> np.ndarray:
    """Rows of ``normals`` (shape ``(n, E)``) mapped to path rows ``Z = C eps`` of length ``MN``."""
    normals = np.asarray(normals, dtype=float)
    if normals.ndim == 1:
        normals = normals[None, :]
    if normals.shape[-1] != gen.columns:
        raise ValidationError(f"generator expects {gen.columns} normals per path, got {normals.shape[-1]}")
    return normals @ gen.matrix.T


def write_spectrum(gen: GeneratingMatrix, path) -> None:
    """Text dump of the ordering spectrum: index, eigenvalue, cumulative share."""
    if gen.eigenvalues is None:
        raise ValidationError(f"{gen.method} generator has no spectrum")
    lam = gen.eigenvalues
    share = np.cumsum(lam) / lam.sum()
    table = np.column_stack([np.arange(1, lam.size + 1), lam, share])
    np.savetxt(path, table, fmt=["%d", "%.17g", "%.17g"],
               header=f"method={gen.method} total_variance={gen.total_variance!r}\nindex eigenvalue cumulative_share")
