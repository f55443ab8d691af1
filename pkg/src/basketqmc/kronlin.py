"""Structured linear algebra for Brownian-type covariances.

Boomerang matrices ``R[l, m] = t[min(l, m)]`` and their closed-form inverse
and Cholesky factors, Kronecker products and their spectra, the block
Cholesky factorization of block-boomerang covariances and the one-sided
nearest-Kronecker fit ``min_K ||Sigma - R kron K||_F``.

Grids are passed as anything ``numpy.asarray`` accepts (a ``TimeGrid`` or a
plain sequence of strictly increasing positive times).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import FactorizationError, ValidationError

log = logging.getLogger(__name__)

CLAMP_RELATIVE = 1e-12
DEGENERATE_RELATIVE = 1e-10
KPA_FLOOR_RELATIVE = 1e-10


def _times(grid) -> np.ndarray:
    t = np.asarray(grid, dtype=float).ravel()
    if t.size == 0:
        raise ValidationError("time grid is empty")
    if t[0] <= 0:
        raise ValidationError(f"time grid must start above 0, got t_1={t[0]}")
    if np.any(np.diff(t) <= 0):
        raise ValidationError("time grid must be strictly increasing")
    return t


def increments(grid) -> np.ndarray:
    """``t_i - t_{i-1}`` with ``t_0 = 0``."""
    t = _times(grid)
    return np.diff(t, prepend=0.0)


# ---------------------------------------------------------------------------
# Boomerang matrices
# ---------------------------------------------------------------------------


def build_boomerang(grid) -> np.ndarray:
    t = _times(grid)
    return np.minimum.outer(t, t)


def boomerang_cholesky(grid) -> np.ndarray:
    """Lower factor of the boomerang matrix: column ``k`` is ``sqrt(t_k - t_{k-1})`` from row ``k`` down."""
    root = np.sqrt(increments(grid))
    n = root.size
    return np.tril(np.broadcast_to(root, (n, n)))


def boomerang_cholesky_inverse(grid) -> np.ndarray:
    """Bi-diagonal inverse of :func:`boomerang_cholesky` (a scaled first-difference operator)."""
    inv_root = 1.0 / np.sqrt(increments(grid))
    out = np.diag(inv_root)
    idx = np.arange(1, inv_root.size)
    out[idx, idx - 1] = -inv_root[1:]
    return out


def boomerang_inverse(grid) -> np.ndarray:
    """Tri-diagonal inverse of the boomerang matrix."""
    inv_dt = 1.0 / increments(grid)
    n = inv_dt.size
    diag = inv_dt.copy()
    diag[:-1] += inv_dt[1:]
    out = np.diag(diag)
    idx = np.arange(n - 1)
    out[idx, idx + 1] = -inv_dt[1:]
    out[idx + 1, idx] = -inv_dt[1:]
    return out


def boomerang_trace_product(a_diag, b_diag) -> float:
    """``tr(A B)`` for two boomerang-shaped matrices given only their diagonals."""
    a = np.asarray(a_diag, dtype=float)
    b = np.asarray(b_diag, dtype=float)
    n = a.shape[0]
    mult = 2.0 * (n - np.arange(1, n + 1)) + 1.0
    return float(np.tensordot(mult, a * b, axes=(0, 0)))


def boomerang_square_trace(grid) -> float:
    """``tr(R R^T) = sum_j (2(N - j) + 1) t_j^2``."""
    t = _times(grid)
    return boomerang_trace_product(t, t)


# ---------------------------------------------------------------------------
# Kronecker algebra and spectra
# ---------------------------------------------------------------------------


def kron(a, b) -> np.ndarray:
    """Kronecker product: block ``(i, j)`` of the result is ``a[i, j] * b``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    (ma, na), (mb, nb) = a.shape, b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(ma * mb, na * nb)


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in decreasing order and matching orthonormal eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def size(self) -> int:
        return self.values.size

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T

    def factor(self, columns: int | None = None) -> np.ndarray:
        """``E Lambda^{1/2}`` restricted to the leading ``columns`` columns."""
        k = self.size if columns is None else columns
        return self.vectors[:, :k] * np.sqrt(np.clip(self.values[:k], 0.0, None))


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude component positive; first such index on ties
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _canonical_basis(block: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(block): project unit vectors in index order, Gram-Schmidt."""
    n, k = block.shape
    basis = []
    for i in range(n):
        v = block @ block[i]  # projection of e_i onto the subspace
        for q in basis:
            v = v - (q @ v) * q
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            basis.append(v / norm)
            if len(basis) == k:
                break
    return np.column_stack(basis)


def sym_eigen(s) -> EigenDecomposition:
    """Eigen-decomposition of a symmetric matrix, sorted decreasing, with reproducible vectors.

    The input is symmetrized first. Eigenvalues within ``1e-12 * lambda_max`` of
    zero from below are clamped to 0. Clusters of equal eigenvalues get a
    canonical basis and every vector is signed so its largest entry is positive.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValidationError(f"sym_eigen needs a square matrix, got shape {s.shape}")
    s = 0.5 * (s + s.T)
    try:
        values, vectors = np.linalg.eigh(s)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(
            f"symmetric eigensolver did not converge for a {s.shape[0]}x{s.shape[0]} matrix "
            f"(max |entry| {np.abs(s).max():.3e})"
        ) from exc
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    top = max(abs(values[0]), 0.0) if values.size else 0.0
    clamp = (values < 0) & (values > -CLAMP_RELATIVE * top)
    values[clamp] = 0.0

    # canonicalize degenerate clusters
    tol = DEGENERATE_RELATIVE * max(top, np.finfo(float).tiny)
    start = 0
    while start < values.size:
        stop = start + 1
        while stop < values.size and values[start] - values[stop] <= tol:
            stop += 1
        if stop - start > 1:
            vectors[:, start:stop] = _canonical_basis(vectors[:, start:stop])
        start = stop
    return EigenDecomposition(values, _fix_signs(vectors))


def kron_eigen(eig_r: EigenDecomposition, eig_s: EigenDecomposition,
               columns: int | None = None) -> EigenDecomposition:
    """Spectrum of ``R kron S`` from the spectra of its factors.

    Eigenvalues are the products ``lambda_i mu_j`` sorted decreasingly (ties by
    ``(i, j)`` order) with eigenvectors ``v_i kron w_j``. ``columns`` limits how
    many eigenvectors are materialized; all eigenvalues are always returned.
    """
    prod = np.outer(eig_r.values, eig_s.values).ravel()
    order = np.argsort(-prod, kind="stable")
    values = prod[order]
    keep = order if columns is None else order[:columns]
    i, j = np.divmod(keep, eig_s.size)
    vr, vs = eig_r.vectors, eig_s.vectors
    vectors = (vr[:, i][:, None, :] * vs[:, j][None, :, :]).reshape(vr.shape[0] * vs.shape[0], keep.size)
    return EigenDecomposition(values, _fix_signs(vectors))


# ---------------------------------------------------------------------------
# Block-boomerang covariance and its Cholesky factor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockCovariance:
    """Covariance with block ``(l, m)`` equal to ``blocks[min(l, m)]``.

    ``blocks`` has shape ``(N, M, M)``: one asset covariance per monitoring time.
    ``kron_factor`` is set when every block is ``t_l`` times one fixed matrix,
    i.e. the full matrix is ``R kron kron_factor``.
    """

    blocks: np.ndarray
    kron_factor: np.ndarray | None = None

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=float)
        if b.ndim != 3 or b.shape[1] != b.shape[2]:
            raise ValidationError(f"blocks must have shape (N, M, M), got {b.shape}")
        object.__setattr__(self, "blocks", b)

    @property
    def n_times(self) -> int:
        return self.blocks.shape[0]

    @property
    def n_assets(self) -> int:
        return self.blocks.shape[1]

    @property
    def size(self) -> int:
        return self.n_times * self.n_assets

    def assemble(self) -> np.ndarray:
        """Dense ``MN x MN`` matrix, asset index fastest."""
        n, m = self.n_times, self.n_assets
        idx = np.minimum.outer(np.arange(n), np.arange(n))
        return self.blocks[idx].transpose(0, 2, 1, 3).reshape(n * m, n * m)

    def trace(self) -> float:
        return float(np.trace(self.blocks, axis1=1, axis2=2).sum())

    def asset_block(self, i: int, k: int) -> np.ndarray:
        """The ``N x N`` boomerang matrix of entry ``(i, k)`` across times."""
        d = self.blocks[:, i, k]
        n = d.size
        return d[np.minimum.outer(np.arange(n), np.arange(n))]


@dataclass(frozen=True)
class BlockCholesky:
    """Lower block-triangular factor with block ``(l, m) = blocks[m]`` for ``l >= m``."""

    blocks: np.ndarray
    increments: np.ndarray

    @property
    def n_times(self) -> int:
        return self.blocks.shape[0]

    @property
    def n_assets(self) -> int:
        return self.blocks.shape[1]

    def assemble(self) -> np.ndarray:
        n, m = self.n_times, self.n_assets
        rows, cols = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        full = np.where((rows >= cols)[:, :, None, None], self.blocks[cols], 0.0)
        return full.transpose(0, 2, 1, 3).reshape(n * m, n * m)

    def apply(self, x) -> np.ndarray:
        """``C @ x`` for ``x`` of shape ``(N*M, ...)`` without assembling ``C``."""
        x = np.asarray(x, dtype=float)
        n, m = self.n_times, self.n_assets
        xb = x.reshape((n, m) + x.shape[1:])
        parts = np.einsum("lik,lk...->li...", self.blocks, xb)
        return np.cumsum(parts, axis=0).reshape(x.shape)


def block_cholesky(cov: BlockCovariance, grid=None) -> BlockCholesky:
    """Cholesky factor of a block-boomerang covariance, one ``M x M`` factorization per time.

    Step ``i`` factors the current top-left block and subtracts its outer
    product from every later block; the off-diagonal blocks of each block
    column repeat the diagonal one, so nothing else needs computing.
    """
    work = cov.blocks.copy()
    n, m = work.shape[0], work.shape[1]
    out = np.empty_like(work)
    for i in range(n):
        top = 0.5 * (work[i] + work[i].T)
        try:
            c = np.linalg.cholesky(top)
        except np.linalg.LinAlgError:
            eig = np.linalg.eigvalsh(top)
            raise FactorizationError(
                f"update block at time index {i} is not positive definite "
                f"(smallest eigenvalue {eig[0]:.3e})", index=i
            ) from None
        out[i] = c
        if i + 1 < n:
            work[i + 1:] -= c @ c.T
    if grid is not None:
        dt = increments(grid)
        if dt.size != n:
            raise ValidationError(f"grid has {dt.size} times, covariance has {n}")
    else:
        dt = np.full(n, np.nan)
    return BlockCholesky(out, dt)


# ---------------------------------------------------------------------------
# Nearest Kronecker product with a fixed boomerang factor
# ---------------------------------------------------------------------------


def kpa_fit(cov: BlockCovariance, grid) -> np.ndarray:
    """Symmetric ``K`` minimizing ``||Sigma_MN - R kron K||_F`` for the boomerang ``R`` of ``grid``.

    Each entry is a ratio of boomerang traces, so only block diagonals are read.
    """
    t = _times(grid)
    if t.size != cov.n_times:
        raise ValidationError(f"grid has {t.size} times, covariance has {cov.n_times}")
    n = t.size
    mult = 2.0 * (n - np.arange(1, n + 1)) + 1.0
    numer = np.einsum("l,lik->ik", mult * t, cov.blocks)
    k = numer / boomerang_square_trace(t)
    return 0.5 * (k + k.T)


def ensure_positive_definite(k, floor_relative: float = KPA_FLOOR_RELATIVE):
    """Return ``(K', floored)``; eigenvalues of ``K`` at or below zero are raised to ``floor * lambda_max``."""
    k = np.asarray(k, dtype=float)
    vals, vecs = np.linalg.eigh(0.5 * (k + k.T))
    if vals[-1] <= 0:
        raise FactorizationError("fitted asset covariance has no positive eigenvalue")
    if vals[0] > 0:
        return k, False
    floor = floor_relative * vals[-1]
    log.warning("fitted asset covariance not positive definite (min eigenvalue %.3e); flooring at %.3e",
                vals[0], floor)
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T, True


def vec(x) -> np.ndarray:
    """Stack the columns of a matrix into one vector."""
    return np.asarray(x).reshape(-1, order="F")
