"""Uniform point sources on the unit hypercube.

Pseudorandom draws, Latin Hypercube Sampling, base-2 Sobol' sequences with
random linear (Faure-Tezuka style) digit scrambling, and Latin Supercube
concatenation of low-dimensional randomized blocks.

All point sets are ``(n, d)`` float64 arrays with entries in ``[0, 1)``.
Randomized sources take a ``seed`` which may be an int, a
``numpy.random.SeedSequence`` or an existing ``numpy.random.Generator``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DomainError, UnsupportedDimensionError, ValidationError

DEFAULT_DIGITS = 32
DIRECTION_FILE = os.path.join(os.path.dirname(__file__), "data", "sobol_directions.txt")

SeedLike = Union[None, int, np.random.SeedSequence, np.random.Generator]


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# Van der Corput
# ---------------------------------------------------------------------------


def radical_inverse(n: int, b: int = 2) -> float:
    """Base-``b`` radical inverse: mirror the base-``b`` digits of ``n`` about the radix point."""
    if b < 2:
        raise DomainError(f"radical inverse needs base >= 2, got {b}")
    if n < 0:
        raise DomainError(f"radical inverse needs a non-negative integer, got {n}")
    n = int(n)
    mirrored, scale = 0, 1
    while n:
        n, digit = divmod(n, b)
        mirrored = mirrored * b + digit
        scale *= b
    return mirrored / scale


def to_digits(x, base: int = 2, digits: int = DEFAULT_DIGITS) -> np.ndarray:
    """Leading ``digits`` base-``base`` digits of each entry of ``x`` in [0, 1).

    Returns an integer array with a trailing axis of length ``digits``; element
    ``[..., k]`` is the digit of weight ``base**-(k+1)``.
    """
    frac = np.array(x, dtype=float)
    if np.any((frac < 0) | (frac >= 1)):
        raise DomainError("digit expansion needs values in [0, 1)")
    out = np.empty(frac.shape + (digits,), dtype=np.int64)
    for k in range(digits):
        frac = frac * base
        d = np.floor(frac)
        out[..., k] = d
        frac = frac - d
    return out


def from_digits(digits, base: int = 2) -> np.ndarray:
    """Inverse of :func:`to_digits` (the digit vector read as a base-``base`` fraction)."""
    digits = np.asarray(digits)
    val = np.zeros(digits.shape[:-1])
    for k in range(digits.shape[-1] - 1, -1, -1):
        val = (val + digits[..., k]) / base
    return val


# ---------------------------------------------------------------------------
# Sobol' parameters and direction numbers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SobolParams:
    """Primitive polynomials and initial direction integers, one entry per dimension.

    ``polynomials[j]`` holds the coefficient bits of the degree-``q`` polynomial
    for dimension ``j + 1``, most significant bit = coefficient of ``x**q``.
    ``initial[j]`` holds the ``q`` odd starting integers ``M_1 .. M_q``.
    """

    polynomials: tuple
    initial: tuple
    digits: int = DEFAULT_DIGITS

    def __post_init__(self):
        object.__setattr__(self, "polynomials", tuple(int(p) for p in self.polynomials))
        object.__setattr__(self, "initial", tuple(tuple(int(v) for v in m) for m in self.initial))
        if len(self.polynomials) < 1 or len(self.polynomials) != len(self.initial):
            raise ValidationError("need one polynomial and one initial-value list per dimension")
        if not 1 <= self.digits <= 63:
            raise ValidationError("digit count must be in 1..63")
        for j, (poly, m) in enumerate(zip(self.polynomials, self.initial), start=1):
            q = int(poly).bit_length() - 1
            if poly < 1 or not poly & 1:
                raise ValidationError(f"dimension {j}: polynomial must have a constant term")
            if len(m) != q:
                raise ValidationError(f"dimension {j}: expected {q} initial values, got {len(m)}")
            for k, mk in enumerate(m, start=1):
                if mk % 2 == 0 or not 1 <= mk < 2**k:
                    raise ValidationError(f"dimension {j}: M_{k}={mk} must be odd and below 2^{k}")

    @property
    def dimension_count(self) -> int:
        return len(self.polynomials)

    def degree(self, dimension: int) -> int:
        return int(self.polynomials[dimension - 1]).bit_length() - 1


def load_sobol_params(path: str | None = None, digits: int = DEFAULT_DIGITS) -> SobolParams:
    """Read a direction-number file.

    One line per dimension, whitespace separated::

        d q P M_1 ... M_q

    ``d`` is the 1-based dimension, ``q`` the polynomial degree, ``P`` the
    ``q + 1`` coefficient bits of the primitive polynomial written from
    ``x**q`` down to ``x**0`` (so ``1011`` is ``x^3 + x + 1``) and the
    ``M_k`` are the odd initial integers. Degree 0 lines carry no ``M``
    values (the sequence is then ``M_k = 1`` for all ``k``). Lines starting
    with ``#`` and blank lines are ignored. Dimensions must appear in order.
    """
    path = path or DIRECTION_FILE
    polys, inits = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            try:
                d, q, bits = int(fields[0]), int(fields[1]), fields[2]
                m = tuple(int(v) for v in fields[3:])
                poly = int(bits, 2)
            except (IndexError, ValueError) as exc:
                raise ValidationError(f"{path}:{lineno}: malformed line {raw.strip()!r}") from exc
            if d != len(polys) + 1:
                raise ValidationError(f"{path}:{lineno}: expected dimension {len(polys) + 1}, got {d}")
            if len(bits) != q + 1 or poly.bit_length() - 1 != q:
                raise ValidationError(f"{path}:{lineno}: polynomial {bits} does not have degree {q}")
            polys.append(poly)
            inits.append(m)
    return SobolParams(tuple(polys), tuple(inits), digits)


@lru_cache(maxsize=None)
def default_sobol_params() -> SobolParams:
    return load_sobol_params()


def direction_integers(params: SobolParams, dimension: int) -> list:
    """The integers ``M_1 .. M_w`` for a 1-based ``dimension``, extended by the XOR recurrence."""
    if not 1 <= dimension <= params.dimension_count:
        raise UnsupportedDimensionError(
            f"dimension {dimension} outside 1..{params.dimension_count}"
        )
    poly = int(params.polynomials[dimension - 1])
    q = poly.bit_length() - 1
    w = params.digits
    if q == 0:
        return [1] * w
    a = [(poly >> (q - i)) & 1 for i in range(1, q)]  # a_1 .. a_{q-1}
    m = list(params.initial[dimension - 1])
    for k in range(q, w):
        new = (m[k - q] << q) ^ m[k - q]
        for i in range(1, q):
            if a[i - 1]:
                new ^= m[k - i] << i
        m.append(new)
    return m[:w]


def sobol_direction_numbers(params: SobolParams, dimension: int) -> np.ndarray:
    """Direction numbers ``V_k = M_k / 2**k`` for ``k = 1 .. w`` (1-based ``dimension``)."""
    m = direction_integers(params, dimension)
    return np.array([mk / 2.0 ** (k + 1) for k, mk in enumerate(m)])


def _int_dtype(w: int):
    return np.uint32 if w <= 32 else np.uint64


@lru_cache(maxsize=64)
def _direction_table(params: SobolParams, d: int) -> np.ndarray:
    """``(d, w)`` table of ``V_k`` scaled to w-bit integers."""
    if d > params.dimension_count:
        raise UnsupportedDimensionError(
            f"requested {d} Sobol' dimensions, only {params.dimension_count} available"
        )
    w = params.digits
    table = np.empty((d, w), dtype=_int_dtype(w))
    for j in range(d):
        m = direction_integers(params, j + 1)
        table[j] = [mk << (w - k - 1) for k, mk in enumerate(m)]
    table.setflags(write=False)
    return table


def _gray_walk(table: np.ndarray, start: int, n: int) -> np.ndarray:
    """Integer Sobol' points for indices ``start .. start+n-1`` via Gray-code stepping."""
    d, w = table.shape
    if start < 0 or n < 0:
        raise ValidationError("start index and count must be non-negative")
    if start + n > 2**w:
        raise ValidationError(f"indices up to {start + n - 1} do not fit in {w} bits")
    out = np.zeros((n, d), dtype=table.dtype)
    if n == 0:
        return out
    gray = start ^ (start >> 1)
    first = np.zeros(d, dtype=table.dtype)
    for k in range(w):
        if (gray >> k) & 1:
            first ^= table[:, k]
    out[0] = first
    if n > 1:
        i = np.arange(start, start + n - 1, dtype=np.int64)
        lowest_zero = (~i) & (i + 1)
        pos = np.frexp(lowest_zero.astype(float))[1] - 1  # 0-based bit index
        out[1:] = table[:, pos].T
        np.bitwise_xor.accumulate(out, axis=0, out=out)
    return out


def sobol_points(params: SobolParams, start_index: int, n: int, d: int) -> np.ndarray:
    """``n`` consecutive ``d``-dimensional Sobol' points starting at ``start_index``."""
    table = _direction_table(params, d)
    ints = _gray_walk(table, start_index, n)
    return ints / float(2**params.digits)


# ---------------------------------------------------------------------------
# Scrambling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScrambleSpec:
    """Per-dimension lower-triangular digit matrices and digit shifts (mod ``base``).

    ``lower`` has shape ``(d, w, w)`` and ``shift`` shape ``(d, w)``; row/column
    ``k`` of a matrix refers to the digit of weight ``base**-(k+1)``.
    """

    lower: np.ndarray
    shift: np.ndarray
    base: int = 2

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.int64)
        shift = np.asarray(self.shift, dtype=np.int64)
        if lower.ndim != 3 or lower.shape[1] != lower.shape[2]:
            raise ValidationError("scramble matrices must have shape (d, w, w)")
        if shift.shape != lower.shape[:2]:
            raise ValidationError("shift vectors must have shape (d, w)")
        if self.base < 2:
            raise DomainError("scramble base must be >= 2")
        if np.any(np.triu(lower, 1)):
            raise ValidationError("scramble matrices must be lower triangular")
        if np.any((lower < 0) | (lower >= self.base)) or np.any((shift < 0) | (shift >= self.base)):
            raise ValidationError("scramble entries must be digits in 0..base-1")
        if np.any(np.diagonal(lower, axis1=1, axis2=2) == 0):
            raise ValidationError("scramble matrices need a nonzero diagonal")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "shift", shift)

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    @property
    def digits(self) -> int:
        return self.lower.shape[1]

    @classmethod
    def identity(cls, d: int, digits: int = DEFAULT_DIGITS, base: int = 2) -> "ScrambleSpec":
        eye = np.broadcast_to(np.eye(digits, dtype=np.int64), (d, digits, digits)).copy()
        return cls(eye, np.zeros((d, digits), dtype=np.int64), base)

    def column_masks(self) -> np.ndarray:
        """Base-2 only: column ``c`` of each matrix packed into a w-bit integer, shape ``(d, w)``."""
        if self.base != 2:
            raise ValidationError("bit masks exist only for base 2")
        w = self.digits
        weights = (1 << np.arange(w - 1, -1, -1, dtype=np.uint64)).astype(np.uint64)
        masks = np.einsum("jrc,r->jc", self.lower.astype(np.uint64), weights)
        return masks.astype(_int_dtype(w))

    def shift_bits(self) -> np.ndarray:
        """Base-2 only: each shift vector packed into a w-bit integer, shape ``(d,)``."""
        if self.base != 2:
            raise ValidationError("bit masks exist only for base 2")
        w = self.digits
        weights = (1 << np.arange(w - 1, -1, -1, dtype=np.uint64)).astype(np.uint64)
        return (self.shift.astype(np.uint64) @ weights).astype(_int_dtype(w))


def random_scramble(d: int, seed: SeedLike = None, digits: int = DEFAULT_DIGITS, base: int = 2) -> ScrambleSpec:
    """Draw uniform random scramble parameters: diagonal in 1..b-1, other entries and shifts in 0..b-1."""
    rng = _rng(seed)
    lower = np.tril(rng.integers(0, base, size=(d, digits, digits)), -1)
    idx = np.arange(digits)
    lower[:, idx, idx] = rng.integers(1, base, size=(d, digits))
    shift = rng.integers(0, base, size=(d, digits))
    return ScrambleSpec(lower, shift, base)


def faure_tezuka_scramble(points, spec: ScrambleSpec) -> np.ndarray:
    """Apply ``digits(y) = (L_j digits(x) + e_j) mod b`` to every point, column ``j`` by ``L_j``.

    Works digit-by-digit for any base; truncates to ``spec.digits`` digits.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or x.shape[1] != spec.dimension:
        raise ValidationError(
            f"points have shape {x.shape}, scramble expects {spec.dimension} columns"
        )
    psi = to_digits(x, spec.base, spec.digits)  # (n, d, w)
    y = (np.einsum("jkc,njc->njk", spec.lower, psi) + spec.shift) % spec.base
    return from_digits(y, spec.base)


def _scramble_ints(values: np.ndarray, masks: np.ndarray, w: int) -> np.ndarray:
    """Base-2 linear scramble of w-bit integers; ``values`` is ``(d, ...)``, ``masks`` is ``(d, w)``."""
    out = np.zeros_like(values)
    one = values.dtype.type(1)
    extra = (slice(None),) + (None,) * (values.ndim - 1)
    for c in range(w):
        bit = (values >> values.dtype.type(w - 1 - c)) & one
        out ^= bit * masks[:, c][extra]
    return out


class ScrambledSobol:
    """A randomized Sobol' point set: one fixed scramble applied to a digital sequence.

    The scramble is folded into the direction integers (the digit map is linear),
    so generation costs the same as the plain Gray-code walk.
    """

    def __init__(self, d: int, seed: SeedLike = None, params: SobolParams | None = None,
                 spec: ScrambleSpec | None = None):
        self.params = params or default_sobol_params()
        w = self.params.digits
        self.spec = spec if spec is not None else random_scramble(d, seed, w)
        if self.spec.dimension != d or self.spec.digits != w or self.spec.base != 2:
            raise ValidationError("scramble spec does not match dimension/digit count")
        table = _direction_table(self.params, d)
        self.table = _scramble_ints(table, self.spec.column_masks(), w)
        self.shift = self.spec.shift_bits()
        self.d = d

    def integers(self, start: int, n: int) -> np.ndarray:
        return _gray_walk(self.table, start, n) ^ self.shift

    def points(self, start: int, n: int, centered: bool = False) -> np.ndarray:
        """Points as floats; ``centered`` moves each into the middle of its w-digit cell, keeping it off 0."""
        ints = self.integers(start, n).astype(float)
        if centered:
            ints += 0.5
        return ints / float(2**self.params.digits)


# ---------------------------------------------------------------------------
# Stratified and pseudorandom sources
# ---------------------------------------------------------------------------


def _open_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    # midpoints of the 2^-53 lattice: uniform, never exactly 0
    return (rng.integers(0, 2**53, size=shape, dtype=np.int64) + 0.5) * 2.0**-53


_BELOW_ONE = np.nextafter(1.0, 0.0)


def pseudorandom_points(n: int, d: int, seed: SeedLike = None) -> np.ndarray:
    """Independent uniforms in (0, 1), reproducible for a fixed seed."""
    if n < 0 or d < 0:
        raise ValidationError("point count and dimension must be non-negative")
    return _open_uniform(_rng(seed), (n, d))


def lhs_points(n: int, d: int, seed: SeedLike = None) -> np.ndarray:
    """Latin Hypercube sample: ``(U + pi_k(j) - 1) / n`` with one random permutation per column."""
    if n < 1:
        raise ValidationError(f"LHS needs at least one point, got n={n}")
    if d < 0:
        raise ValidationError("dimension must be non-negative")
    rng = _rng(seed)
    jitter = _open_uniform(rng, (n, d))
    strata = rng.permuted(np.tile(np.arange(n, dtype=float), (d, 1)), axis=1).T
    return np.minimum((jitter + strata) / n, _BELOW_ONE)


BlockSource = Union[np.ndarray, Callable[[int, np.random.Generator], np.ndarray]]


def lss_points(block_dims: Sequence[int], n: int, sources: Sequence[BlockSource],
               seed: SeedLike = None, d: int | None = None) -> np.ndarray:
    """Latin Supercube sample: concatenate blocks after an independent run-order permutation of each.

    ``sources[r]`` is either an ``(n, block_dims[r])`` array or a callable
    ``(n, rng) -> array`` producing one.
    """
    dims = [int(s) for s in block_dims]
    if not dims or any(s < 1 for s in dims):
        raise ValidationError("block dimensions must be positive")
    if d is not None and sum(dims) != d:
        raise ValidationError(f"block dimensions sum to {sum(dims)}, expected {d}")
    if len(sources) != len(dims):
        raise ValidationError("need exactly one source per block")
    rng = _rng(seed)
    out = np.empty((n, sum(dims)))
    col = 0
    for s, src in zip(dims, sources):
        block = src(n, rng) if callable(src) else np.asarray(src, dtype=float)
        if block.shape != (n, s):
            raise ValidationError(f"block source returned shape {block.shape}, expected {(n, s)}")
        out[:, col:col + s] = block[rng.permutation(n)]
        col += s
    return out


# ---------------------------------------------------------------------------
# Samplers used by the pricer
# ---------------------------------------------------------------------------


class Sampler:
    """Produces ``(n, dimension)`` uniforms in (0, 1); all randomness comes from ``rng``."""

    name = "base"

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ValidationError("sampler dimension must be positive")
        self.dimension = dimension

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dimension={self.dimension})"


class PseudoRandomSampler(Sampler):
    name = "mc"

    def draw(self, n, rng):
        return pseudorandom_points(n, self.dimension, rng)


class LatinHypercubeSampler(Sampler):
    name = "lhs"

    def draw(self, n, rng):
        return lhs_points(n, self.dimension, rng)


class ScrambledSobolSampler(Sampler):
    """Fresh scramble per draw; indices ``1 .. n`` (the origin is skipped)."""

    name = "rqmc"

    def __init__(self, dimension: int, params: SobolParams | None = None):
        super().__init__(dimension)
        self.params = params or default_sobol_params()
        if dimension > self.params.dimension_count:
            raise UnsupportedDimensionError(
                f"{dimension} dimensions requested, direction table has {self.params.dimension_count}"
            )

    def draw(self, n, rng):
        return ScrambledSobol(self.dimension, rng, self.params).points(1, n, centered=True)


class LatinSupercubeSampler(Sampler):
    """Scrambled Sobol' blocks of ``block`` dimensions (last block may be shorter), LSS-combined."""

    name = "lss"

    def __init__(self, dimension: int, block: int = 50, params: SobolParams | None = None):
        super().__init__(dimension)
        if block < 1:
            raise ValidationError("LSS block size must be positive")
        full, rest = divmod(dimension, block)
        self.blocks = [block] * full + ([rest] if rest else [])
        self.inner = {s: ScrambledSobolSampler(s, params) for s in set(self.blocks)}

    def draw(self, n, rng):
        sources = [self.inner[s].draw for s in self.blocks]
        return lss_points(self.blocks, n, sources, rng, self.dimension)


SAMPLERS = ("mc", "lhs", "rqmc", "lss")


def make_sampler(kind: str, dimension: int, *, max_single_block: int = 20, lss_block: int = 50,
                 params: SobolParams | None = None) -> Sampler:
    """Sampler for ``kind``; ``rqmc`` switches to LSS blocks once ``dimension > max_single_block``."""
    kind = kind.lower()
    if kind == "mc":
        return PseudoRandomSampler(dimension)
    if kind == "lhs":
        return LatinHypercubeSampler(dimension)
    if kind == "rqmc":
        if dimension <= max_single_block:
            return ScrambledSobolSampler(dimension, params)
        return LatinSupercubeSampler(dimension, lss_block, params)
    if kind == "lss":
        return LatinSupercubeSampler(dimension, lss_block, params)
    raise ValidationError(f"unknown sampler {kind!r}; choose from {', '.join(SAMPLERS)}")
