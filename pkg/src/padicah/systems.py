"""Orthonormal function systems attached to a branching sequence.

Three families, all constant on cells and evaluated exactly:

* the generalized Haar system: flat index n >= 1 decodes to a rank k,
  a support cell r, and a frequency s; the function is
  sqrt(m_k) * exp(2*pi*i * x_{k+1} * s / p_{k+1}) on its support cell
  and zero elsewhere, with chi_0 identically one;
* the classical dyadic Haar system in two-index form (k, i), kept for
  the numbering bridge to the generalized system when every p equals 2;
* the Price system: psi_k(x) = exp(2*pi*i * sum_j alpha_j x_j / p_j)
  where k = sum_j alpha_j m_{j-1} in mixed radix; |psi_k| = 1.

Values are carried as UnitValue objects (sqrt of an integer times a root
of unity with exact rational phase) so that products of system values and
exact coefficients never round until the final conversion to a number.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iter_product
from math import isqrt, sqrt

import numpy as np

from .errors import ConfigMismatch, DepthExhausted
from .grid import BranchSeq, Cell, GridConfig, PointCode
from .parallel import tree_sum
from .stepfn import StepFunction, common_refinement

_HALF = Fraction(1, 2)


@dataclass(frozen=True)
class UnitValue:
    """sqrt(radicand) times a root of unity, tracked exactly.

    ``radicand`` is a nonnegative integer (0 encodes the zero value) and
    ``phase`` is in turns, normalized to [0, 1).  Multiplication multiplies
    radicands and adds phases mod 1, so products of system values stay
    exact; conversion to an ordinary number happens once, at the end.
    """

    radicand: int
    phase: Fraction = Fraction(0)

    def __post_init__(self):
        if self.radicand < 0:
            raise ValueError(f"radicand must be nonnegative, got {self.radicand}")
        phase = Fraction(self.phase) % 1 if self.radicand else Fraction(0)
        object.__setattr__(self, "phase", phase)

    @property
    def is_zero(self) -> bool:
        return self.radicand == 0

    @property
    def abs_sq(self) -> int:
        return self.radicand

    def __mul__(self, other: "UnitValue") -> "UnitValue":
        return UnitValue(self.radicand * other.radicand, self.phase + other.phase)

    def conjugate(self) -> "UnitValue":
        return UnitValue(self.radicand, -self.phase)

    def as_number(self):
        """Exact int/Fraction when the phase is 0 or 1/2 and the radicand
        is a perfect square; a float/complex otherwise."""
        if self.radicand == 0:
            return 0
        root = isqrt(self.radicand)
        exact = root * root == self.radicand
        if self.phase == 0:
            return root if exact else sqrt(self.radicand)
        if self.phase == _HALF:
            return -root if exact else -sqrt(self.radicand)
        mag = root if exact else sqrt(self.radicand)
        return mag * cmath.exp(2j * cmath.pi * float(self.phase))


UnitValue.ZERO = UnitValue(0)
UnitValue.ONE = UnitValue(1)


# ---------------------------------------------------------------------------
# index codecs


def haar_decode(seq: BranchSeq, n: int) -> tuple[int, int, int]:
    """Flat index n >= 1 -> (k, r, s): rank, support cell, frequency.

    Inverse of ``haar_encode``; the block of rank k+1 spans flat indices
    [m_k, m_{k+1}), laid out as n = m_k + r*(p_{k+1} - 1) + s - 1 with
    0 <= r < m_k and 1 <= s < p_{k+1}.
    """
    if n < 1:
        raise ValueError(f"flat index must be >= 1 (0 is the constant), got {n}")
    mods = seq.moduli
    for k in range(seq.depth):
        if mods[k] <= n < mods[k + 1]:
            rem = n - mods[k]
            width = seq.factor(k + 1) - 1
            return k, rem // width, rem % width + 1
    raise DepthExhausted(f"flat index {n} needs rank beyond depth {seq.depth}")


def haar_encode(seq: BranchSeq, k: int, r: int, s: int) -> int:
    m_k = seq.modulus(k)
    p = seq.factor(k + 1)
    if not 0 <= r < m_k:
        raise ValueError(f"support index r={r} outside [0, {m_k})")
    if not 1 <= s < p:
        raise ValueError(f"frequency s={s} outside [1, {p})")
    return m_k + r * (p - 1) + s - 1


def block_of_index(seq: BranchSeq, n: int) -> int:
    """Block rank of a flat index: 0 for n=0, else t with m_{t-1} <= n < m_t."""
    if n < 0:
        raise ValueError(f"flat index must be nonnegative, got {n}")
    if n == 0:
        return 0
    for t in range(1, seq.depth + 1):
        if seq.moduli[t - 1] <= n < seq.moduli[t]:
            return t
    raise DepthExhausted(f"flat index {n} needs rank beyond depth {seq.depth}")


def classical_to_flat(k: int, i: int) -> int:
    """Two-index dyadic Haar (k, i) -> generalized flat index.

    chi_k^(i) (1 <= i <= 2^k) is the generalized function with rank k,
    support cell i-1, frequency 1; its flat index is 2^k + i - 1.
    """
    if k < 0 or not 1 <= i <= 2 ** k:
        raise ValueError(f"two-index pair ({k}, {i}) out of range")
    return 2 ** k + i - 1


def classical_from_flat(n: int) -> tuple[int, int]:
    if n < 1:
        raise ValueError(f"flat index must be >= 1, got {n}")
    k = n.bit_length() - 1
    return k, n - 2 ** k + 1


def price_digits(seq: BranchSeq, k: int) -> tuple[int, ...]:
    """Mixed-radix digits (alpha_1, ..., alpha_t) of k = sum alpha_j m_{j-1},
    trimmed so the last digit is nonzero (empty for k = 0)."""
    if k < 0:
        raise ValueError(f"Price index must be nonnegative, got {k}")
    if k >= seq.modulus(seq.depth):
        raise DepthExhausted(f"Price index {k} needs rank beyond depth {seq.depth}")
    digits = []
    rest = k
    for j in range(seq.depth):
        rest, a = divmod(rest, seq.factor(j + 1))
        digits.append(a)
    while digits and digits[-1] == 0:
        digits.pop()
    return tuple(digits)


def price_encode(seq: BranchSeq, digits) -> int:
    k = 0
    for j, a in enumerate(digits):
        p = seq.factor(j + 1)
        if not 0 <= a < p:
            raise ValueError(f"digit alpha_{j + 1} = {a} outside [0, {p})")
        k += a * seq.modulus(j)
    return k


# ---------------------------------------------------------------------------
# point evaluation


def _digits_1d(pt) -> tuple[int, ...]:
    if isinstance(pt, PointCode):
        if pt.dim != 1:
            raise ConfigMismatch(f"expected a 1-D point, got {pt.dim} dimensions")
        return pt.digits[0]
    return tuple(pt)


def gen_haar_eval(seq: BranchSeq, n: int, pt) -> UnitValue:
    """Generalized Haar chi_n at a point given by its digit string.

    Needs at least k+1 digits, where k is the rank of index n; chi_0 is
    identically one.
    """
    digits = _digits_1d(pt)
    if n == 0:
        return UnitValue.ONE
    k, r, s = haar_decode(seq, n)
    if len(digits) < k + 1:
        raise DepthExhausted(f"index {n} needs {k + 1} digits, point has {len(digits)}")
    prefix = 0
    for i in range(k):
        prefix = prefix * seq.factor(i + 1) + digits[i]
    if prefix != r:
        return UnitValue.ZERO
    p = seq.factor(k + 1)
    return UnitValue(seq.modulus(k), Fraction(digits[k] * s, p))


def classical_haar_eval(k: int, i: int, pt) -> UnitValue:
    """Two-index dyadic Haar function chi_k^(i) at a binary digit string.

    +sqrt(2^k) on the left half of [(i-1)/2^k, i/2^k), -sqrt(2^k) on the
    right half, zero outside.
    """
    digits = _digits_1d(pt)
    if k < 0 or not 1 <= i <= 2 ** k:
        raise ValueError(f"two-index pair ({k}, {i}) out of range")
    if len(digits) < k + 1:
        raise DepthExhausted(f"pair ({k}, {i}) needs {k + 1} digits, point has {len(digits)}")
    if any(d not in (0, 1) for d in digits):
        raise ValueError("classical Haar needs binary digits")
    prefix = 0
    for b in digits[:k]:
        prefix = prefix * 2 + b
    if prefix != i - 1:
        return UnitValue.ZERO
    return UnitValue(2 ** k, Fraction(digits[k], 2))


def price_eval(seq: BranchSeq, k: int, pt) -> UnitValue:
    """Price function psi_k at a point: unit modulus, exact phase."""
    digits = _digits_1d(pt)
    alphas = price_digits(seq, k)
    if len(digits) < len(alphas):
        raise DepthExhausted(
            f"Price index {k} needs {len(alphas)} digits, point has {len(digits)}"
        )
    phase = Fraction(0)
    for j, a in enumerate(alphas):
        phase += Fraction(a * digits[j], seq.factor(j + 1))
    return UnitValue(1, phase)


# cell-prefix evaluation: value on a rank-`rank` cell by its flat index


def gen_haar_on_cell(seq: BranchSeq, n: int, rank: int, index: int) -> UnitValue:
    if n == 0:
        return UnitValue.ONE
    k, r, s = haar_decode(seq, n)
    if rank < k + 1:
        raise DepthExhausted(f"index {n} is not constant on rank-{rank} cells")
    ratio = seq.modulus(rank) // seq.modulus(k)
    if index // ratio != r:
        return UnitValue.ZERO
    p = seq.factor(k + 1)
    digit = (index // (seq.modulus(rank) // seq.modulus(k + 1))) % p
    return UnitValue(seq.modulus(k), Fraction(digit * s, p))


def price_on_cell(seq: BranchSeq, k: int, rank: int, index: int) -> UnitValue:
    alphas = price_digits(seq, k)
    if rank < len(alphas):
        raise DepthExhausted(f"Price index {k} is not constant on rank-{rank} cells")
    phase = Fraction(0)
    m_rank = seq.modulus(rank)
    for j, a in enumerate(alphas):
        digit = (index // (m_rank // seq.modulus(j + 1))) % seq.factor(j + 1)
        phase += Fraction(a * digit, seq.factor(j + 1))
    return UnitValue(1, phase)


# ---------------------------------------------------------------------------
# tensor step functions and inner products


def haar_rank_vec(cfg: GridConfig, nvec) -> tuple[int, ...]:
    """Per-dimension constancy ranks (k_j + 1, or 0 for the constant)."""
    out = []
    for j, n in enumerate(nvec):
        out.append(0 if n == 0 else haar_decode(cfg.seqs[j], n)[0] + 1)
    return tuple(out)


def tensor_haar_step(cfg: GridConfig, nvec) -> StepFunction:
    """chi_{n_1} x ... x chi_{n_d} as an exact step function.

    Lives on the product grid whose dimension-j rank is k_j + 1 (0 for
    n_j = 0); values are UnitValue products converted once.
    """
    nvec = tuple(nvec)
    if len(nvec) != cfg.dim:
        raise ConfigMismatch(f"index has {len(nvec)} entries, grid has {cfg.dim} dims")
    ranks = haar_rank_vec(cfg, nvec)
    per_dim = [
        [gen_haar_on_cell(cfg.seqs[j], nvec[j], ranks[j], i)
         for i in range(cfg.seqs[j].modulus(ranks[j]))]
        for j in range(cfg.dim)
    ]
    return _tensor_step(cfg, ranks, per_dim)


def price_rank_vec(cfg: GridConfig, kvec) -> tuple[int, ...]:
    return tuple(len(price_digits(cfg.seqs[j], k)) for j, k in enumerate(kvec))


def tensor_price_step(cfg: GridConfig, kvec) -> StepFunction:
    """psi_{k_1} x ... x psi_{k_d} as an exact step function."""
    kvec = tuple(kvec)
    if len(kvec) != cfg.dim:
        raise ConfigMismatch(f"index has {len(kvec)} entries, grid has {cfg.dim} dims")
    ranks = price_rank_vec(cfg, kvec)
    per_dim = [
        [price_on_cell(cfg.seqs[j], kvec[j], ranks[j], i)
         for i in range(cfg.seqs[j].modulus(ranks[j]))]
        for j in range(cfg.dim)
    ]
    return _tensor_step(cfg, ranks, per_dim)


def _tensor_step(cfg: GridConfig, ranks, per_dim) -> StepFunction:
    values = []
    for combo in _lex_products(per_dim):
        values.append(combo.as_number())
    return StepFunction.on_grid(cfg, ranks, values)


def _lex_products(per_dim):
    if len(per_dim) == 1:
        yield from per_dim[0]
        return
    for uvs in iter_product(*per_dim):
        total = uvs[0]
        for uv in uvs[1:]:
            total = total * uv
        yield total


def _conj(v):
    return v.conjugate() if isinstance(v, complex) else v


def inner_product(f: StepFunction, g: StepFunction, threads: int = 1):
    """<f, g> = integral of f * conj(g), summed over a fixed reduction tree."""
    cfg = f.cfg
    terms = [
        a * _conj(b) * c.measure(cfg) for c, a, b in common_refinement(f, g)
    ]
    return tree_sum(terms, zero=0, threads=threads)


# ---------------------------------------------------------------------------
# block change-of-basis matrices


def block_range(seq: BranchSeq, block_rank: int) -> range:
    """Flat indices of one block: {0} for rank 0, [m_{t-1}, m_t) for t >= 1."""
    if block_rank == 0:
        return range(0, 1)
    return range(seq.modulus(block_rank - 1), seq.modulus(block_rank))


def price_haar_matrix(seq: BranchSeq, block_rank: int) -> np.ndarray:
    """Change-of-basis matrix G[k][l] = <psi_k, chi_l> within one block.

    Both systems restricted to block t span the same space of step
    functions, so G is unitary; psi_k = sum_l G[k][l] chi_l exactly.
    Entries come from exact-phase sums over the rank-t cells, converted
    to complex once per term.
    """
    if block_rank == 0:
        return np.ones((1, 1), dtype=complex)
    t = block_rank
    idx = block_range(seq, t)
    m_prev, m_t = seq.modulus(t - 1), seq.modulus(t)
    p = seq.factor(t)
    scale = sqrt(m_prev) / m_t
    out = np.zeros((len(idx), len(idx)), dtype=complex)
    for row, k in enumerate(idx):
        for col, l in enumerate(idx):
            _, r, s = haar_decode(seq, l)
            acc = 0j
            for x in range(p):
                cell = r * p + x
                phase = price_on_cell(seq, k, t, cell).phase - Fraction(x * s, p)
                acc += cmath.exp(2j * cmath.pi * float(phase % 1))
            out[row, col] = acc * scale
    return out
