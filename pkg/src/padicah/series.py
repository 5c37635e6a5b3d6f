"""Finitely supported orthogonal series and their additive interval functions.

A CoeffMap assigns coefficients to multi-indices of the generalized Haar
system (mode "haar") or the Price system (mode "price") over one grid.
Partial sums stabilize once the cutoff rank reaches the map's
stabilization rank R, so every integral over a cell is a finite exact
computation; the induced additive function on cells is

    Psi(I) = integral over I of S_N,   for any N >= max(R, rank(I)),

evaluated here entry by entry: the dimension-j factor of one term is zero
when the cell is no finer than the term's rank (the full character sum
cancels), and value * measure otherwise.  Coefficients may be UnitValue
objects, in which case products with system values stay exact until the
final conversion; this is what keeps integer-valued series (values up to
the 2**52 guard) exactly representable.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import product as iter_product
from math import isqrt, prod

from .errors import ConfigMismatch, ValueGuardError
from .grid import Cell, GridConfig, decompose_box, full_cube
from .parallel import tree_sum
from .stepfn import StepFunction, pointwise_max, value_abs
from .systems import (
    UnitValue,
    block_of_index,
    gen_haar_on_cell,
    haar_decode,
    price_digits,
    price_haar_matrix,
    price_on_cell,
)

VALUE_GUARD = 2 ** 52

MODES = ("haar", "price")


def _index_block(cfg: GridConfig, mode: str, nvec) -> int:
    """Stabilization rank of one multi-index: max per-dimension block."""
    if mode == "haar":
        return max(block_of_index(cfg.seqs[j], n) for j, n in enumerate(nvec))
    return max(len(price_digits(cfg.seqs[j], n)) for j, n in enumerate(nvec))


def _coeff_magnitude_bound(value) -> int:
    """Integer upper bound on |value| for the exactness guard."""
    if isinstance(value, UnitValue):
        return isqrt(value.radicand) + 1
    if isinstance(value, (int, Fraction)):
        v = value if value >= 0 else -value
        return int(v) + 1
    return None  # float/complex coefficients are not guarded


class CoeffMap:
    """Finitely supported coefficients over one grid, in one mode."""

    def __init__(self, cfg: GridConfig, entries, mode: str = "haar"):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.cfg = cfg
        self.mode = mode
        cleaned = {}
        for nvec, value in dict(entries).items():
            nvec = tuple(int(n) for n in nvec)
            if len(nvec) != cfg.dim:
                raise ConfigMismatch(
                    f"index {nvec} has {len(nvec)} entries, grid has {cfg.dim} dims"
                )
            _index_block(cfg, mode, nvec)  # validates each index against the depth
            cleaned[nvec] = value
        self._entries = dict(sorted(cleaned.items()))
        self._check_guard()

    def _check_guard(self):
        """Refuse series whose exact values could exceed 2**52.

        Applies when every coefficient is exact; the bound is the worst-case
        partial-sum value sum_n |a_n| * ||chi_n||_inf, over-approximated in
        integer arithmetic.
        """
        total = 0
        for nvec, value in self._entries.items():
            mag = _coeff_magnitude_bound(value)
            if mag is None:
                return
            sup_sq = 1
            for j, n in enumerate(nvec):
                if self.mode == "haar" and n >= 1:
                    sup_sq *= self.cfg.seqs[j].modulus(haar_decode(self.cfg.seqs[j], n)[0])
            total += mag * (isqrt(sup_sq) + 1)
        if total > VALUE_GUARD:
            raise ValueGuardError(
                f"exact series values may reach {total} > 2**52; refuse to build"
            )

    def items(self):
        return self._entries.items()

    def __len__(self):
        return len(self._entries)

    def support(self):
        return tuple(self._entries)

    def get(self, nvec, default=0):
        return self._entries.get(tuple(nvec), default)

    @property
    def stabilization_rank(self) -> int:
        """Smallest N such that the partial sum S_N contains every term."""
        if not self._entries:
            return 0
        return max(_index_block(self.cfg, self.mode, nvec) for nvec in self._entries)

    def __eq__(self, other):
        return (
            isinstance(other, CoeffMap)
            and self.cfg == other.cfg
            and self.mode == other.mode
            and self._entries == other._entries
        )

    def __repr__(self):
        return f"CoeffMap(mode={self.mode!r}, {len(self._entries)} entries)"


def _on_cell(cfg: GridConfig, mode: str, j: int, n: int, rank: int, index: int) -> UnitValue:
    if mode == "haar":
        return gen_haar_on_cell(cfg.seqs[j], n, rank, index)
    return price_on_cell(cfg.seqs[j], n, rank, index)


def _fold(coeff, uv: UnitValue):
    """coeff * uv as a number, exactly when both sides are exact."""
    if isinstance(coeff, UnitValue):
        return (coeff * uv).as_number()
    return coeff * uv.as_number()


def partial_sum(coeffs: CoeffMap, N: int, threads: int = 1) -> StepFunction:
    """S_N on the uniform rank-N partition.

    Includes exactly the terms whose every per-dimension index is below
    that dimension's rank-N modulus; for N >= stabilization_rank this is
    the full sum.
    """
    cfg = coeffs.cfg
    sizes = [cfg.seqs[j].modulus(N) for j in range(cfg.dim)]
    strides = [1] * cfg.dim
    for j in range(cfg.dim - 2, -1, -1):
        strides[j] = strides[j + 1] * sizes[j + 1]
    vals = [0] * prod(sizes)
    for nvec, coeff in coeffs.items():
        if _index_block(cfg, coeffs.mode, nvec) > N:
            continue
        per_dim = []
        for j, n in enumerate(nvec):
            col = []
            for i in range(sizes[j]):
                uv = _on_cell(cfg, coeffs.mode, j, n, N, i)
                if not uv.is_zero:
                    col.append((i, uv))
            per_dim.append(col)
        for combo in iter_product(*per_dim):
            uv = combo[0][1]
            for _, u in combo[1:]:
                uv = uv * u
            flat = sum(i * s for (i, _), s in zip(combo, strides))
            vals[flat] = vals[flat] + _fold(coeff, uv)
    return StepFunction.on_grid(cfg, (N,) * cfg.dim, vals)


# ---------------------------------------------------------------------------
# sparse 1-D partial sums (keeps the deep dyadic example tractable)


def _add_cell_pieces_1d(sf: StepFunction, support: Cell, child_values) -> StepFunction:
    """Add to `sf` a function supported on `support` (1-D, rank k), constant
    on each of its rank-(k+1) children with the given values."""
    cfg = sf.cfg
    seq = cfg.seqs[0]
    k, r = support.ranks[0], support.indices[0]
    p = len(child_values)
    out = []
    for cell, val in zip(sf.cells, sf.values):
        t, idx = cell.ranks[0], cell.indices[0]
        if t <= k:
            ratio = seq.modulus(k) // seq.modulus(t)
            if r // ratio != idx:
                out.append((cell, val))
                continue
            cur_rank, cur_idx = t, idx
            while cur_rank < k:
                pp = seq.factor(cur_rank + 1)
                target = r // (seq.modulus(k) // seq.modulus(cur_rank + 1))
                for x in range(pp):
                    child = cur_idx * pp + x
                    if child != target:
                        out.append((Cell((cur_rank + 1,), (child,)), val))
                cur_rank += 1
                cur_idx = target
            for x in range(p):
                out.append((Cell((k + 1,), (r * p + x,)), val + child_values[x]))
        else:
            ratio = seq.modulus(t) // seq.modulus(k)
            if idx // ratio != r:
                out.append((cell, val))
                continue
            digit = (idx // (seq.modulus(t) // seq.modulus(k + 1))) % p
            out.append((cell, val + child_values[digit]))
    return StepFunction.from_pieces(cfg, out)


def _sparse_bands_1d(coeffs: CoeffMap):
    """Yield (k, S_k) for k = 0..R with S_k as sparse step functions.

    Haar mode, one dimension: each term touches one support cell, so the
    piece count grows linearly in the number of terms instead of with the
    modulus of the deepest rank.
    """
    cfg = coeffs.cfg
    seq = cfg.seqs[0]
    bands = {}
    const = 0
    for (n,), coeff in coeffs.items():
        if n == 0:
            const = const + _fold(coeff, UnitValue.ONE)
        else:
            bands.setdefault(block_of_index(seq, n), []).append((n, coeff))
    current = StepFunction.constant(cfg, const)
    yield 0, current
    for k in range(1, coeffs.stabilization_rank + 1):
        for n, coeff in bands.get(k, ()):
            kk, r, s = haar_decode(seq, n)
            p = seq.factor(kk + 1)
            child_values = [
                _fold(coeff, UnitValue(seq.modulus(kk), Fraction(x * s, p)))
                for x in range(p)
            ]
            current = _add_cell_pieces_1d(current, Cell((kk,), (r,)), child_values)
        yield k, current


def _use_sparse(coeffs: CoeffMap) -> bool:
    return coeffs.cfg.dim == 1 and coeffs.mode == "haar"


def stabilized_sum(coeffs: CoeffMap) -> StepFunction:
    """The full sum S_R, on a sparse partition when one is available."""
    if _use_sparse(coeffs):
        last = StepFunction.constant(coeffs.cfg, 0)
        for _, sf in _sparse_bands_1d(coeffs):
            last = sf
        return last
    return partial_sum(coeffs, coeffs.stabilization_rank)


def series_majorant(coeffs: CoeffMap) -> StepFunction:
    """sup over N of |S_N|: the running maximum of |S_k| for k = 0..R.

    Equals, cell by cell at rank R, the maximum of |Psi(I)| / mu(I) over
    the chain of uniform-rank ancestors I of the cell.
    """
    if _use_sparse(coeffs):
        best = None
        for _, sf in _sparse_bands_1d(coeffs):
            best = sf.abs() if best is None else pointwise_max(best, sf.abs())
        return best
    cfg = coeffs.cfg
    R = coeffs.stabilization_rank
    rank_vec = (R,) * cfg.dim
    best = None
    for k in range(R + 1):
        vals = partial_sum(coeffs, k).uniform_values(rank_vec)
        vals = [value_abs(v) for v in vals]
        if best is None:
            best = vals
        else:
            best = [b if float(b) >= float(v) else v for b, v in zip(best, vals)]
    return StepFunction.on_grid(cfg, rank_vec, best)


# ---------------------------------------------------------------------------
# additive interval functions


class AdditiveFn:
    """Additive function on cells, induced by a series or a density table."""

    def __init__(self, cfg: GridConfig, coeffs: CoeffMap | None = None,
                 density: StepFunction | None = None):
        if (coeffs is None) == (density is None):
            raise ValueError("provide exactly one of coeffs or density")
        self.cfg = cfg
        self.coeffs = coeffs
        self._density = density
        self._majorant = None

    @classmethod
    def from_series(cls, coeffs: CoeffMap) -> "AdditiveFn":
        return cls(coeffs.cfg, coeffs=coeffs)

    @classmethod
    def from_table(cls, cfg: GridConfig, rank: int, values) -> "AdditiveFn":
        """Back the function by explicit rank-R cell densities."""
        density = StepFunction.on_grid(cfg, (rank,) * cfg.dim, values)
        return cls(cfg, density=density)

    @property
    def stabilization_rank(self) -> int:
        if self.coeffs is not None:
            return self.coeffs.stabilization_rank
        return max(self._density.max_ranks())

    def _entry_integral(self, nvec, coeff, box: Cell):
        """Exact integral of one term over a (possibly mixed-rank) cell."""
        cfg = self.cfg
        uv_total = UnitValue.ONE
        mu = Fraction(1)
        mode = self.coeffs.mode
        for j, n in enumerate(nvec):
            seq = cfg.seqs[j]
            t, idx = box.ranks[j], box.indices[j]
            if n == 0:
                mu /= seq.modulus(t)
                continue
            rank_needed = (
                haar_decode(seq, n)[0] + 1 if mode == "haar" else len(price_digits(seq, n))
            )
            if t < rank_needed:
                return 0  # the full character sum over the support cancels
            uv = _on_cell(cfg, mode, j, n, t, idx)
            if uv.is_zero:
                return 0
            uv_total = uv_total * uv
            mu /= seq.modulus(t)
        folded = _fold(coeff, uv_total)
        return folded * mu

    def value_on(self, box: Cell, threads: int = 1):
        """Psi(box): the stabilized integral of the series over the box.

        Uniform boxes are evaluated directly; mixed-rank boxes are summed
        over their uniform decomposition.
        """
        box.validate(self.cfg)
        if self._density is not None:
            return self._density.integral(box, threads=threads)
        if box.uniform_rank is None:
            parts = decompose_box(self.cfg, box)
            return tree_sum(
                [self.value_on(part) for part in parts], zero=Fraction(0), threads=threads
            )
        terms = [
            self._entry_integral(nvec, coeff, box) for nvec, coeff in self.coeffs.items()
        ]
        return tree_sum(terms, zero=Fraction(0), threads=threads)

    def derivative(self) -> StepFunction:
        """The rank-R density: Psi(I)/mu(I) on rank-R cells, as a step function."""
        if self._density is None:
            self._density = stabilized_sum(self.coeffs)
        return self._density

    def majorant(self) -> StepFunction:
        """Psi*(x) = sup_N |S_N(x)| (equivalently the ancestor-ratio maximum)."""
        if self._majorant is None:
            if self.coeffs is not None:
                self._majorant = series_majorant(self.coeffs)
            else:
                self._majorant = self._table_majorant()
        return self._majorant

    def _table_majorant(self) -> StepFunction:
        density = self._density
        cfg = self.cfg
        R = max(density.max_ranks())
        rank_vec = (R,) * cfg.dim
        base = density.uniform_values(rank_vec)
        best = [value_abs(v) for v in base]
        for k in range(R):
            sizes = [cfg.seqs[j].modulus(k) for j in range(cfg.dim)]
            cells = [
                Cell((k,) * cfg.dim, combo)
                for combo in iter_product(*(range(s) for s in sizes))
            ]
            avg = StepFunction.from_pieces(
                cfg,
                [(c, density.integral(c) / c.measure(cfg)) for c in cells],
            )
            vals = avg.uniform_values(rank_vec)
            best = [
                b if float(b) >= float(value_abs(v)) else value_abs(v)
                for b, v in zip(best, vals)
            ]
        return StepFunction.on_grid(cfg, rank_vec, best)


# ---------------------------------------------------------------------------
# basis change between the two systems


def _block_matrices(cfg: GridConfig, block_vec):
    return [price_haar_matrix(cfg.seqs[j], t) for j, t in enumerate(block_vec)]


def _block_indices(cfg: GridConfig, j: int, t: int):
    if t == 0:
        return [0]
    seq = cfg.seqs[j]
    return list(range(seq.modulus(t - 1), seq.modulus(t)))


def price_coeffs_from_haar(coeffs: CoeffMap) -> CoeffMap:
    """Haar-mode map {a_l} -> Price-mode map {b_k}, block by block.

    b_k = sum_l conj(G_1[k1,l1] * ... * Gd[kd,ld]) * a_l with G the
    per-dimension block matrices; support is padded to full blocks.
    """
    if coeffs.mode != "haar":
        raise ValueError("expected a haar-mode coefficient map")
    return _transform(coeffs, "price")


def haar_coeffs_from_price(coeffs: CoeffMap) -> CoeffMap:
    """Inverse transform: a_l = sum_k G_1[k1,l1] * ... * Gd[kd,ld] * b_k."""
    if coeffs.mode != "price":
        raise ValueError("expected a price-mode coefficient map")
    return _transform(coeffs, "haar")


def _transform(coeffs: CoeffMap, to_mode: str) -> CoeffMap:
    cfg = coeffs.cfg
    groups: dict[tuple[int, ...], dict] = {}
    for nvec, value in coeffs.items():
        block_vec = tuple(block_of_index(cfg.seqs[j], n) for j, n in enumerate(nvec))
        groups.setdefault(block_vec, {})[nvec] = value
    out = {}
    for block_vec, entries in sorted(groups.items()):
        mats = _block_matrices(cfg, block_vec)
        dim_indices = [_block_indices(cfg, j, t) for j, t in enumerate(block_vec)]
        offsets = [idx[0] for idx in dim_indices]
        for target in iter_product(*dim_indices):
            acc = 0j
            for source, value in entries.items():
                w = 1.0 + 0j
                for j in range(cfg.dim):
                    if to_mode == "price":
                        g = mats[j][target[j] - offsets[j], source[j] - offsets[j]]
                        w *= g.conjugate()
                    else:
                        g = mats[j][source[j] - offsets[j], target[j] - offsets[j]]
                        w *= g
                acc += w * complex(_as_complex(value))
            if acc != 0:
                out[target] = out.get(target, 0) + acc
    return CoeffMap(cfg, out, mode=to_mode)


def _as_complex(value) -> complex:
    if isinstance(value, UnitValue):
        return complex(value.as_number())
    return complex(value)


# ---------------------------------------------------------------------------
# coefficient file format


def coeffs_to_json_dict(coeffs: CoeffMap) -> dict:
    """JSON form: mode, grid, and [index..., re, im] entry rows.

    Integral values are emitted as exact integers; irrational coefficients
    (UnitValue with non-square radicand) degrade to floats in this format.
    """
    entries = []
    for nvec, value in coeffs.items():
        num = value.as_number() if isinstance(value, UnitValue) else value
        if isinstance(num, Fraction) and num.denominator == 1:
            num = int(num)
        if isinstance(num, int):
            re, im = num, 0
        elif isinstance(num, complex):
            re, im = num.real, num.imag
        else:
            re, im = float(num), 0
        entries.append([list(nvec), re, im])
    return {
        "mode": coeffs.mode,
        "grid": coeffs.cfg.to_json_dict(),
        "entries": entries,
    }


def coeffs_from_json_dict(data: dict) -> CoeffMap:
    if not isinstance(data, dict):
        raise ValueError("coefficient file must be a JSON object")
    mode = data.get("mode")
    if mode not in MODES:
        raise ValueError(f"field 'mode' must be one of {MODES}, got {mode!r}")
    cfg = GridConfig.from_json_dict(data.get("grid"))
    entries = {}
    rows = data.get("entries")
    if not isinstance(rows, list):
        raise ValueError("field 'entries' must be an array")
    for i, row in enumerate(rows):
        if not (isinstance(row, list) and len(row) == 3):
            raise ValueError(f"entries[{i}] must be [[n_1..n_d], re, im]")
        nvec, re, im = row
        if not (isinstance(nvec, list) and all(isinstance(n, int) and not isinstance(n, bool) for n in nvec)):
            raise ValueError(f"entries[{i}][0] must be an array of integer indices")
        for pos, part in ((1, re), (2, im)):
            if isinstance(part, bool) or not isinstance(part, (int, float)):
                raise ValueError(f"entries[{i}][{pos}] must be a number, got {part!r}")
        if im == 0 and isinstance(re, int):
            value = re
        else:
            value = complex(re, im)
        entries[tuple(nvec)] = value
    return CoeffMap(cfg, entries, mode=mode)
