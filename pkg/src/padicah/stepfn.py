"""Step functions over grid partitions, with exact refinement algebra.

A StepFunction is constant on each cell of a partition of the unit cube.
Values may be ints, Fractions, floats, or complex numbers; measures are
always exact Fractions, so integrals of exact-valued functions are exact.

Combining two step functions refines both onto a common partition.  In
one dimension this is a linear merge walk exploiting the nested-or-disjoint
property (the result stays as sparse as the inputs); in higher dimensions
both operands are expanded onto the product grid at the per-dimension
maximal ranks, guarded by a hard cell-count cap.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iter_product
from math import prod

from .errors import ConfigMismatch
from .grid import Cell, GridConfig, PointCode, full_cube, point_position
from .parallel import tree_sum

MAX_UNIFORM_CELLS = 1 << 22

_EXACT_TYPES = (int, Fraction)


def value_abs(v):
    """|v|, exact for int/Fraction, float for float/complex."""
    if isinstance(v, complex):
        return abs(v)
    return -v if v < 0 else v


def value_abs_sq(v):
    """|v|^2, exact whenever v is exact."""
    if isinstance(v, complex):
        return v.real * v.real + v.imag * v.imag
    return v * v


def is_exact(v) -> bool:
    return isinstance(v, _EXACT_TYPES)


def leq_with_guard(lhs, rhs, rel: float = 1e-12) -> bool:
    """lhs <= rhs, exact when both sides are exact.

    Otherwise a double comparison with a relative guard band on the right
    side, so that values within rounding noise of the threshold count as
    below it (ties keep the value in truncation).
    """
    if is_exact(lhs) and is_exact(rhs):
        return lhs <= rhs
    lf, rf = float(lhs), float(rhs)
    return lf <= rf + rel * max(abs(lf), abs(rf))


@dataclass(frozen=True)
class StepFunction:
    """A function constant on each cell of a partition of [0,1)^d."""

    cfg: GridConfig
    cells: tuple[Cell, ...]
    values: tuple

    @classmethod
    def constant(cls, cfg: GridConfig, value) -> "StepFunction":
        return cls(cfg, (full_cube(cfg.dim),), (value,))

    @classmethod
    def on_grid(cls, cfg: GridConfig, rank_vec, values) -> "StepFunction":
        """Build on the product grid with per-dimension uniform ranks.

        ``values`` is flat in lexicographic cell order (last dimension
        fastest), length ``prod_j m_j(rank_vec[j])``.
        """
        rank_vec = tuple(rank_vec)
        sizes = [cfg.seqs[j].modulus(k) for j, k in enumerate(rank_vec)]
        total = prod(sizes)
        if total > MAX_UNIFORM_CELLS:
            raise ValueError(f"uniform grid of {total} cells exceeds the {MAX_UNIFORM_CELLS} cap")
        values = tuple(values)
        if len(values) != total:
            raise ValueError(f"expected {total} values, got {len(values)}")
        cells = tuple(
            Cell(rank_vec, combo) for combo in iter_product(*(range(s) for s in sizes))
        )
        return cls(cfg, cells, values)

    @classmethod
    def from_pieces(cls, cfg: GridConfig, pieces, validate: bool = False) -> "StepFunction":
        """Build from (cell, value) pairs; sorts into canonical order."""
        pieces = sorted(pieces, key=lambda cv: cv[0].sort_key(cfg))
        cells = tuple(c for c, _ in pieces)
        values = tuple(v for _, v in pieces)
        if validate:
            from .grid import validate_partition

            validate_partition(cfg, cells)
        return cls(cfg, cells, values)

    @property
    def dim(self) -> int:
        return self.cfg.dim

    def max_ranks(self) -> tuple[int, ...]:
        return tuple(
            max(c.ranks[j] for c in self.cells) for j in range(self.dim)
        )

    def value_at(self, pt: PointCode):
        """Value of the unique cell containing the point."""
        pos = [point_position(self.cfg, pt, j) for j in range(self.dim)]
        for cell, value in zip(self.cells, self.values):
            if all(
                cell.start(self.cfg, j) <= pos[j] < cell.end(self.cfg, j)
                for j in range(self.dim)
            ):
                return value
        raise ValueError("point is not covered by the partition")

    def map_values(self, fn) -> "StepFunction":
        return StepFunction(self.cfg, self.cells, tuple(fn(v) for v in self.values))

    def abs(self) -> "StepFunction":
        return self.map_values(value_abs)

    def scale(self, c) -> "StepFunction":
        return self.map_values(lambda v: c * v)

    def integral(self, box: Cell | None = None, threads: int = 1):
        """Exact integral over `box` (default: the whole cube).

        Cells are intersected with the box individually, so the box may be
        any mixed-rank cell; no refinement pass is needed.
        """
        cfg = self.cfg
        if box is None:
            terms = [v * c.measure(cfg) for c, v in zip(self.cells, self.values)]
        else:
            box.validate(cfg)
            terms = []
            for c, v in zip(self.cells, self.values):
                hit = c.intersect(cfg, box)
                if hit is not None:
                    terms.append(v * hit.measure(cfg))
        return tree_sum(terms, zero=Fraction(0), threads=threads)

    def uniform_values(self, rank_vec) -> list:
        """Flat value list on the per-dimension uniform grid `rank_vec`."""
        return _expand(self, tuple(rank_vec))

    def sup_abs(self) -> float:
        return max(float(value_abs(v)) for v in self.values)


def _expand(sf: StepFunction, rank_vec: tuple[int, ...]) -> list:
    cfg = sf.cfg
    sizes = [cfg.seqs[j].modulus(k) for j, k in enumerate(rank_vec)]
    total = prod(sizes)
    if total > MAX_UNIFORM_CELLS:
        raise ValueError(f"refinement to {total} cells exceeds the {MAX_UNIFORM_CELLS} cap")
    strides = [1] * len(sizes)
    for j in range(len(sizes) - 2, -1, -1):
        strides[j] = strides[j + 1] * sizes[j + 1]
    out = [None] * total
    for cell, value in zip(sf.cells, sf.values):
        spans = []
        for j, (k, n) in enumerate(zip(cell.ranks, cell.indices)):
            if k > rank_vec[j]:
                raise ValueError(f"cell rank {k} in dim {j} exceeds target rank {rank_vec[j]}")
            ratio = sizes[j] // cfg.seqs[j].modulus(k)
            spans.append(range(n * ratio, (n + 1) * ratio))
        if sf.dim == 1:
            lo, hi = spans[0].start, spans[0].stop
            out[lo:hi] = [value] * (hi - lo)
        else:
            for combo in iter_product(*spans):
                out[sum(i * s for i, s in zip(combo, strides))] = value
    return out


def _merge_1d(f: StepFunction, g: StepFunction):
    """Linear merge of two sorted 1-D partitions of the same region.

    Yields (cell, f_value, g_value) triples on the coarsest common
    refinement; output size is at most len(f) + len(g) - 1.
    """
    cfg = f.cfg
    seq = cfg.seqs[0]
    fa, fb = f.cells, g.cells
    i = j = 0
    out = []
    while i < len(fa) and j < len(fb):
        a, b = fa[i], fb[j]
        finer = a if a.ranks[0] >= b.ranks[0] else b
        out.append((finer, f.values[i], g.values[j]))
        end_a = Fraction(a.indices[0] + 1, seq.modulus(a.ranks[0]))
        end_b = Fraction(b.indices[0] + 1, seq.modulus(b.ranks[0]))
        if end_a <= end_b:
            i += 1
        if end_b <= end_a:
            j += 1
    if i < len(fa) or j < len(fb):
        raise ValueError("partitions do not cover the same region")
    return out


def common_refinement(f: StepFunction, g: StepFunction):
    """(cell, f_value, g_value) triples on a common refinement.

    1-D inputs stay sparse; higher dimensions are expanded onto the
    per-dimension maximal-rank product grid.
    """
    if f.cfg != g.cfg:
        raise ConfigMismatch("step functions live on different grids")
    if f.cells == g.cells:
        return list(zip(f.cells, f.values, g.values))
    if f.dim == 1:
        return _merge_1d(f, g)
    ranks = tuple(
        max(fr, gr) for fr, gr in zip(f.max_ranks(), g.max_ranks())
    )
    fv = _expand(f, ranks)
    gv = _expand(g, ranks)
    cfg = f.cfg
    sizes = [cfg.seqs[j].modulus(k) for j, k in enumerate(ranks)]
    cells = (Cell(ranks, combo) for combo in iter_product(*(range(s) for s in sizes)))
    return [(c, a, b) for c, a, b in zip(cells, fv, gv)]


def zip_with(f: StepFunction, g: StepFunction, fn) -> StepFunction:
    """Pointwise combination on the common refinement."""
    triples = common_refinement(f, g)
    return StepFunction(
        f.cfg,
        tuple(c for c, _, _ in triples),
        tuple(fn(a, b) for _, a, b in triples),
    )


def pointwise_max(f: StepFunction, g: StepFunction) -> StepFunction:
    """max(f, g) for real-valued step functions."""
    return zip_with(f, g, lambda a, b: a if leq_exact_or_float(b, a) else b)


def leq_exact_or_float(a, b) -> bool:
    """a <= b with exact semantics when both are exact, float otherwise."""
    if is_exact(a) and is_exact(b):
        return a <= b
    return float(a) <= float(b)
