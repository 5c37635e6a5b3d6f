"""Truncated integrals against families of cutoff functions.

The truncation [f]_h keeps f where |f| <= h and is zero elsewhere.  A
cutoff family is a finite list of nonnegative step functions h_1 <= h_2
<= ... together with per-member partitions; the family conditions are

  (h1) pointwise monotone nondecreasing in m,
  (h2) sup h_m <= C * inf h_m on every partition cell, one C for all,
  (h3) the integrals of h_m over partition cells are bounded away from 0.

``ah_integral`` produces the truncated values v_m = int [f]_{h_m}, the
admissibility tails int_{|f| >= alpha h_m} h_m for a labeled alpha grid,
and a convergence verdict; with constant members h_m = lambda_m this is
exactly the classical A-integral recipe (whose cutoff clause uses the
strict inequality, reported separately as `a_clause`).  Exact value ties
|f| = alpha h_m are counted on their own, since with half-open cells they
are the only place the strict/non-strict choice can matter.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import sqrt

from .errors import ConfigMismatch
from .grid import Cell, GridConfig, cell_from_json_dict, full_cube
from .parallel import parallel_map, tree_sum
from .reports import SCHEMA_VERSION, cell_json, encode_value, encode_values, rational_pair
from .stepfn import (
    StepFunction,
    common_refinement,
    is_exact,
    leq_exact_or_float,
    leq_with_guard,
    value_abs_sq,
)


def _require_cutoff_values(h: StepFunction) -> None:
    for v in h.values:
        if isinstance(v, complex):
            raise ValueError("cutoff functions must be real-valued")
        if v < 0:
            raise ValueError(f"cutoff functions must be nonnegative, found {v}")


def truncate(f: StepFunction, h: StepFunction, scale_sq=1) -> StepFunction:
    """[f]_h on the common refinement: f where |f| <= sqrt(scale_sq) * h, else 0.

    The comparison squares both sides (|f|^2 <= scale_sq * h^2) so scaled
    thresholds like ||chi_n||_inf * h stay exact: scale_sq is the exact
    integer ||chi_n||_inf^2.  Mixed exact/float comparisons fall back to
    doubles with a 1e-12 relative guard band; ties keep the value.
    """
    _require_cutoff_values(h)
    pieces = []
    for cell, fv, hv in common_refinement(f, h):
        keep = leq_with_guard(value_abs_sq(fv), scale_sq * hv * hv)
        pieces.append((cell, fv if keep else 0))
    return StepFunction(f.cfg, tuple(c for c, _ in pieces), tuple(v for _, v in pieces))


def _ge_threshold(g, bound, strict: bool) -> bool:
    """g > bound (strict) or g >= bound, exact when both sides are exact."""
    if is_exact(g) and is_exact(bound):
        return g > bound if strict else g >= bound
    return float(g) > float(bound) if strict else float(g) >= float(bound)


def tail_integral(g: StepFunction, h: StepFunction, alpha=1, strict: bool = True,
                  box: Cell | None = None, threads: int = 1):
    """Integral of h over the sublevel complement {g > alpha*h} (or >=).

    `g` should already be nonnegative (pass f.abs() for a signed f).
    """
    tail, _ = tail_with_ties(g, h, alpha=alpha, strict=strict, box=box, threads=threads)
    return tail


def tail_with_ties(g: StepFunction, h: StepFunction, alpha=1, strict: bool = True,
                   box: Cell | None = None, threads: int = 1):
    """(tail integral, measure of exact ties {g = alpha*h}) in one pass."""
    _require_cutoff_values(h)
    cfg = g.cfg
    box = box if box is not None else full_cube(cfg.dim)
    box.validate(cfg)
    terms = []
    ties = Fraction(0)
    for cell, gv, hv in common_refinement(g, h):
        hit = cell.intersect(cfg, box)
        if hit is None:
            continue
        bound = alpha * hv
        if _ge_threshold(gv, bound, strict):
            terms.append(hv * hit.measure(cfg))
        if is_exact(gv) and is_exact(bound) and gv == bound:
            ties += hit.measure(cfg)
    return tree_sum(terms, zero=Fraction(0), threads=threads), ties


def level_measure(g: StepFunction, level, strict: bool = True,
                  box: Cell | None = None) -> Fraction:
    """mu{x in box : g(x) > level} (or >=), exact."""
    cfg = g.cfg
    box = box if box is not None else full_cube(cfg.dim)
    box.validate(cfg)
    total = Fraction(0)
    for cell, gv in zip(g.cells, g.values):
        hit = cell.intersect(cfg, box)
        if hit is None:
            continue
        if _ge_threshold(gv, level, strict):
            total += hit.measure(cfg)
    return total


# ---------------------------------------------------------------------------
# cutoff families


@dataclass(frozen=True)
class HFamily:
    """A finite cutoff family with per-member partitions.

    `partitions[m]` is the cell system on which member m's oscillation is
    controlled; by default it is the member's own step partition, which
    makes the (h2) constant exactly 1.
    """

    cfg: GridConfig
    members: tuple[StepFunction, ...]
    partitions: tuple[tuple[Cell, ...], ...]
    bound_C: Fraction = Fraction(1)

    @classmethod
    def from_members(cls, members, partitions=None, bound_C=Fraction(1)) -> "HFamily":
        members = tuple(members)
        if not members:
            raise ValueError("a cutoff family needs at least one member")
        cfg = members[0].cfg
        for h in members:
            if h.cfg != cfg:
                raise ConfigMismatch("family members live on different grids")
            _require_cutoff_values(h)
        if partitions is None:
            partitions = tuple(h.cells for h in members)
        else:
            partitions = tuple(tuple(p) for p in partitions)
            if len(partitions) != len(members):
                raise ValueError("need one partition per member")
        if bound_C < 1:
            raise ValueError(f"the oscillation constant must be >= 1, got {bound_C}")
        return cls(cfg, members, partitions, bound_C)

    def __len__(self) -> int:
        return len(self.members)

    def scaled(self, factors) -> "HFamily":
        """Member-wise scaling h_m -> factors[m] * h_m (partitions kept)."""
        factors = list(factors)
        if len(factors) != len(self.members):
            raise ValueError("need one factor per member")
        members = tuple(
            h.map_values(lambda v, a=a: a * v) for h, a in zip(self.members, factors)
        )
        return HFamily(self.cfg, members, self.partitions, self.bound_C)


@dataclass(frozen=True)
class FamilyCheckReport:
    """Outcome of the (h1)-(h3) checks, with the witness tables."""

    monotone_ok: bool
    oscillation_c: object  # Fraction/float, or None when unbounded
    min_cell_integral: object
    lambda_table: tuple
    eps0: object

    @property
    def passes(self) -> bool:
        return (
            self.monotone_ok
            and self.oscillation_c is not None
            and float(self.min_cell_integral) > 0
        )

    def to_json_dict(self) -> dict:
        return {
            "eps0": encode_value(self.eps0),
            "lambda_table": [encode_values(row) for row in self.lambda_table],
            "min_cell_integral": encode_value(self.min_cell_integral),
            "monotone_ok": self.monotone_ok,
            "oscillation_c": encode_value(self.oscillation_c),
            "passes": self.passes,
            "schema_version": SCHEMA_VERSION,
        }


def check_family(fam: HFamily) -> FamilyCheckReport:
    """Verify (h1)-(h3) and compute the witness quantities exactly.

    Reports the minimal usable oscillation constant, the per-cell infima
    lambda^m_k, eps0 = inf_m,k lambda^m_k * mu(I^m_k), and the smallest
    per-cell integral (whose positivity is (h3))."""
    cfg = fam.cfg
    monotone_ok = True
    for a, b in zip(fam.members, fam.members[1:]):
        for _, va, vb in common_refinement(a, b):
            if not leq_exact_or_float(va, vb):
                monotone_ok = False
                break
        if not monotone_ok:
            break
    c_min = Fraction(1)
    unbounded = False
    min_integral = None
    eps0 = None
    lambda_table = []
    for h, partition in zip(fam.members, fam.partitions):
        row = []
        own = partition == h.cells
        for i, pcell in enumerate(partition):
            if own:
                vals = [h.values[i]]
            else:
                vals = [
                    v for c, v in zip(h.cells, h.values) if c.intersect(cfg, pcell) is not None
                ]
            if not vals:
                raise ValueError(f"partition cell {pcell} misses the member's support")
            sup, inf = max(vals), min(vals)
            if inf == 0:
                if sup != 0:
                    unbounded = True
            else:
                ratio = Fraction(sup, inf) if is_exact(sup) and is_exact(inf) else sup / inf
                if float(ratio) > float(c_min):
                    c_min = ratio
            cell_integral = h.integral(pcell)
            weighted = inf * pcell.measure(cfg)
            row.append(inf)
            if min_integral is None or float(cell_integral) < float(min_integral):
                min_integral = cell_integral
            if eps0 is None or float(weighted) < float(eps0):
                eps0 = weighted
        lambda_table.append(tuple(row))
    return FamilyCheckReport(
        monotone_ok=monotone_ok,
        oscillation_c=None if unbounded else c_min,
        min_cell_integral=min_integral,
        lambda_table=tuple(lambda_table),
        eps0=eps0,
    )


# ---------------------------------------------------------------------------
# the AH integral


@dataclass(frozen=True)
class AhIntegralReport:
    """Truncated values, admissibility tails, and the convergence verdict."""

    box: Cell
    values: tuple
    alphas: tuple
    adm_tails: dict
    adm_ties: dict
    a_clause: tuple
    conv_tol: float
    adm_tol: float
    m0: object  # 1-based index where values settle, or None
    converged: bool

    @property
    def admissible(self) -> bool:
        return all(
            float(tails[-1]) <= self.adm_tol for tails in self.adm_tails.values()
        )

    @property
    def integrable(self) -> bool:
        return self.converged and self.admissible

    def value(self):
        return self.values[-1]

    def to_json_dict(self) -> dict:
        return {
            "a_clause": encode_values(self.a_clause),
            "adm_tails": {k: encode_values(v) for k, v in self.adm_tails.items()},
            "adm_ties": {k: encode_values(v) for k, v in self.adm_ties.items()},
            "adm_tol": self.adm_tol,
            "admissible": self.admissible,
            "alphas": list(self.adm_tails.keys()),
            "box": cell_json(self.box),
            "conv_tol": self.conv_tol,
            "converged": self.converged,
            "integrable": self.integrable,
            "m0": self.m0,
            "m_values": list(range(1, len(self.values) + 1)),
            "schema_version": SCHEMA_VERSION,
            "values": encode_values(self.values),
        }


DEFAULT_ALPHAS = (Fraction(1, 2), 1, 2)


def ah_integral(f: StepFunction, fam: HFamily, box: Cell | None = None,
                alphas=DEFAULT_ALPHAS, conv_tol: float = 1e-9,
                adm_tol: float = 0.0, threads: int = 1) -> AhIntegralReport:
    """Truncate f against every member and judge convergence/admissibility.

    values[m] = int_box [f]_{h_m}; admissibility at each alpha is the tail
    int_{|f| >= alpha h_m} h_m over the box, which must sit at or below
    `adm_tol` by the last member.  m0 is the first 1-based index from which
    all values agree pairwise within `conv_tol`.
    """
    if f.cfg != fam.cfg:
        raise ConfigMismatch("function and family live on different grids")
    box = box if box is not None else full_cube(f.cfg.dim)
    g = f.abs()

    def one_member(h: StepFunction):
        v = truncate(f, h).integral(box)
        tails, ties = [], []
        for alpha in alphas:
            t, tie = tail_with_ties(g, h, alpha=alpha, strict=False, box=box)
            tails.append(t)
            ties.append(tie)
        strict_tail = tail_integral(g, h, alpha=1, strict=True, box=box)
        return v, tails, ties, strict_tail

    rows = parallel_map(one_member, fam.members, threads=threads)
    values = tuple(r[0] for r in rows)
    labels = [str(Fraction(a)) for a in alphas]
    adm_tails = {lab: tuple(r[1][i] for r in rows) for i, lab in enumerate(labels)}
    adm_ties = {lab: tuple(r[2][i] for r in rows) for i, lab in enumerate(labels)}
    a_clause = tuple(r[3] for r in rows)
    m0 = _settle_index(values, conv_tol)
    return AhIntegralReport(
        box=box,
        values=values,
        alphas=tuple(alphas),
        adm_tails=adm_tails,
        adm_ties=adm_ties,
        a_clause=a_clause,
        conv_tol=conv_tol,
        adm_tol=adm_tol,
        m0=m0,
        converged=m0 is not None,
    )


def _settle_index(values, tol: float):
    """First 1-based index from which all pairwise gaps are within tol."""
    n = len(values)
    for start in range(n):
        tail = values[start:]
        ok = True
        for i in range(len(tail)):
            for j in range(i + 1, len(tail)):
                if abs(complex(tail[i]) - complex(tail[j])) > tol:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return start + 1
    return None


# ---------------------------------------------------------------------------
# rescaling a family from observed tails


@dataclass(frozen=True)
class UpgradeResult:
    """A rescaled family g_m = alpha_m * h_m and the diagnostics behind it."""

    family: HFamily
    alphas: tuple
    scaled_tails: tuple
    hypothesis_violated: bool

    def to_json_dict(self) -> dict:
        return {
            "alphas": list(self.alphas),
            "hypothesis_violated": self.hypothesis_violated,
            "scaled_tails": [float(t) for t in self.scaled_tails],
            "schema_version": SCHEMA_VERSION,
        }


def family_to_json_dict(fam: HFamily) -> dict:
    """JSON form: grid, per-member cell lists with [num, den] values.

    A member's partition is written only when it differs from the
    member's own cells."""
    members = []
    for h, part in zip(fam.members, fam.partitions):
        entry = {
            "cells": [cell_json(c) for c in h.cells],
            "values": [rational_pair(v) for v in h.values],
        }
        if part != h.cells:
            entry["partition"] = [cell_json(c) for c in part]
        members.append(entry)
    return {
        "bound_c": rational_pair(fam.bound_C),
        "grid": fam.cfg.to_json_dict(),
        "members": members,
        "schema_version": SCHEMA_VERSION,
    }


def _rational_from_json(raw, where: str) -> Fraction:
    if isinstance(raw, list) and len(raw) == 2:
        try:
            num, den = int(raw[0]), int(raw[1])
        except (TypeError, ValueError):
            raise ValueError(f"{where}: entries of a rational must be integers") from None
        if den == 0:
            raise ValueError(f"{where}: zero denominator")
        return Fraction(num, den)
    raise ValueError(f"{where}: expected a [num, den] pair, got {raw!r}")


def family_from_json_dict(data) -> HFamily:
    if not isinstance(data, dict):
        raise ValueError("family must be a JSON object")
    cfg = GridConfig.from_json_dict(data.get("grid"))
    raw_members = data.get("members")
    if not isinstance(raw_members, list) or not raw_members:
        raise ValueError("family field 'members' must be a non-empty array")
    members, partitions = [], []
    for i, entry in enumerate(raw_members):
        if not isinstance(entry, dict):
            raise ValueError(f"members[{i}] must be a JSON object")
        cells_raw = entry.get("cells")
        values_raw = entry.get("values")
        if not isinstance(cells_raw, list) or not isinstance(values_raw, list):
            raise ValueError(f"members[{i}]: need 'cells' and 'values' arrays")
        if len(cells_raw) != len(values_raw):
            raise ValueError(
                f"members[{i}]: {len(cells_raw)} cells against {len(values_raw)} values"
            )
        cells = [cell_from_json_dict(c) for c in cells_raw]
        for c in cells:
            c.validate(cfg)
        values = [
            _rational_from_json(v, f"members[{i}].values[{t}]")
            for t, v in enumerate(values_raw)
        ]
        h = StepFunction.from_pieces(cfg, zip(cells, values))
        members.append(h)
        part_raw = entry.get("partition")
        if part_raw is None:
            partitions.append(h.cells)
        else:
            part = [cell_from_json_dict(c) for c in part_raw]
            for c in part:
                c.validate(cfg)
            partitions.append(tuple(sorted(part, key=lambda c: c.sort_key(cfg))))
    raw_bound = data.get("bound_c")
    bound = _rational_from_json(raw_bound, "bound_c") if raw_bound is not None else Fraction(1)
    return HFamily.from_members(members, partitions=partitions, bound_C=bound)


def upgrade_family(fam: HFamily, tails) -> UpgradeResult:
    """Rescale by alpha_m = (sup_{k>=m} t_k + 1/m)^(-1/2), clamped nondecreasing.

    alpha_m * t_m <= sqrt(sup_{k>=m} t_k), so when the tails genuinely
    decay the rescaled family diverges while its own tails still vanish.
    The hypothesis flag is the finite-family rendering of "t_m -> 0":
    raised when the running tail suprema fail to decrease (or the last
    tail exceeds 1)."""
    tails = list(tails)
    if len(tails) != len(fam):
        raise ValueError(f"need {len(fam)} tail values, got {len(tails)}")
    for t in tails:
        if isinstance(t, complex) or t < 0:
            raise ValueError("tails must be nonnegative reals")
    if all(all(v == 0 for v in h.values) for h in fam.members):
        raise ValueError("every member vanishes identically; nothing to rescale")
    sup_tails = [max(tails[i:]) for i in range(len(tails))]
    alphas = []
    for i, sup in enumerate(sup_tails):
        m = i + 1
        a = 1.0 / sqrt(float(sup) + 1.0 / m)
        if alphas and a < alphas[-1]:
            a = alphas[-1]
        alphas.append(a)
    violated = float(sup_tails[-1]) > 1.0 or (
        float(sup_tails[-1]) > 0.0 and not float(sup_tails[-1]) < float(sup_tails[0])
    )
    scaled = tuple(a * float(t) for a, t in zip(alphas, tails))
    return UpgradeResult(
        family=fam.scaled(alphas),
        alphas=tuple(alphas),
        scaled_tails=scaled,
        hypothesis_violated=violated,
    )
