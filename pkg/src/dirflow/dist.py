"""Exact finite-alphabet joint distributions.

A :class:`JointTable` stores integer weights over a sparse support together
with a common integer normalizer, so every probability is an exact rational.
Floating point enters only when a logarithm is taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

#: default tolerance (bits) for equality predicates
DEFAULT_TOL = 1e-9

_INT64_SAFE = 2**62


class DistributionError(ValueError):
    """Raised for malformed tables or invalid variable selections."""


class VariableId(NamedTuple):
    """One per-time random variable, e.g. ``VariableId("y", 3)`` for y(3)."""

    signal: str
    time: int

    def __str__(self) -> str:
        return f"{self.signal}({self.time})"


@dataclass(frozen=True)
class Verdict:
    """Outcome of a numerical predicate. ``gap`` is the measured statistic in bits."""

    holds: bool
    gap: float

    def __bool__(self) -> bool:
        return self.holds


def _weight_dtype(normalizer: int):
    return np.int64 if normalizer < _INT64_SAFE else object


class JointTable:
    """Immutable sparse joint distribution with exact rational weights.

    Parameters
    ----------
    variables : sequence of VariableId
        Column order of the assignment tuples.
    alphabets : sequence of int
        Alphabet size per variable; symbols are ``0 .. size-1``.
    support : mapping
        Assignment tuple -> positive integer weight. Zero weights are dropped.
    normalizer : int, optional
        Must equal the sum of weights; computed when omitted.
    """

    __slots__ = ("variables", "alphabets", "normalizer", "_index", "_points",
                 "_weights", "_support", "_hcache")

    def __init__(self, variables: Sequence[VariableId], alphabets: Sequence[int],
                 support: Mapping[tuple, int], normalizer: int | None = None):
        variables = tuple(VariableId(*v) for v in variables)
        alphabets = tuple(int(a) for a in alphabets)
        if len(variables) != len(alphabets):
            raise DistributionError("one alphabet size is required per variable")
        rows, weights = [], []
        for point, w in support.items():
            point = tuple(int(s) for s in point)
            if len(point) != len(variables):
                raise DistributionError(f"assignment {point} does not match {len(variables)} variables")
            for sym, size, var in zip(point, alphabets, variables):
                if not 0 <= sym < size:
                    raise DistributionError(f"symbol {sym} outside alphabet of {var} (size {size})")
            if isinstance(w, Fraction) or int(w) != w:
                raise DistributionError("weights must be integers; use JointTable.from_probabilities")
            w = int(w)
            if w < 0:
                raise DistributionError(f"negative weight at {point}")
            if w:
                rows.append(point)
                weights.append(w)
        total = sum(weights)
        if total <= 0:
            raise DistributionError("table has no probability mass")
        if normalizer is not None and int(normalizer) != total:
            raise DistributionError(f"normalizer {normalizer} != total weight {total}")
        points = np.array(rows, dtype=np.int64).reshape(len(rows), len(variables))
        self._init(variables, alphabets, points, np.array(weights, dtype=_weight_dtype(total)), total)

    def _init(self, variables, alphabets, points, weights, normalizer):
        self.variables = variables
        self.alphabets = alphabets
        self.normalizer = normalizer
        self._index = {v: n for n, v in enumerate(variables)}
        if len(self._index) != len(variables):
            raise DistributionError("duplicate VariableId in table")
        order = np.lexsort(points.T[::-1]) if points.shape[1] else np.arange(len(points))
        self._points = points[order]
        self._weights = weights[order]
        if len(self._points) > 1 and points.shape[1]:
            dup = np.all(self._points[1:] == self._points[:-1], axis=1)
            if dup.any():
                raise DistributionError("duplicate assignment in support")
        elif len(self._points) > 1:
            raise DistributionError("duplicate assignment in support")
        self._points.setflags(write=False)
        self._weights.setflags(write=False)
        self._support = None
        self._hcache = {}

    @classmethod
    def _from_arrays(cls, variables, alphabets, points, weights, normalizer) -> "JointTable":
        # trusted constructor: points unique, weights positive and summing to normalizer
        obj = cls.__new__(cls)
        obj._init(tuple(variables), tuple(alphabets), points, weights, normalizer)
        return obj

    @classmethod
    def from_probabilities(cls, variables, alphabets, probs: Mapping[tuple, Fraction | int]) -> "JointTable":
        """Build from exact rational probabilities (``Fraction`` or ``int``)."""
        fracs = {k: Fraction(v) for k, v in probs.items()}
        if sum(fracs.values()) != 1:
            raise DistributionError("probabilities must sum to exactly 1")
        denom = math.lcm(*(f.denominator for f in fracs.values())) if fracs else 1
        weights = {k: int(f * denom) for k, f in fracs.items()}
        return cls(variables, alphabets, weights, denom)

    @classmethod
    def point_mass(cls, variables, alphabets, point) -> "JointTable":
        return cls(variables, alphabets, {tuple(point): 1}, 1)

    # ------------------------------------------------------------------ access
    @property
    def support(self) -> dict[tuple, int]:
        if self._support is None:
            self._support = {tuple(int(s) for s in row): int(w)
                             for row, w in zip(self._points, self._weights)}
        return self._support

    @property
    def points(self) -> np.ndarray:
        """Read-only ``(n_support, n_vars)`` array of symbols, lexicographically sorted."""
        return self._points

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def __len__(self) -> int:
        return len(self._points)

    def __contains__(self, var) -> bool:
        return VariableId(*var) in self._index

    def alphabet(self, var: VariableId) -> int:
        return self.alphabets[self.column(var)]

    def column(self, var: VariableId) -> int:
        try:
            return self._index[VariableId(*var)]
        except (KeyError, TypeError):
            raise DistributionError(f"unknown variable {var!r}") from None

    def columns(self, vars: Iterable[VariableId]) -> list[int]:
        return sorted({self.column(v) for v in vars})

    def probability(self, point: tuple) -> Fraction:
        return Fraction(self.support.get(tuple(point), 0), self.normalizer)

    def __eq__(self, other) -> bool:
        if not isinstance(other, JointTable):
            return NotImplemented
        return (self.variables == other.variables and self.alphabets == other.alphabets
                and self.normalizer == other.normalizer and self.support == other.support)

    def __hash__(self):
        return hash((self.variables, self.normalizer, len(self)))

    def __repr__(self) -> str:
        names = ", ".join(str(v) for v in self.variables[:6])
        more = ", ..." if len(self.variables) > 6 else ""
        return f"JointTable([{names}{more}], support={len(self)}, normalizer={self.normalizer})"

    # ------------------------------------------------------------ internals
    def _codes(self, cols: Sequence[int]) -> np.ndarray:
        """Integer code per support point for the sub-assignment on ``cols``."""
        radix = 1
        for c in cols:
            radix *= self.alphabets[c]
        if radix < _INT64_SAFE:
            codes = np.zeros(len(self._points), dtype=np.int64)
            for c in cols:
                codes = codes * self.alphabets[c] + self._points[:, c]
            return codes
        _, inv = np.unique(self._points[:, list(cols)], axis=0, return_inverse=True)
        return inv.reshape(-1)

    def _grouped(self, cols: Sequence[int]):
        """Return (representative row index, summed weight) per distinct sub-assignment."""
        if not cols:
            return np.zeros(1, dtype=np.int64), np.array([self.normalizer], dtype=self._weights.dtype)
        codes = self._codes(cols)
        order = np.argsort(codes, kind="stable")
        sorted_codes = codes[order]
        starts = np.flatnonzero(np.r_[True, sorted_codes[1:] != sorted_codes[:-1]])
        sums = np.add.reduceat(self._weights[order], starts)
        return order[starts], sums

    def _entropy_cols(self, cols: tuple[int, ...]) -> float:
        cached = self._hcache.get(cols)
        if cached is not None:
            return cached
        if not cols or len(self._points) == 1:
            h = 0.0
        else:
            _, sums = self._grouped(cols)
            w = sums.astype(np.float64)
            n = float(self.normalizer)
            h = math.log2(n) - float(np.dot(w, np.log2(w))) / n
            h = max(h, 0.0) if h > -1e-12 else h
        self._hcache[cols] = h
        return h


# ---------------------------------------------------------------- operations
def _as_set(vars) -> frozenset:
    if isinstance(vars, VariableId):
        return frozenset([vars])
    return frozenset(VariableId(*v) for v in vars)


def marginalize(table: JointTable, keep: Iterable[VariableId]) -> JointTable:
    """Sum out every variable not in ``keep``; column order follows ``table``."""
    cols = table.columns(_as_set(keep))
    reps, sums = table._grouped(cols)
    if not cols:
        raise DistributionError("cannot marginalize onto the empty set")
    points = table.points[reps][:, cols]
    return JointTable._from_arrays([table.variables[c] for c in cols],
                                   [table.alphabets[c] for c in cols],
                                   np.ascontiguousarray(points), sums, table.normalizer)


def entropy(table: JointTable, vars: Iterable[VariableId]) -> float:
    """Shannon entropy in bits of the marginal on ``vars`` (0 for the empty set)."""
    return table._entropy_cols(tuple(table.columns(_as_set(vars))))


def cond_entropy(table: JointTable, vars, given=()) -> float:
    a, c = _as_set(vars), _as_set(given)
    return entropy(table, a | c) - entropy(table, c)


def cond_mutual_info(table: JointTable, A, B, C=()) -> float:
    """I(A;B|C) in bits from exact marginals. The raw (unclamped) value is returned."""
    a, b, c = _as_set(A), _as_set(B), _as_set(C)
    if a & b or a & c or b & c:
        raise DistributionError(f"variable sets overlap: {sorted(map(str, (a & b) | (a & c) | (b & c)))}")
    for v in a | b | c:
        table.column(v)
    if not a or not b:
        return 0.0
    return (entropy(table, a | c) + entropy(table, b | c)
            - entropy(table, a | b | c) - entropy(table, c))


def is_markov_chain(table: JointTable, A, B, C, tol: float = DEFAULT_TOL) -> Verdict:
    """Test A <-> B <-> C via I(A;C|B) <= tol."""
    gap = cond_mutual_info(table, A, C, B)
    return Verdict(gap <= tol, gap)


def total_correlation(table: JointTable, groups: Sequence) -> float:
    sets = [_as_set(g) for g in groups]
    for i, g in enumerate(sets):
        for h in sets[i + 1:]:
            if g & h:
                raise DistributionError("independence groups must be disjoint")
    union = frozenset().union(*sets)
    return sum(entropy(table, g) for g in sets) - entropy(table, union)


def is_independent(table: JointTable, groups: Sequence, tol: float = DEFAULT_TOL) -> Verdict:
    """Mutual independence of ``groups`` via total correlation <= tol."""
    if len(groups) < 2:
        raise DistributionError("independence needs at least two groups")
    gap = total_correlation(table, groups)
    return Verdict(gap <= tol, gap)


def product(*tables: JointTable) -> JointTable:
    """Joint of mutually independent tables over disjoint variables."""
    if not tables:
        raise DistributionError("product of no tables")
    points, weights = tables[0].points, tables[0].weights
    variables, alphabets = list(tables[0].variables), list(tables[0].alphabets)
    normalizer = tables[0].normalizer
    for t in tables[1:]:
        if set(variables) & set(t.variables):
            raise DistributionError("product tables share variables")
        n, m = len(points), len(t)
        points = np.hstack([np.repeat(points, m, axis=0), np.tile(t.points, (n, 1))])
        normalizer *= t.normalizer
        dtype = _weight_dtype(normalizer)
        weights = (np.repeat(weights.astype(dtype), m) * np.tile(t.weights.astype(dtype), n))
        variables += t.variables
        alphabets += t.alphabets
    return JointTable._from_arrays(variables, alphabets, points, weights, normalizer)


def with_columns(table: JointTable, variables: Sequence[VariableId], alphabets: Sequence[int],
                 columns: np.ndarray) -> JointTable:
    """Append deterministic columns (one value per support point) to ``table``."""
    columns = np.asarray(columns, dtype=np.int64).reshape(len(table), len(variables))
    for j, (v, a) in enumerate(zip(variables, alphabets)):
        if v in table:
            raise DistributionError(f"variable {v} already present")
        if len(columns) and (columns[:, j].min() < 0 or columns[:, j].max() >= a):
            raise DistributionError(f"derived symbols for {v} outside alphabet {a}")
    return JointTable._from_arrays(table.variables + tuple(variables), table.alphabets + tuple(alphabets),
                                   np.hstack([table.points, columns]), table.weights, table.normalizer)
