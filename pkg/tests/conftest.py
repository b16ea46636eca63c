import itertools
import math
from collections import defaultdict
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from dirflow.dist import JointTable, VariableId

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


# --------------------------------------------------------------- brute oracle
# Deliberately naive: dict of assignment -> Fraction, marginals by summing.
def oracle_probs(table: JointTable) -> dict:
    n = table.normalizer
    return {pt: Fraction(w, n) for pt, w in table.support.items()}


def oracle_marginal(table: JointTable, vars_) -> dict:
    idx = [table.variables.index(v) for v in vars_]
    out = defaultdict(Fraction)
    for pt, p in oracle_probs(table).items():
        out[tuple(pt[i] for i in idx)] += p
    return out


def oracle_H(table: JointTable, vars_) -> float:
    vars_ = list(dict.fromkeys(vars_))
    if not vars_:
        return 0.0
    return -sum(float(p) * math.log2(p) for p in oracle_marginal(table, vars_).values() if p)


def oracle_cmi(table: JointTable, A, B, C=()) -> float:
    A, B, C = list(A), list(B), list(C)
    return (oracle_H(table, A + C) + oracle_H(table, B + C)
            - oracle_H(table, A + B + C) - oracle_H(table, C))


def oracle_directed(table: JointTable, dst: str, src: str, k: int, delay: int = 0) -> float:
    """sum_i I(dst(i); src^{i-delay} | dst^{i-1}) built from oracle_cmi."""
    total = 0.0
    for i in range(1, k + 1):
        B = [VariableId(src, t) for t in range(1, i - delay + 1)]
        if B:
            total += oracle_cmi(table, [VariableId(dst, i)], B, [VariableId(dst, t) for t in range(1, i)])
    return total


# --------------------------------------------------------------- strategies
@st.composite
def joint_tables(draw, n_vars=None, max_vars=4, max_alpha=3, names=None):
    """Random JointTable with integer weights 0..9 (at least one positive)."""
    n = draw(st.integers(1, max_vars)) if n_vars is None else n_vars
    names = names or [VariableId("v", t) for t in range(1, n + 1)]
    sizes = [draw(st.integers(1, max_alpha)) for _ in range(n)]
    points = list(itertools.product(*(range(a) for a in sizes)))
    weights = draw(st.lists(st.integers(0, 9), min_size=len(points), max_size=len(points)))
    if not any(weights):
        weights[draw(st.integers(0, len(points) - 1))] = 1
    return JointTable(names[:n], sizes, dict(zip(points, weights)))


@st.composite
def two_sequence_joints(draw, max_k=3):
    """Arbitrary joint over x^k, y^k (binary)."""
    k = draw(st.integers(1, max_k))
    names = [VariableId("x", t) for t in range(1, k + 1)] + [VariableId("y", t) for t in range(1, k + 1)]
    points = list(itertools.product(range(2), repeat=2 * k))
    weights = draw(st.lists(st.integers(0, 16), min_size=len(points), max_size=len(points)))
    if not any(weights):
        weights[0] = 1
    return JointTable(names, [2] * (2 * k), dict(zip(points, weights))), k


@pytest.fixture
def fair_bits():
    vs = [VariableId("a", 1), VariableId("b", 1)]
    return JointTable(vs, [2, 2], {(0, 0): 1, (0, 1): 1, (1, 0): 1, (1, 1): 1})
