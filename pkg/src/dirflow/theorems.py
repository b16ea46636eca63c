"""Numerical checks of the feedback-loop information identities and inequalities.

Every statement is a list of :class:`Claim` objects over named terms. A term
label is the canonical query-language text of the quantity, so the value in
a report can be reproduced with ``dirflow measure --expr '<label>'``.

Preconditions are evaluated numerically on the exogenous joint. Independence
that the partition guarantees structurally must also hold numerically;
a disagreement raises :class:`InternalConsistencyError`.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

from .dist import DEFAULT_TOL, JointTable, VariableId, cond_mutual_info, entropy, is_independent
from .generators import GeneratorConfig, random_system
from .measures import forward_path
from .query import evaluate, format as format_expr, parse
from .system import (EXOGENOUS, INTERNAL, WIRING, SpecError, SystemSpec, TrajectoryDistribution,
                     prepend_zero, unroll)


class TheoremId(str, Enum):
    T1 = "T1"
    T2 = "T2"
    T3 = "T3"
    T4 = "T4"
    T5 = "T5"
    T6 = "T6"
    COR1 = "COR1"
    MASSEY_EQ5 = "MASSEY_EQ5"
    CONSERVATION_MM05 = "CONSERVATION_MM05"
    LIELI_EQ7 = "LIELI_EQ7"
    LIELI_EQ8 = "LIELI_EQ8"
    LEMMA1 = "LEMMA1"
    GEN_CONSERVATION = "GEN_CONSERVATION"


IDENTITY_HOLDS = "identity-holds"
INEQUALITY_HOLDS = "inequality-holds"
VIOLATED = "violated"
PRECONDITIONS_UNMET = "preconditions-unmet"

GEN_PAIRS = tuple((a, b) for a in INTERNAL for b in INTERNAL if a != b)


class InternalConsistencyError(RuntimeError):
    """Structural and numerical precondition checks disagree."""


class NothingToSearch(ValueError):
    pass


def theorem_key(theorem, pair: tuple[str, str] | None = None) -> str:
    theorem = TheoremId(theorem)
    if theorem is TheoremId.GEN_CONSERVATION:
        if pair is None:
            raise ValueError("GEN_CONSERVATION needs an (alpha, beta) pair")
        return f"GEN_CONSERVATION({pair[0]},{pair[1]})"
    return theorem.value


def parse_theorem_key(key: str) -> tuple[TheoremId, tuple[str, str] | None]:
    key = key.strip()
    if key.startswith("GEN_CONSERVATION"):
        inner = key[len("GEN_CONSERVATION"):].strip()
        if not (inner.startswith("(") and inner.endswith(")")):
            raise ValueError(f"expected GEN_CONSERVATION(a,b), got {key!r}")
        a, b = (s.strip() for s in inner[1:-1].split(","))
        if (a, b) not in GEN_PAIRS:
            raise ValueError(f"GEN_CONSERVATION pair must be two distinct internal signals, got {key!r}")
        return TheoremId.GEN_CONSERVATION, (a, b)
    try:
        return TheoremId(key), None
    except ValueError:
        raise ValueError(f"unknown theorem id {key!r}") from None


ALL_THEOREMS = tuple(t.value for t in TheoremId if t is not TheoremId.GEN_CONSERVATION) + tuple(
    theorem_key(TheoremId.GEN_CONSERVATION, p) for p in GEN_PAIRS)


# ------------------------------------------------------------ preconditions
def _grp(g: Sequence[str]) -> str:
    return g[0] if len(g) == 1 else f"({','.join(g)})"


@dataclass(frozen=True)
class Precondition:
    name: str
    check: Callable[["_Context"], tuple[bool, float]]


def indep(*groups: Sequence[str]) -> Precondition:
    groups = tuple(tuple(g) for g in groups)
    if len(groups) == 2:
        name = f"{_grp(groups[0])} indep {_grp(groups[1])}"
    else:
        name = f"{','.join(''.join(g) for g in groups)} mutually independent"

    def check(ctx: "_Context"):
        # constant signals are independent of everything
        live = [tuple(s for s in g if not ctx.is_constant(s)) for g in groups]
        live = [g for g in live if g]
        if len(live) < 2:
            return True, 0.0
        verdict = is_independent(ctx.exo, [ctx.exo_vars(g) for g in live], ctx.tol)
        blocks = [{ctx.spec.exogenous.group_of(s) for s in g} for g in live] if ctx.spec else None
        structural = blocks is not None and all(
            not (a & b) for a, b in itertools.combinations(blocks, 2))
        if structural and not verdict.holds:
            raise InternalConsistencyError(
                f"partition separates {name} but total correlation is {verdict.gap:.3g} bits")
        return verdict.holds, verdict.gap

    return Precondition(name, check)


def _q_markov(ctx: "_Context"):
    k = ctx.horizon
    worst = 0.0
    for i in range(1, k):
        fut = [VariableId("q", t) for t in range(i + 1, k + 1)]
        past = [VariableId("q", t) for t in range(1, i + 1)]
        s = [VariableId("s", t) for t in range(1, i + 1)]
        worst = max(worst, cond_mutual_info(ctx.exo, fut, s, past))
    return worst <= ctx.tol, worst


Q_MARKOV = Precondition("q_{i+1..k} - q^i - s^i markov for all i", _q_markov)


def _summing_node(ctx: "_Context"):
    spec = ctx.spec
    if spec is None:
        return False, float("nan")
    k = spec.horizon
    m = spec.alphabets["u"]
    if any(spec.alphabets[s] != m for s in ("y", "q")) or len(set(m)) != 1:
        return False, 1.0
    if any(spec.delays["S4"](i) != 0 for i in range(1, k + 1)):
        return False, 1.0
    bad = sum(1 for (i, ip, xp), out in spec.blocks["S4"].table.items()
              if out != (ip[-1] + xp[-1]) % m[0])
    return bad == 0, float(bad)


SUMMING_NODE = Precondition("S4 is the summing node u = y + q", _summing_node)


def _r_constant(ctx: "_Context"):
    h = entropy(ctx.exo, ctx.exo_vars(("r",)))
    return h <= ctx.tol, h


R_CONSTANT = Precondition("r deterministic", _r_constant)


class _Context:
    def __init__(self, spec: SystemSpec | None, exo: JointTable, horizon: int, tol: float):
        self.spec, self.exo, self.horizon, self.tol = spec, exo, horizon, tol
        self._const = {}

    def exo_vars(self, group) -> list[VariableId]:
        return [VariableId(s, t) for s in group for t in range(1, self.horizon + 1)]

    def is_constant(self, signal: str) -> bool:
        if signal not in self._const:
            self._const[signal] = entropy(self.exo, self.exo_vars((signal,))) <= self.tol
        return self._const[signal]


# ------------------------------------------------------------------ claims
Terms = tuple[tuple[float, str], ...]


def _lin(*items) -> Terms:
    """``_lin("a", "b", (-1, "c"))`` -> a + b - c."""
    out = []
    for it in items:
        coef, label = it if isinstance(it, tuple) else (1.0, it)
        out.append((float(coef), format_expr(parse(label))))
    return tuple(out)


@dataclass(frozen=True)
class Claim:
    name: str
    lhs: Terms
    relation: str  # "=", "<=", ">=", "iff-markov"
    rhs: Terms
    pre: tuple[Precondition, ...] = ()
    markov: str | None = None


@dataclass
class ClaimResult:
    name: str
    relation: str
    lhs: float
    rhs: float
    slack: float
    applicable: bool
    holds: bool
    preconditions: list[str]
    detail: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        if not self.applicable:
            return PRECONDITIONS_UNMET
        return "holds" if self.holds else VIOLATED

    def to_dict(self) -> dict:
        d = {"name": self.name, "relation": self.relation, "lhs": self.lhs, "rhs": self.rhs,
             "slack": self.slack, "status": self.status, "preconditions": self.preconditions}
        d.update(self.detail)
        return d


@dataclass
class CheckResult:
    theorem: str
    preconditions: list[tuple[str, bool]]
    terms: dict[str, float]
    claims: list[ClaimResult]
    slack: float
    verdict: str

    def claim(self, name: str) -> ClaimResult:
        for c in self.claims:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"theorem": self.theorem,
                "preconditions": [{"name": n, "holds": h} for n, h in self.preconditions],
                "terms": dict(self.terms), "slack": self.slack, "verdict": self.verdict,
                "claims": [c.to_dict() for c in self.claims]}


@dataclass(frozen=True)
class Statement:
    claims: tuple[Claim, ...]
    derived: tuple[str, ...] = ()  # signals needing a prepended-zero copy


def theta_partition(spec: SystemSpec | None, alpha: str, beta: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Exogenous signals entering the forward path alpha -> beta, and the rest."""
    if alpha == beta:
        raise SpecError("alpha and beta must differ")
    inside = {WIRING[b][2] for b in forward_path(alpha, beta)}
    return (tuple(s for s in EXOGENOUS if s in inside),
            tuple(s for s in EXOGENOUS if s not in inside))


def _gen_statement(alpha: str, beta: str) -> Statement:
    inside, rest = theta_partition(None, alpha, beta)
    c = ",".join(rest)
    di = f"I({alpha} -> {beta})"
    base = indep(inside, rest)
    claims = [
        Claim("conservation", _lin(di), "=", _lin(f"I({c} ; {beta})"), (base,)),
        Claim("middle identity", _lin(di), "=",
              _lin(f"I({c} -> {beta} @0)", (-1, f"I({c} -> {beta} || {alpha}[loop] @0)"))),
        Claim("upper bound", _lin(di), "<=", _lin(f"I({c} ; {beta})")),
    ]
    if len(rest) > 1:
        for rho in rest:
            others = tuple(s for s in rest if s != rho)
            claims.append(Claim(f"split {rho}", _lin(di, (-1, f"I({rho} ; {beta})")), ">=",
                                _lin(f"I({','.join(others)} ; {beta})"),
                                (base, indep((rho,), others))))
    return Statement(tuple(claims))


S_INDEP = indep(("s",), ("p", "q", "r"))
QS_RP = indep(("q", "s"), ("r", "p"))
Q_S = indep(("q",), ("s",))

_T3_RHS = ("I(r ; u)", "I(p ; e)", "I(q ; y)", "I(p ; u | e)", "I(r,p ; y | u)")


def statement(theorem, pair=None) -> Statement:
    """The claims checked for ``theorem`` (first claim is the headline)."""
    t = TheoremId(theorem)
    xy = "I(x -> y)"
    if t is TheoremId.T1:
        return Statement((
            Claim("conservation", _lin(xy), "=", _lin("I(p,q,r ; y)"), (S_INDEP,)),
            Claim("middle identity", _lin(xy), "=",
                  _lin("I(q,r,p -> y @0)", (-1, "I(q,r,p -> y || x[loop] @0)"))),
            Claim("upper bound", _lin(xy), "<=", _lin("I(p,q,r ; y)")),
        ))
    if t is TheoremId.T2:
        pre = (S_INDEP, indep(("r",), ("p", "q")))
        rhs = _lin("I(r ; y)", "I(p,q ; y)")
        return Statement((
            Claim("split lower bound", _lin(xy), ">=", rhs, pre),
            Claim("equality iff markov (p,q) - y - r", _lin(xy), "iff-markov", rhs, pre,
                  markov=format_expr(parse("I(p,q ; r | y)"))),
        ))
    if t is TheoremId.T3:
        return Statement((Claim("five-term identity", _lin(xy), "=", _lin(*_T3_RHS),
                                (indep("r", "p", "q", "s"),)),))
    if t is TheoremId.T4:
        return Statement((Claim("nested lower bound", _lin(xy), ">=", _lin("I(e -> y)"), (S_INDEP,)),))
    if t is TheoremId.T5:
        core = ("I(x -> u)", "I(q ; y)", "I(r,p ; y | u)")
        return Statement((
            Claim("identity", _lin(xy), "=", _lin(*core), (QS_RP, Q_S)),
            Claim("upper bound", _lin(xy), "<=", _lin(*core, "I(q ; r | u,y)"), (QS_RP,)),
            Claim("upper bound tight", _lin(xy), "=", _lin(*core, "I(q ; r | u,y)"), (QS_RP, Q_S)),
        ))
    if t is TheoremId.T6:
        rhs = _lin("I(x -> u)", "I(r,p ; y | u)", "I(q ; r,p | u,y)")
        return Statement((
            Claim("full conditioning identity", _lin("I(x -> y | q)"), "=", rhs, (QS_RP,)),
            Claim("causal conditioning identity", _lin("I(x -> y || q)"), "=", rhs, (QS_RP, Q_MARKOV)),
        ))
    if t is TheoremId.COR1:
        pre = (QS_RP, Q_S)
        middle = _lin("I(e -> u)", "I(q ; y)", "I(r ; y | u)")
        return Statement((
            Claim("outer inequality", _lin(xy), ">=", middle, pre),
            Claim("inner inequality", middle, ">=", _lin("I(e -> u)"), pre),
            Claim("outer equality", _lin(xy), "=", middle, pre + (indep(("r",), ("p",)),)),
        ))
    if t is TheoremId.MASSEY_EQ5:
        return Statement((Claim("lower bound", _lin(xy), ">=", _lin("I(r ; y)"), (S_INDEP,)),))
    if t is TheoremId.CONSERVATION_MM05:
        return Statement((
            Claim("conservation", _lin("I(x -> y @0)", "I(zy -> x @0)"), "=", _lin("I(x ; y)")),
            Claim("shifted form", _lin("I(zy -> x @0)"), "=", _lin("I(y -> x @1)")),
        ), derived=("y",))
    if t is TheoremId.LIELI_EQ7:
        return Statement((Claim("identity", _lin(xy), "=", _lin("I(p ; y)", "I(x -> y | p)"), (S_INDEP,)),))
    if t is TheoremId.LIELI_EQ8:
        pre = (SUMMING_NODE, R_CONSTANT, S_INDEP, indep(("p", "s"), ("q",)))
        return Statement((Claim("identity", _lin(xy), "=",
                                _lin("I(p ; y)", "I(zq ; y)", "I(p ; zq | y)"), pre),), derived=("q",))
    if t is TheoremId.LEMMA1:
        rps_q = indep(("r", "p", "s"), ("q",))
        return Statement((
            Claim("cut y,u", _lin("I(r,p,s ; q | u,y)"), "=", (), (rps_q,)),
            Claim("cut y,u on r", _lin("I(r ; q | u,y)"), "=", (), (rps_q,)),
            Claim("cut u,e", _lin("I(r ; p,s,q | u,e)"), "=", (), (indep(("r",), ("p", "s", "q")),)),
            Claim("cut e,x", _lin("I(p ; r,s,q | e,x)"), "=", (), (indep(("p",), ("r", "s", "q")),)),
            Claim("cut x,y", _lin("I(s ; r,p,q | x,y)"), "=", (), (indep(("s",), ("r", "p", "q")),)),
        ))
    if t is TheoremId.GEN_CONSERVATION:
        if pair is None:
            raise ValueError("GEN_CONSERVATION needs an (alpha, beta) pair")
        return _gen_statement(*pair)
    raise ValueError(t)


def _statement_for_key(key: str) -> Statement:
    t, pair = parse_theorem_key(key)
    return statement(t, pair)


# ------------------------------------------------------------------ checking
def _context(traj: TrajectoryDistribution, tol: float) -> _Context:
    return _Context(traj.spec, traj.table, traj.horizon, tol)


def _spec_context(spec: SystemSpec, tol: float) -> _Context:
    return _Context(spec, spec.exogenous.joint(), spec.horizon, tol)


def _eval_preconditions(ctx: _Context, claims: Iterable[Claim]) -> dict[str, tuple[bool, float]]:
    out = {}
    for c in claims:
        for p in c.pre:
            if p.name not in out:
                out[p.name] = p.check(ctx)
    return out


def check_preconditions(spec: SystemSpec, theorem, tol: float = DEFAULT_TOL, pair=None) -> list[tuple[str, bool]]:
    st = statement(theorem, pair) if not isinstance(theorem, str) or not theorem.startswith("GEN") \
        else _statement_for_key(theorem)
    pre = _eval_preconditions(_spec_context(spec, tol), st.claims)
    return [(name, holds) for name, (holds, _) in pre.items()]


def _with_derived(traj: TrajectoryDistribution, signals: Iterable[str]) -> TrajectoryDistribution:
    for s in signals:
        if f"z{s}" not in traj.signals:
            traj = prepend_zero(traj, s)
    return traj


def _value(terms: Terms, values: dict[str, float]) -> float:
    return sum(c * values[label] for c, label in terms)


def _verdict(claims: list[ClaimResult]) -> str:
    applicable = [c for c in claims if c.applicable]
    if not applicable:
        return PRECONDITIONS_UNMET
    if any(not c.holds for c in applicable):
        return VIOLATED
    has_ineq = any(c.relation in ("<=", ">=") for c in applicable)
    if len(applicable) == len(claims):
        return IDENTITY_HOLDS if any(c.relation in ("=", "iff-markov") for c in applicable) else INEQUALITY_HOLDS
    return INEQUALITY_HOLDS if has_ineq else IDENTITY_HOLDS


def check_theorem(traj: TrajectoryDistribution, theorem, tol: float = DEFAULT_TOL, pair=None) -> CheckResult:
    """Evaluate every term and claim of ``theorem`` on one unrolled trajectory."""
    if isinstance(theorem, str) and theorem.startswith("GEN_CONSERVATION") and pair is None:
        theorem, pair = parse_theorem_key(theorem)
    key = theorem_key(theorem, pair)
    st = statement(theorem, pair)
    traj = _with_derived(traj, st.derived)
    pre = _eval_preconditions(_context(traj, tol), st.claims)
    labels = []
    for c in st.claims:
        for _, label in c.lhs + c.rhs:
            labels.append(label)
        if c.markov:
            labels.append(c.markov)
    terms = {label: evaluate(label, traj) for label in dict.fromkeys(labels)}
    results = []
    for c in st.claims:
        lhs, rhs = _value(c.lhs, terms), _value(c.rhs, terms)
        applicable = all(pre[p.name][0] for p in c.pre)
        detail = {}
        if c.relation == "=":
            slack = abs(lhs - rhs)
            holds = slack <= tol
        elif c.relation == "<=":
            slack = rhs - lhs
            holds = slack >= -tol
        elif c.relation == ">=":
            slack = lhs - rhs
            holds = slack >= -tol
        else:
            slack = abs(lhs - rhs)
            markov_gap = terms[c.markov]
            holds = (slack <= tol) == (markov_gap <= tol)
            detail = {"markov_gap": markov_gap, "equality": slack <= tol, "markov": markov_gap <= tol}
        results.append(ClaimResult(c.name, c.relation, lhs, rhs, slack, applicable, holds,
                                   [p.name for p in c.pre], detail))
    return CheckResult(key, [(n, h) for n, (h, _) in pre.items()], terms, results, results[0].slack,
                       _verdict(results))


def generalized_conservation(traj: TrajectoryDistribution, alpha: str, beta: str,
                             tol: float = DEFAULT_TOL) -> CheckResult:
    return check_theorem(traj, TheoremId.GEN_CONSERVATION, tol, pair=(alpha, beta))


@dataclass
class SuiteReport:
    results: list[CheckResult]
    manifest: dict | None = None

    @property
    def violated(self) -> list[CheckResult]:
        return [r for r in self.results if r.verdict == VIOLATED]

    def __getitem__(self, key: str) -> CheckResult:
        for r in self.results:
            if r.theorem == key:
                return r
        raise KeyError(key)

    def to_dict(self) -> dict:
        out = {"results": [r.to_dict() for r in self.results]}
        if self.manifest is not None:
            out = {"manifest": self.manifest, **out}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        return results_to_csv(self.results)


def results_to_csv(results: Sequence[CheckResult], seeds: Sequence[int] | None = None) -> str:
    """One row per theorem check; one column per term label (blank when unused)."""
    labels = list(dict.fromkeys(label for r in results for label in r.terms))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    lead = ["seed"] if seeds is not None else []
    w.writerow(lead + ["theorem", "verdict", "slack"] + labels)
    for n, r in enumerate(results):
        w.writerow(([seeds[n]] if seeds is not None else []) + [r.theorem, r.verdict, repr(r.slack)]
                   + [repr(r.terms[l]) if l in r.terms else "" for l in labels])
    return buf.getvalue()


def _full_trajectory(spec_or_traj) -> TrajectoryDistribution:
    traj = unroll(spec_or_traj) if isinstance(spec_or_traj, SystemSpec) else spec_or_traj
    return _with_derived(traj, ("y", "q"))


def verify_all(spec_or_traj, tol: float = DEFAULT_TOL, theorems: Sequence[str] | None = None) -> SuiteReport:
    """Unroll once and run every requested check (default: all of them)."""
    traj = _full_trajectory(spec_or_traj)
    keys = list(theorems) if theorems else list(ALL_THEOREMS)
    results = []
    for key in keys:
        t, pair = parse_theorem_key(key)
        results.append(check_theorem(traj, t, tol, pair))
    return SuiteReport(results)


def search_counterexample(theorem: str, config: GeneratorConfig, budget: int = 1000,
                          threshold: float = 0.01, target: str | None = None,
                          tol: float = DEFAULT_TOL):
    """Scan seeds ``config.seed, config.seed+1, ...`` for a strict gap.

    Without ``target`` the headline claim is probed: an equality whose
    |lhs - rhs| exceeds ``threshold`` or an inequality violated by more than
    ``threshold``. With ``target`` (a term label) the first instance whose
    term value exceeds ``threshold`` is returned. Returns ``(seed, result)``
    or ``None`` when the budget runs out.
    """
    t, pair = parse_theorem_key(theorem)
    st = statement(t, pair)
    probe = random_system(config)
    pre = _eval_preconditions(_spec_context(probe, tol), st.claims[:1])
    if all(h for h, _ in pre.values()):
        raise NothingToSearch(f"configuration satisfies every precondition of {theorem}: nothing to search")
    if target is not None:
        target = format_expr(parse(target))
    for seed in range(config.seed, config.seed + budget):
        traj = unroll(random_system(config.with_seed(seed)))
        res = check_theorem(traj, t, tol, pair)
        if target is not None:
            if target not in res.terms:
                raise ValueError(f"{target!r} is not a term of {theorem}")
            if res.terms[target] > threshold:
                return seed, res
            continue
        head = res.claims[0]
        if head.relation == "=" and head.slack > threshold:
            return seed, res
        if head.relation in ("<=", ">=") and head.slack < -threshold:
            return seed, res
    return None
