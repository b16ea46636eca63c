import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirflow.dist import JointTable, VariableId
from dirflow.generators import GeneratorConfig, random_system, xor_loop
from dirflow.measures import (FULL, ConditioningTerm, SourceTerm, directed_info, effective_delay,
                              seq_entropy, seq_mutual_info)
from dirflow.query import (LOOP, CondItem, Difference, DirectedInfo, Entropy, MutualInfo,
                           QueryEvalError, QuerySyntaxError, Sum, evaluate, format, parse)
from dirflow.system import TrajectoryDistribution, unroll


def test_parse_examples():
    assert parse("I(x -> y)") == DirectedInfo(("x",), "y", (), (), LOOP)
    assert parse("I(x -> y || q)") == DirectedInfo(("x",), "y", (CondItem("q", 0),), (), LOOP)
    assert parse("I(r,p ; y | u)") == MutualInfo(("r", "p"), ("y",), ("u",))
    assert parse("H(y^k | x^3)") == Entropy(("y",), ("x",))
    assert parse("I(q,r,p -> y || x[loop] @0)") == DirectedInfo(
        ("q", "r", "p"), "y", (CondItem("x", LOOP),), (), 0)
    assert parse("I(x->y|q@2)") == DirectedInfo(("x",), "y", (), ("q",), 2)


def test_format_examples():
    for text in ["I(x -> y)", "I(x -> y || q)", "I(r,p ; y | u)"]:
        assert format(parse(text)) == text
    assert format(parse("H(x)+H(y)")) == "H(x) + H(y)"
    assert format(parse("I(x -> y @2)")) == "I(x -> y @2)"
    assert format(parse("H(x) - (H(y) + H(e))")) == "H(x) - (H(y) + H(e))"


@pytest.mark.parametrize("text,position", [
    ("I(x -> ", 7),
    ("I(x ; )", 6),
    ("H(x", 3),
    ("I(x -> y @ soon)", 11),
    ("H(x) H(y)", 5),
    ("Q(x)", 0),
    ("H(x) $", 5),
])
def test_syntax_errors_carry_position(text, position):
    with pytest.raises(QuerySyntaxError) as info:
        parse(text)
    assert info.value.position == position
    assert info.value.expected
    assert info.value.caret().splitlines()[1] == " " * position + "^"


# ------------------------------------------------------------ round-trip
names = st.sampled_from(["r", "p", "s", "q", "e", "x", "y", "u", "zy", "w2"])
lists = st.lists(names, min_size=1, max_size=3).map(tuple)
opt_lists = st.one_of(st.just(()), lists)
delays = st.one_of(st.just(LOOP), st.integers(0, 9))
leaves = st.one_of(
    st.builds(Entropy, lists, opt_lists),
    st.builds(MutualInfo, lists, lists, opt_lists),
    st.builds(DirectedInfo, lists, names,
              st.lists(st.builds(CondItem, names, delays), max_size=3).map(tuple), opt_lists, delays),
)
exprs = st.recursive(leaves, lambda sub: st.one_of(st.builds(Sum, sub, sub), st.builds(Difference, sub, sub)),
                     max_leaves=6)


@given(exprs)
def test_parse_format_round_trip(expr):
    assert parse(format(expr)) == expr


def test_left_nested_sums_print_without_parentheses():
    e = Sum(Difference(Entropy(("x",)), Entropy(("y",))), Entropy(("e",)))
    assert format(e) == "H(x) - H(y) + H(e)"
    assert parse(format(e)) == e


# ------------------------------------------------------------ evaluation
def test_entropy_of_uniform_bit():
    traj = TrajectoryDistribution(JointTable([VariableId("y", 1)], [2], {(0,): 1, (1,): 1}), 1)
    assert evaluate("H(y)", traj) == pytest.approx(1.0)


def test_massey_lower_bound_on_xor_with_silent_noise():
    k = 2
    zero_s = JointTable.point_mass([VariableId("s", t) for t in range(1, k + 1)], [2] * k, (0,) * k)
    traj = unroll(xor_loop(k=k, s_table=zero_s))
    assert evaluate("I(x -> y) - I(r ; y)", traj) >= -1e-9


def test_evaluate_errors():
    traj = unroll(xor_loop())
    with pytest.raises(QueryEvalError, match="unknown signal"):
        evaluate("H(w)", traj)
    free = TrajectoryDistribution(traj.table, traj.horizon)
    with pytest.raises(QueryEvalError, match="loop"):
        evaluate("I(x -> y)", free)
    assert evaluate("I(x -> y @0)", free) == evaluate("I(x -> y @0)", traj)


@pytest.mark.parametrize("seed", range(5))
def test_evaluate_matches_direct_calls(seed):
    spec = random_system(GeneratorConfig(seed=seed, horizon=3, partition="sp|r|q"))
    traj = unroll(spec)
    d3 = spec.delays["S3"]
    theta = [SourceTerm(s, 0) for s in ("q", "r", "p")]
    cases = {
        "I(x -> y)": directed_info(traj, "y", [SourceTerm("x", d3)]),
        "I(q,r,p -> y @0)": directed_info(traj, "y", theta),
        "I(q,r,p -> y || x[loop] @0)": directed_info(traj, "y", theta, [ConditioningTerm("x", delay=d3)]),
        "I(e -> y)": directed_info(traj, "y", [SourceTerm("e", effective_delay(spec, "e", "y"))]),
        "I(x -> y | q)": directed_info(traj, "y", [SourceTerm("x", d3)], [ConditioningTerm("q", FULL)]),
        "I(x -> y || q)": directed_info(traj, "y", [SourceTerm("x", d3)], [ConditioningTerm("q")]),
        "I(p,q,r ; y)": seq_mutual_info(traj, ["p", "q", "r"], "y"),
        "I(r,p ; y | u)": seq_mutual_info(traj, ["r", "p"], "y", "u"),
        "H(y | x)": seq_entropy(traj, "y", "x"),
    }
    for text, value in cases.items():
        assert evaluate(text, traj) == value, text
    assert evaluate("I(x -> y) - I(p,q,r ; y)", traj) == cases["I(x -> y)"] - cases["I(p,q,r ; y)"]
