import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dirflow.dist import JointTable, VariableId
from dirflow.generators import (GeneratorConfig, random_system, summing_node_loop, two_block_loop,
                                xor_loop)
from dirflow.query import evaluate, format, parse
from dirflow.system import EXOGENOUS, ExogenousSpec, TrajectoryDistribution, unroll
from dirflow.theorems import (ALL_THEOREMS, IDENTITY_HOLDS, INEQUALITY_HOLDS, PRECONDITIONS_UNMET,
                              VIOLATED, InternalConsistencyError, NothingToSearch, TheoremId,
                              check_preconditions, check_theorem, generalized_conservation,
                              parse_theorem_key, search_counterexample, statement, theta_partition,
                              verify_all)

# seeds found with search_counterexample and frozen here
T1_GAP_SEED = (0, "sp|r|q", 2)
T5_RESIDUAL_SEED = (20, "qs|r|p", 2)


def traj_for(seed, partition="s|r|p|q", k=2, **kw):
    return unroll(random_system(GeneratorConfig(seed=seed, horizon=k, partition=partition, **kw)))


# ------------------------------------------------------------ ids
def test_theorem_keys():
    assert len(ALL_THEOREMS) == 12 + 12
    assert parse_theorem_key("GEN_CONSERVATION(e,u)") == (TheoremId.GEN_CONSERVATION, ("e", "u"))
    with pytest.raises(ValueError):
        parse_theorem_key("T9")
    with pytest.raises(ValueError):
        parse_theorem_key("GEN_CONSERVATION(x,x)")


def test_statement_labels_are_canonical_queries():
    for key in ALL_THEOREMS:
        t, pair = parse_theorem_key(key)
        for claim in statement(t, pair).claims:
            for _, label in claim.lhs + claim.rhs:
                assert format(parse(label)) == label


# ------------------------------------------------------------ preconditions
def test_preconditions_examples():
    spec = random_system(GeneratorConfig(seed=1, partition="s|rpq"))
    assert dict(check_preconditions(spec, TheoremId.T1)) == {"s indep (p,q,r)": True}
    spec = random_system(GeneratorConfig(seed=1, partition="rpqs"))
    assert not any(h for _, h in check_preconditions(spec, TheoremId.T3))
    spec = random_system(GeneratorConfig(seed=1, horizon=3, partition="q|s|rp", memoryless=("q",)))
    pre = dict(check_preconditions(spec, TheoremId.T6))
    assert pre["q_{i+1..k} - q^i - s^i markov for all i"]


def test_markov_condition_fails_when_q_tracks_past_s():
    spec = random_system(GeneratorConfig(seed=3, horizon=3, partition="qs|rp"))
    pre = dict(check_preconditions(spec, TheoremId.T6))
    assert not pre["q_{i+1..k} - q^i - s^i markov for all i"]


def test_structural_numeric_disagreement_is_internal_error():
    # table where s copies p, paired with a spec whose partition separates them
    k = 1
    dependent = traj_for(0, "sp|r|q", k=k)
    honest = random_system(GeneratorConfig(seed=0, horizon=k, partition="s|p|r|q"))
    lying = TrajectoryDistribution(dependent.table, k, honest, dependent.signals)
    if check_theorem(dependent, TheoremId.T1).preconditions[0][1]:
        pytest.skip("drawn joint happens to be independent")
    with pytest.raises(InternalConsistencyError):
        check_theorem(lying, TheoremId.T1)


# ------------------------------------------------------------ check_theorem examples
def test_t1_and_t3_on_xor_loop():
    traj = unroll(xor_loop(k=2))
    t1 = check_theorem(traj, TheoremId.T1)
    assert t1.verdict == IDENTITY_HOLDS and t1.slack <= 1e-9
    t3 = check_theorem(traj, TheoremId.T3)
    assert t3.verdict == IDENTITY_HOLDS
    assert len([l for l in t3.terms if l != "I(x -> y)"]) == 5


def test_constant_theta_kills_flow():
    for seed in range(5):
        traj = traj_for(seed, "s|r|p|q", k=2, deterministic=("r", "p", "q"))
        assert evaluate("I(x -> y)", traj) == pytest.approx(0.0, abs=1e-12)


def test_verify_all_on_xor_loop():
    report = verify_all(xor_loop(k=2))
    assert not report.violated
    verdicts = {r.theorem: r.verdict for r in report.results}
    assert verdicts["LIELI_EQ8"] == PRECONDITIONS_UNMET
    assert verdicts["T1"] == verdicts["T3"] == verdicts["COR1"] == IDENTITY_HOLDS


def test_dependent_s_p_reports_inequality_only():
    seed, part, k = T1_GAP_SEED
    res = check_theorem(traj_for(seed, part, k), TheoremId.T1)
    assert res.verdict == INEQUALITY_HOLDS
    assert res.claim("conservation").status == PRECONDITIONS_UNMET
    assert res.claim("upper bound").holds
    assert res.slack > 0.01


def test_horizon_one_suite():
    report = verify_all(random_system(GeneratorConfig(seed=2, horizon=1)))
    assert len(report.results) == len(ALL_THEOREMS)


def test_report_serialization():
    report = verify_all(xor_loop(k=1), theorems=["T1", "GEN_CONSERVATION(e,u)"])
    d = report.to_dict()
    assert [r["theorem"] for r in d["results"]] == ["T1", "GEN_CONSERVATION(e,u)"]
    assert set(d["results"][0]) >= {"theorem", "preconditions", "terms", "slack", "verdict"}
    rows = report.to_csv().splitlines()
    assert rows[0].startswith("theorem,verdict,slack,")
    assert len(rows) == 3


# ------------------------------------------------------------ theta partition
def test_theta_partition_examples():
    assert theta_partition(None, "x", "y") == (("s",), ("r", "p", "q"))
    assert theta_partition(None, "e", "y") == (("p", "s"), ("r", "q"))
    assert theta_partition(None, "u", "e") == (("r",), ("p", "s", "q"))
    assert theta_partition(None, "e", "u") == (("p", "s", "q"), ("r",))


def test_generalized_conservation_examples():
    traj = traj_for(5, "s|r|p|q", k=2)
    gen = generalized_conservation(traj, "x", "y")
    t1 = check_theorem(traj, TheoremId.T1)
    assert gen.claim("conservation").lhs == t1.claim("conservation").lhs
    assert gen.claim("conservation").rhs == pytest.approx(t1.claim("conservation").rhs, abs=1e-12)
    assert generalized_conservation(unroll(xor_loop(k=2)), "e", "u").verdict == IDENTITY_HOLDS
    yu = generalized_conservation(traj, "y", "u")
    assert yu.terms["I(y -> u)"] == pytest.approx(yu.terms["I(r,p,s ; u)"], abs=1e-9)


# ------------------------------------------------------------ search
def test_search_nothing_to_search():
    with pytest.raises(NothingToSearch):
        search_counterexample("T1", GeneratorConfig(partition="s|r|p|q"), budget=5)


def test_frozen_t1_gap_seed_is_first_found():
    seed, part, k = T1_GAP_SEED
    found = search_counterexample("T1", GeneratorConfig(seed=0, horizon=k, partition=part), budget=50)
    assert found is not None and found[0] == seed
    assert found[1].slack > 0.01


def test_frozen_t5_residual_seed():
    seed, part, k = T5_RESIDUAL_SEED
    res = check_theorem(traj_for(seed, part, k), TheoremId.T5)
    assert res.terms["I(q ; r | u,y)"] > 0.005
    assert res.claim("upper bound").holds


def test_search_budget_exhaustion_returns_none():
    cfg = GeneratorConfig(seed=0, horizon=1, partition="sqrp")
    assert search_counterexample("T4", cfg, budget=10, threshold=0.5) is None


# ------------------------------------------------------------ properties
systems = st.builds(GeneratorConfig, seed=st.integers(0, 2 ** 32), horizon=st.integers(1, 3),
                    partition=st.sampled_from(["s|r|p|q", "s|rpq", "sp|r|q", "rpsq", "qs|rp", "qs|r|p"]))


@settings(max_examples=40)
@given(systems)
def test_t1_unconditional_and_conditional(cfg):
    res = check_theorem(unroll(random_system(cfg)), TheoremId.T1)
    assert res.claim("upper bound").holds and res.claim("middle identity").holds
    if cfg.partition.split("|")[0] == "s":
        assert res.verdict == IDENTITY_HOLDS


@settings(max_examples=40)
@given(systems)
def test_violated_only_when_preconditions_hold(cfg):
    for r in verify_all(random_system(cfg)).results:
        for c in r.claims:
            if c.status == VIOLATED:
                pre = dict(r.preconditions)
                assert all(pre[p] for p in c.preconditions)
        if r.verdict == VIOLATED:
            # the only false claim in the suite is the corollary's equality case
            assert r.theorem == "COR1"
            assert [c.name for c in r.claims if c.status == VIOLATED] == ["outer equality"]


@settings(max_examples=25)
@given(st.integers(0, 2 ** 32), st.integers(1, 3), st.booleans())
def test_t2_equality_iff_markov(seed, k, fixed_r):
    det = ("r",) if fixed_r else ()
    res = check_theorem(traj_for(seed, "s|r|pq", k, deterministic=det), TheoremId.T2)
    iff = res.claim("equality iff markov (p,q) - y - r")
    assert iff.holds
    if fixed_r:
        assert iff.detail["equality"] and iff.detail["markov"]


def test_t2_strict_gap_when_chain_fails():
    for seed in range(40):
        res = check_theorem(traj_for(seed, "s|r|pq", 2), TheoremId.T2)
        iff = res.claim("equality iff markov (p,q) - y - r")
        if not iff.detail["markov"]:
            assert iff.slack > 1e-9
            return
    pytest.fail("no seed with a broken chain")


@settings(max_examples=25)
@given(st.integers(0, 2 ** 32), st.integers(1, 3))
def test_cor1_chain_inequalities(seed, k):
    res = check_theorem(traj_for(seed, "r|p|s|q", k), TheoremId.COR1)
    assert res.claim("outer inequality").holds and res.claim("inner inequality").holds


@pytest.mark.parametrize("seed", range(4))
def test_cor1_equality_gap_is_what_p_feeds_forward(seed):
    traj = traj_for(seed, "r|p|s|q", 3)
    res = check_theorem(traj, TheoremId.COR1)
    gap = res.claim("outer equality").slack
    expected = evaluate("I(p ; e,u) + I(p ; y | u,r)", traj)
    assert gap == pytest.approx(expected, abs=1e-9)


@settings(max_examples=25)
@given(st.integers(0, 2 ** 32), st.integers(1, 3))
def test_lemma1_on_two_block_loops(seed, k):
    res = check_theorem(unroll(two_block_loop(k, seed)), TheoremId.LEMMA1)
    assert res.terms["I(r ; q | u,y)"] <= 1e-9
    assert res.verdict == IDENTITY_HOLDS


def test_summing_node_fixture_satisfies_li_eli_identity():
    res = check_theorem(unroll(summing_node_loop(k=2)), TheoremId.LIELI_EQ8)
    assert res.verdict == IDENTITY_HOLDS


def test_li_eli_needs_the_summing_node():
    res = check_theorem(unroll(xor_loop(k=2)), TheoremId.LIELI_EQ8)
    assert dict(res.preconditions)["r deterministic"] is False
    assert res.verdict == PRECONDITIONS_UNMET


def test_conservation_mm05_needs_no_hypotheses():
    for seed in range(5):
        res = check_theorem(traj_for(seed, "rpsq", 2), TheoremId.CONSERVATION_MM05)
        assert res.verdict == IDENTITY_HOLDS


def test_exogenous_spec_rejects_bad_partition():
    joints = [JointTable.point_mass([VariableId(s, 1)], [2], (0,)) for s in EXOGENOUS]
    with pytest.raises(ValueError):
        ExogenousSpec((("r",), ("p",), ("s",)), joints[:3])
