import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirflow.generators import GeneratorConfig, canned_examples, random_system
from dirflow.specfile import SpecFileError, dumps, from_dict, load, loads, spec_hash, to_dict
from dirflow.system import unroll, validate


@pytest.mark.parametrize("name", list(canned_examples()))
def test_canned_round_trip(name):
    spec = canned_examples()[name]
    text = dumps(spec)
    again = loads(text)
    assert dumps(again) == text
    assert unroll(again).table == unroll(spec).table


@given(st.integers(0, 2 ** 32), st.integers(1, 3), st.sampled_from(["s|r|p|q", "sp|r|q", "qs|rp"]))
def test_generated_round_trip(seed, k, part):
    spec = random_system(GeneratorConfig(seed=seed, horizon=k, partition=part))
    assert dumps(loads(dumps(spec))) == dumps(spec)
    assert spec_hash(loads(dumps(spec))) == spec_hash(spec)


def test_unknown_fields_rejected():
    data = to_dict(canned_examples()["xor-loop"])
    data["colour"] = "blue"
    with pytest.raises(SpecFileError, match="colour"):
        from_dict(data)
    data = to_dict(canned_examples()["xor-loop"])
    data["exogenous"]["extra"] = 1
    with pytest.raises(SpecFileError, match="extra"):
        from_dict(data)
    data = to_dict(canned_examples()["xor-loop"])
    data["delays"]["s5"] = 0
    with pytest.raises(SpecFileError, match="s5"):
        from_dict(data)


def test_malformed_inputs():
    base = to_dict(canned_examples()["xor-loop"])
    bad = json.loads(json.dumps(base))
    bad["exogenous"]["tables"][0][0][1] = 1
    with pytest.raises(SpecFileError, match="decimal string"):
        from_dict(bad)
    bad = json.loads(json.dumps(base))
    del bad["blocks"]["s2"]
    with pytest.raises(SpecFileError, match="s2"):
        from_dict(bad)
    bad = json.loads(json.dumps(base))
    bad["exogenous"]["partition"] = "s|r|p"
    with pytest.raises(SpecFileError):
        from_dict(bad)
    with pytest.raises(SpecFileError, match="line"):
        loads("{nope")


def test_constant_delays_accepted(tmp_path):
    data = to_dict(canned_examples()["xor-loop"])
    data["delays"] = {"s1": 1, "s2": 0, "s3": 0, "s4": 0}
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(data))
    spec = load(path)
    assert validate(spec) == []
    assert spec.delays["S1"].values == (1, 1)


def test_bad_delays_load_but_fail_validation():
    data = to_dict(canned_examples()["xor-loop"])
    data["delays"]["s1"] = [1, 0]
    problems = validate(from_dict(data))
    assert problems == ["loop delay 0 at time 2: d1+d2+d3+d4 must be >= 1"]
