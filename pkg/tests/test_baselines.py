import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthrl.baselines import KTailsConfig, TabuConfig, ktails, tabu_learn
from synthrl.dfa import chain_dfa
from synthrl.traces import Trace, build_prefix_tree

words = st.lists(st.lists(st.sampled_from("abc"), min_size=1, max_size=5).map(tuple),
                 min_size=1, max_size=6)


def traces_of(*ws):
    return [Trace(tuple(w), True) for w in ws]


def test_ktails_depth_zero_merges_by_acceptance_only():
    # prefixes "" and "a" are both rejecting, so they collapse into a looping state
    dfa = ktails(build_prefix_tree(traces_of("ab")), KTailsConfig(0))
    assert dfa.num_states == 2
    assert dfa.delta == {(1, "a"): 1, (1, "b"): 2}


def test_ktails_merges_equal_futures():
    dfa = ktails(build_prefix_tree(traces_of("ab", "cb")), KTailsConfig(2))
    assert dfa.num_states == 3
    assert dfa.step(1, "a") == dfa.step(1, "c") == 2


def test_ktails_deep_k_keeps_the_tree_shape_for_one_trace():
    dfa = ktails(build_prefix_tree(traces_of("abc")), KTailsConfig(5))
    assert dfa.isomorphic(chain_dfa("abc"))


@settings(max_examples=100, deadline=None)
@given(words, st.integers(0, 3))
def test_ktails_accepts_every_positive(ws, k):
    dfa = ktails(build_prefix_tree(traces_of(*ws)), KTailsConfig(k))
    for w in ws:
        assert dfa.accepts(w)


def test_ktails_config():
    with pytest.raises(ValueError):
        KTailsConfig(-1)


def test_tabu_starts_from_first_trace_chain():
    dfa, history = tabu_learn(traces_of("ab"), TabuConfig(max_states=3, iterations=5))
    assert dfa.isomorphic(chain_dfa("ab"))
    assert history == [0] * 5


def test_tabu_with_too_few_states_keeps_errors():
    # three rejecting prefixes and one accepting word cannot fit in two states
    _, history = tabu_learn(traces_of("aaa"), TabuConfig(max_states=2, iterations=30))
    assert history[-1] > 0


@settings(max_examples=30, deadline=None)
@given(words, st.integers(0, 50))
def test_tabu_history_and_determinism(ws, seed):
    cfg = TabuConfig(max_states=4, iterations=15, seed=seed)
    a, ha = tabu_learn(traces_of(*ws), cfg)
    b, hb = tabu_learn(traces_of(*ws), cfg)
    assert a == b and ha == hb
    assert len(ha) == 15
    assert all(x >= y for x, y in zip(ha, ha[1:]))
    assert a.num_states <= 4


def test_tabu_ignores_negative_traces_and_needs_positives():
    with pytest.raises(ValueError):
        tabu_learn([Trace(("a",), False)])


@pytest.mark.parametrize("field", ["max_states", "iterations", "tabu_len", "neighbours"])
def test_tabu_config_validation(field):
    with pytest.raises(ValueError):
        TabuConfig(**{field: 0})
    with pytest.raises(ValueError):
        TabuConfig(seed=-1)
