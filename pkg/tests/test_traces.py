import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthrl.traces import (EmptySample, InvalidTrace, NodeClass, PrefixTree, Trace, TraceStore,
                            build_prefix_tree, compress_episode, load_traces, save_traces)

labels = st.sampled_from(["a", "b", "c"])
words = st.lists(labels, min_size=1, max_size=5).map(tuple)


def test_compress_drops_unlabelled_steps():
    t = compress_episode([None, "wood", None, None, "wood", "crafttable"], True)
    assert t == Trace(("wood", "wood", "crafttable"), True)
    assert compress_episode([None, None], False) == Trace((), False)


def test_completed_episode_needs_labels():
    with pytest.raises(InvalidTrace):
        compress_episode([None], True)


@pytest.mark.parametrize("bad", ["", "two words", 3, None])
def test_bad_labels(bad):
    with pytest.raises(InvalidTrace):
        Trace(("a", bad), False)


def test_json_roundtrip(tmp_path):
    traces = [Trace(("a", "b"), True), Trace((), False), Trace(("b",), False)]
    save_traces(traces, tmp_path / "t.jsonl")
    assert load_traces(tmp_path / "t.jsonl").traces == tuple(traces)


def test_from_json_errors():
    with pytest.raises(InvalidTrace):
        Trace.from_json('{"labels": ["a"]}')


def test_store_delta_reports():
    store = TraceStore()
    d = store.add_trace(Trace(("a", "b"), True))
    assert d.new_labels == ["a", "b"] and d.new_behaviour
    d = store.add_trace(Trace(("b", "c", "c"), False))
    assert d.new_labels == ["c"] and d.new_behaviour
    d = store.add_trace(Trace(("a", "b"), True))
    assert d.new_labels == [] and not d.new_behaviour
    assert len(store) == 3
    assert store.vocabulary == {"a", "b", "c"}
    assert store.total_length() == 7
    assert store.positives() == [Trace(("a", "b"), True)] * 2


def test_snapshot_is_stable_while_writing():
    store = TraceStore([Trace(("a",), True)])
    snap = store.snapshot()
    store.add_trace(Trace(("b",), True))
    assert len(snap) == 1 and len(store.snapshot()) == 2


def test_concurrent_writers_lose_nothing():
    store = TraceStore()

    def work(i):
        for j in range(200):
            store.add_trace(Trace((f"l{i}", f"m{j}"), True))

    threads = [threading.Thread(target=work, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(store) == 800
    assert len(store.vocabulary) == 204


def test_prefix_tree_classes_small_example():
    tree = build_prefix_tree([Trace(("a", "b"), True), Trace(("a", "c"), True),
                              Trace(("x",), False)])
    # breadth-first, children in label order
    assert [tree.word(v) for v in range(len(tree))] == [(), ("a",), ("a", "b"), ("a", "c")]
    assert tree.node_class == [NodeClass.REJECT, NodeClass.REJECT, NodeClass.ACCEPT,
                               NodeClass.ACCEPT]
    assert tree.alphabet == ["a", "b", "c"]
    assert tree.bigrams() == {("a", "b"), ("a", "c")}
    assert tree.depth() == 2
    assert tree.find(("a", "c")) == 3 and tree.find(("c",)) is None


def test_positive_prefix_of_positive_stays_accepting():
    tree = build_prefix_tree([Trace(("a",), True), Trace(("a", "b"), True)])
    assert tree.node_class[tree.find(("a",))] is NodeClass.ACCEPT


def test_empty_sample():
    with pytest.raises(EmptySample):
        build_prefix_tree([Trace(("a",), False)])


@settings(max_examples=100, deadline=None)
@given(st.lists(words, min_size=1, max_size=6))
def test_prefix_tree_properties(ws):
    tree = build_prefix_tree([Trace(w, True) for w in ws])
    positives = set(ws)
    prefixes = {w[:i] for w in ws for i in range(len(w) + 1)}
    assert len(tree) == len(prefixes)
    for v in range(len(tree)):
        w = tree.word(v)
        assert tree.find(w) == v
        expected = NodeClass.ACCEPT if w in positives else NodeClass.REJECT
        assert tree.node_class[v] is expected
    # duplicates count once
    assert build_prefix_tree([Trace(w, True) for w in ws + ws]) == tree


def test_from_words_unknown_default():
    tree = PrefixTree.from_words([(("a", "b"), NodeClass.ACCEPT)])
    assert tree.node_class == [NodeClass.UNKNOWN, NodeClass.UNKNOWN, NodeClass.ACCEPT]
