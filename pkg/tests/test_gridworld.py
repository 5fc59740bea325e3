import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthrl.gridworld import (TASKS, Action, Episode, EpisodeFinished, InvalidPosition,
                               MapParseError, default_map, dump_map, get_task, labeling, load_map,
                               reset, step)

CORRIDOR = "W@C\n"


def test_coordinates_origin_bottom_left():
    w = load_map("W.\n.@\n")
    assert w.start == (1, 0)
    assert labeling(w, (0, 1)) == "wood"
    assert labeling(w, (0, 0)) is None
    with pytest.raises(InvalidPosition):
        labeling(w, (2, 0))


def test_moves_and_blocking():
    w = load_map(".~.\n.@.\n...\n")
    assert w.move((1, 1), Action.UP) == (1, 1)      # obstacle
    assert w.move((1, 1), Action.LEFT) == (0, 1)
    assert w.move((0, 1), Action.LEFT) == (0, 1)    # wall
    assert w.move((1, 1), Action.DOWN) == (1, 0)
    assert w.index((2, 1)) == 5 and w.position(5) == (2, 1)


@pytest.mark.parametrize("text", ["", "..\n...\n@..\n", "@@\n", "@X\n", "..\n..\n"])
def test_bad_maps(text):
    with pytest.raises(MapParseError):
        load_map(text)


def test_map_roundtrip():
    w = default_map()
    assert load_map(dump_map(w)) == w
    assert (w.width, w.height) == (10, 10)
    assert set(w.cell_labels.values()) == {"wood", "grass", "iron", "crafttable", "smithtable",
                                           "gold"}
    assert w.reachable() == set(w.free_cells())


def test_step_task1_in_corridor():
    w = load_map(CORRIDOR)
    s = reset(w)
    s, lab, r = step(w, s, Action.LEFT, 1)
    assert (lab, r, s.matched, s.done) == ("wood", 0.0, 1, False)
    s, lab, r = step(w, s, Action.RIGHT, 1)
    assert (lab, r) == (None, 0.0)
    s, lab, r = step(w, s, Action.RIGHT, 1)
    assert (lab, r, s.completed, s.done) == ("crafttable", 1.0, True, True)
    assert s.history == ("wood", "crafttable")
    with pytest.raises(EpisodeFinished):
        step(w, s, Action.LEFT, 1)


def test_wrong_order_does_not_complete():
    w = load_map(CORRIDOR)
    s = reset(w)
    s, lab, r = step(w, s, Action.RIGHT, 1)
    assert lab == "crafttable" and s.matched == 0 and not s.done


def test_budget_ends_episode():
    w = load_map(CORRIDOR)
    ep = Episode(w, 1, budget=3)
    for _ in range(3):
        ep.step(Action.UP)
    assert ep.state.done and not ep.state.completed
    assert ep.labels == [None, None, None]


def test_get_task():
    assert get_task(3).required_sequence == ("wood", "grass", "iron", "crafttable")
    assert get_task("7") is TASKS[7]
    assert get_task(TASKS[2]) is TASKS[2]
    with pytest.raises(ValueError):
        get_task(8)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 7), st.lists(st.sampled_from(["wood", "grass", "iron", "crafttable",
                                                      "smithtable", "gold", None]), max_size=12))
def test_progress_matches_subsequence(task, history):
    spec = TASKS[task]
    matched = 0
    for lab in history:
        matched = spec.progress(matched, lab)
    labelled = [lab for lab in history if lab is not None]
    assert (matched == len(spec.required_sequence)) == spec.matches(labelled)


def test_two_cell_map():
    w = load_map("@W\n")
    assert w.start == (0, 0) and w.cell_labels == {(1, 0): "wood"}


def test_map_without_start_cell():
    with pytest.raises(MapParseError):
        load_map("~W\n")


def test_default_map_reaches_every_task_label():
    w = default_map()
    assert w.start == (4, 4)
    reach = w.reachable()
    assert not reach & w.obstacles
    for spec in TASKS.values():
        for lab in spec.required_sequence:
            assert any(pos in reach for pos, l in w.cell_labels.items() if l == lab)
