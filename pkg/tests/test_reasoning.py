import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from langnav import prompts
from langnav.errors import ContractViolation, ParseError, ReasoningError
from langnav.frontier import FrontierContext
from langnav.llm import OracleModel, ScriptedModel
from langnav.reasoning import (PromptDecorators, ThoughtState, ToTConfig, ToTMode, build_frontier_query,
                               parse_conclusion, select_frontier, tot_search)

from oracles import RandomTree, exhaustive_best_leaf, greedy_leaf

NO_MODEL = ScriptedModel(default="")


def leaf_of(answer: str) -> tuple[str, ...]:
    return tuple(answer.removeprefix("answer:").split("/"))


@pytest.mark.parametrize("seed", range(40))
def test_wide_beam_finds_exhaustive_best(seed):
    rng = random.Random(seed)
    k, T = rng.randint(1, 4), rng.randint(1, 3)
    tree = RandomTree(seed, k, T)
    got = tot_search("x", NO_MODEL, tree.gen, k, tree.evaluate, T, b=k ** T)
    assert leaf_of(got) == exhaustive_best_leaf(tree)


@pytest.mark.parametrize("seed", range(40))
def test_unit_beam_is_greedy(seed):
    rng = random.Random(seed)
    k, T = rng.randint(1, 4), rng.randint(1, 3)
    tree = RandomTree(seed, k, T)
    got = tot_search("x", NO_MODEL, tree.gen, k, tree.evaluate, T, b=1)
    assert leaf_of(got) == greedy_leaf(tree)


def test_trace_records_kept_states():
    tree = RandomTree(1, 3, 2)
    trace: list = []
    tot_search("x", NO_MODEL, tree.gen, 3, tree.evaluate, 2, b=2, trace=trace)
    assert [len(level) for level in trace] == [2, 2]
    assert all(level[0].value >= level[1].value for level in trace)


def test_search_arguments_are_checked():
    tree = RandomTree(0, 2, 2)
    with pytest.raises(ContractViolation):
        tot_search("x", NO_MODEL, tree.gen, 0, tree.evaluate, 1, 1)
    with pytest.raises(ContractViolation):
        ThoughtState(())


def test_failing_evaluator_surfaces_partial_tree():
    tree = RandomTree(0, 2, 3)
    calls = {"n": 0}

    def evaluate(model, states):
        calls["n"] += 1
        if calls["n"] == 2:
            raise RuntimeError("backend down")
        return tree.evaluate(model, states)

    with pytest.raises(ReasoningError) as err:
        tot_search("x", NO_MODEL, tree.gen, 2, evaluate, 3, 2)
    assert len(err.value.partial) == 2  # root level plus one completed step


def test_evaluator_length_mismatch_is_an_error():
    tree = RandomTree(0, 2, 1)
    with pytest.raises(ReasoningError):
        tot_search("x", NO_MODEL, tree.gen, 2, lambda m, s: [0.5], 1, 1)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 64), st.integers(0, 100), st.data())
def test_conclusion_round_trip(n, p, data):
    i = data.draw(st.integers(1, n))
    choice = parse_conclusion("some reasoning first.\n" + prompts.conclusion(i, p), n)
    assert choice.location_index == i and choice.likelihood == pytest.approx(p / 100)


def test_last_location_mention_wins_and_bad_replies_raise():
    text = "location #2 looks good but location #3 is better. Conclusion, location #3 with highest likelihood 40%."
    assert parse_conclusion(text, 3).location_index == 3
    assert parse_conclusion("Go to location #1.", 2).likelihood is None
    with pytest.raises(ParseError):
        parse_conclusion("no idea", 3)
    with pytest.raises(ParseError):
        parse_conclusion("Conclusion, location #4 with highest likelihood 10%.", 3)


CONTEXTS = [FrontierContext(0, "hallway", ("shoe rack",), 1.0),
            FrontierContext(1, "kitchen", ("fridge", "counter"), 3.0),
            FrontierContext(2, "unknown area", (), 0.5)]


def test_query_lists_locations_in_order():
    q = build_frontier_query("a mug", CONTEXTS)
    lines = q.splitlines()
    assert lines[0] == "location #1, located near hallway, where {shoe rack} are also found."
    assert lines[2] == "location #3, located near unknown area, where nothing is yet found."
    assert "pick one single location where a mug is most likely to occur" in q
    with pytest.raises(ContractViolation):
        build_frontier_query("a mug", [])


@pytest.mark.parametrize("mode", list(ToTMode))
def test_oracle_picks_kitchen_for_a_mug_in_every_mode(mode):
    choice = select_frontier("a mug", CONTEXTS, OracleModel(), ToTConfig(mode=mode, k=2, T=1, b=1))
    assert choice.location_index == 2


def test_single_shot_prompt_carries_decorators_and_direct_does_not():
    seen = []

    def reply(prompt):
        seen.append(prompt)
        return prompts.conclusion(1, 50)

    model = ScriptedModel([("location #1", reply)])
    deco = PromptDecorators.default()
    select_frontier("a mug", CONTEXTS, model, ToTConfig(mode=ToTMode.SINGLE_SHOT), deco)
    select_frontier("a mug", CONTEXTS, model, ToTConfig(mode=ToTMode.DIRECT), deco)
    assert seen[0].startswith(deco.all()) and deco.decomposition not in seen[1]


def test_programmatic_mode_runs_generate_evaluate_and_final():
    model = ScriptedModel([
        ("next steps", "1. check the kitchen\n2. check the hallway"),
        ("percentage", "about 80%"),
    ], default=prompts.conclusion(2, 70))
    choice = select_frontier("a mug", CONTEXTS, model, ToTConfig(k=2, T=2, b=2, mode=ToTMode.PROGRAMMATIC))
    assert choice.location_index == 2 and choice.likelihood == pytest.approx(0.7)


def test_backend_failure_becomes_reasoning_error():
    with pytest.raises(ReasoningError):
        select_frontier("a mug", CONTEXTS, ScriptedModel(), ToTConfig())


def test_decorators_override_from_file(tmp_path):
    p = tmp_path / "d.json"
    p.write_text('{"search": "Pick the best."}')
    d = PromptDecorators.from_file(p)
    assert d.search == "Pick the best." and d.generation == PromptDecorators.default().generation


def test_k3_t2_b3_returns_the_best_of_all_nine_leaves():
    tree = RandomTree(17, 3, 2)
    leaves = [(a, b) for a in tree.children(()) for b in tree.children((a,))]
    assert len(leaves) == 9
    got = leaf_of(tot_search("x", NO_MODEL, tree.gen, 3, tree.evaluate, 2, b=3))
    assert got == exhaustive_best_leaf(tree)
    assert tree.value(got) == max(tree.value(leaf) for leaf in leaves)


def test_shipped_table_sends_a_laptop_to_the_office():
    ctxs = [FrontierContext(0, "bathroom", ("toilet",), 1.0), FrontierContext(1, "office", ("desk", "chair"), 2.0)]
    table = OracleModel().table
    assert table.score("laptop", "desk") > table.score("laptop", "toilet")
    assert select_frontier("a laptop", ctxs, OracleModel()).location_index == 2
