import json
import random
import re

import numpy as np
import pytest

from langnav import prompts
from langnav.agent import AgentConfig, Policy
from langnav.bench.ablation import AblationReport, run_ablation, variants
from langnav.bench.metrics import compute_metrics, group_metrics
from langnav.bench.render import END, GOAL, START, gradient, read_ppm, render_image, render_trajectory, replay
from langnav.bench.runner import CSV_COLUMNS, load_report, run_suite
from langnav.bench.suite import SuiteParams, audit_episode, generate_suite, load_suite, write_suite
from langnav.config import RunConfig
from langnav.episode import Episode, EpisodeResult, Instruction, Split, Termination
from langnav.errors import ConfigError, MetricError, SuiteError
from langnav.llm import ModelConfig, ScriptedModel
from langnav.world import Action, AgentPose

from oracles import METRIC_CASES, fuzzed_rows, metrics_by_hand


def result(success, optimal, path, split=Split.UNCOMMON, i=0):
    return EpisodeResult(f"e{i:03d}", split, success, [], path, optimal, Termination.STOPPED)


@pytest.mark.parametrize("rows, want", METRIC_CASES)
def test_metrics_fixture_table(rows, want):
    results = [result(*r, i=i) for i, r in enumerate(rows)]
    if want is None:
        with pytest.raises(MetricError):
            compute_metrics(results)
        return
    assert compute_metrics(results) == want
    assert metrics_by_hand(rows) == pytest.approx(want)


def test_spl_never_exceeds_sr_and_order_does_not_matter():
    rng = random.Random(5)
    for _ in range(300):
        rows = fuzzed_rows(rng)
        results = [result(*r, i=i) for i, r in enumerate(rows)]
        sr, spl = compute_metrics(results)
        assert 0 <= spl <= sr + 1e-9 <= 100 + 1e-9
        assert (sr, spl) == pytest.approx(metrics_by_hand(rows))
        rng.shuffle(results)
        assert compute_metrics(results) == pytest.approx((sr, spl))


def test_group_metrics_follow_split_order():
    rs = [result(True, 1, 1, Split.HIDDEN, 0), result(False, 1, 1, Split.UNCOMMON, 1)]
    assert list(group_metrics(rs)) == [Split.UNCOMMON, Split.HIDDEN]


# -- suite ------------------------------------------------------------------

SMALL = SuiteParams(worlds=2, episodes_per_split=2)


@pytest.fixture(scope="module")
def small_suite():
    return generate_suite(3, SMALL)


def test_suite_shape_ids_and_audit(small_suite):
    assert len(small_suite) == 2 * 2 * 7
    ids = [ep.id for _, ep in small_suite]
    assert len(set(ids)) == len(ids) and ids[0] == "w00-uncommon-00"
    for world, ep in small_suite:
        assert audit_episode(world, ep) == []
        if ep.split in (Split.SPACE, Split.SPACE_DISTRACT):
            assert ep.instruction.relation_terms
        if ep.split.value.endswith("Distract"):
            same = [o for o in world.objects if o.category == ep.instruction.goal_category]
            assert len(same) >= 2


def test_suite_is_deterministic_on_disk(tmp_path, small_suite):
    write_suite(tmp_path / "a", small_suite, 3, SMALL)
    write_suite(tmp_path / "b", generate_suite(3, SMALL), 3, SMALL)
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert files and all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)
    loaded = load_suite(tmp_path / "a")
    assert [e for _, e in loaded] == [e for _, e in small_suite]
    assert json.loads((tmp_path / "a" / "suite.json").read_text())["note"]


def test_suite_params_validation_and_bad_suite_dir(tmp_path):
    with pytest.raises(ConfigError):
        SuiteParams(worlds=0)
    with pytest.raises(SuiteError):
        load_suite(tmp_path)


# -- runner -----------------------------------------------------------------

ROOM_OF = {"laptop": "office", "mug": "kitchen", "apple": "kitchen"}


def always_right(prompt: str) -> str:
    goal = re.search(r"where (?:an?|the) (.+?) is most likely", prompt).group(1)
    room = next(r for cat, r in ROOM_OF.items() if cat in goal)
    lines = prompts.LOCATION_RE.findall(prompt)
    pick = next((int(i) for i, where, _ in lines if where == room), 1)
    return prompts.conclusion(pick, 90)


def identify(prompt: str) -> str:
    scene, target = prompts.IDENTIFY_RE.search(prompt).groups()
    words = [w for w in target.lower().split() if w not in ("behind", "the", "fridge")]
    return "yes" if all(w in scene for w in words) else "no"


SCRIPTED = ScriptedModel([(prompts.IDENTIFY_SENTINEL, identify), (prompts.QUERY_SENTINEL, always_right)])


@pytest.fixture
def fixture_suite(three_rooms):
    def ep(i, goal, cell, h, text, cat, attrs=(), rels=(), split=Split.APPEARANCE):
        return three_rooms, Episode(f"f{i}", "three_rooms", AgentPose(cell, h), Instruction(text, cat, attrs, rels),
                                    goal, split)
    return [ep(0, "laptop-1", (16, 5), 180, "Silver laptop", "laptop", ("silver",)),
            ep(1, "mug-1", (10, 8), 0, "White mug", "mug", ("white",)),
            ep(2, "apple-1", (2, 5), 0, "Apple behind the fridge", "apple", (), ("behind the fridge",), Split.HIDDEN)]


def test_scripted_always_right_model_solves_fixture_suite(fixture_suite):
    report = run_suite(fixture_suite, model=SCRIPTED, model_config=None)
    assert report.aggregate.sr == 100.0
    assert all(r.termination is Termination.STOPPED for r in report.results)


def test_parallel_matches_serial_and_csv_columns(fixture_suite):
    serial = run_suite(fixture_suite, AgentConfig(), ModelConfig())
    parallel = run_suite(fixture_suite, AgentConfig(), ModelConfig(), parallelism=8)
    assert serial.results == parallel.results and serial.transcripts == parallel.transcripts
    assert serial.fingerprint == parallel.fingerprint
    head, *rows = serial.to_csv().splitlines()
    assert tuple(head.split(",")) == CSV_COLUMNS and len(rows) == 3


def test_report_table_rows_and_round_trip(tmp_path, small_suite):
    report = run_suite(small_suite[::2], AgentConfig(policy=Policy.NEAREST, max_steps=40), ModelConfig())
    table = report.to_table().splitlines()
    assert len(table) == 1 + 7 + 1 + 3 and table[8].startswith("All")
    out = report.write(tmp_path / "run")
    again = load_report(out)
    assert again.to_csv() == report.to_csv() and again.to_table() == report.to_table()
    assert (out / "maps" / f"{report.results[0].episode_id}.json").exists()
    assert len(list((out / "transcripts").glob("*.jsonl"))) == len(report.results)


def test_crashing_episode_is_recorded_not_raised(fixture_suite):
    broken = ScriptedModel()  # every call raises ScriptError
    report = run_suite(fixture_suite[:1], AgentConfig(max_reasoning_failures=1000), model=broken,
                       model_config=None)
    r = report.results[0]
    assert not r.success and r.termination is Termination.ERROR and "ScriptError" in r.error
    assert report.backend_failures == ["f0"]
    with pytest.raises(SuiteError):
        run_suite([], model=broken, model_config=None)


# -- render -----------------------------------------------------------------

def test_gradient_endpoints_and_samples():
    g = gradient(11)
    assert len(g) == 11 and g[0] == START and g[-1] == END
    assert gradient(1) == [START]


def test_straight_run_has_eleven_samples(three_rooms, fixture_suite):
    _, ep = fixture_suite[0]
    ep = Episode(ep.id, ep.world_ref, AgentPose((1, 4), 0), ep.instruction, ep.goal_instance_id, ep.split)
    r = EpisodeResult("f0", ep.split, False, [Action.MOVE_AHEAD] * 10, 2.5, 1.0, Termination.STEP_BUDGET)
    assert [p.cell for p in replay(three_rooms, ep.start, r.actions)] == [(x, 4) for x in range(1, 12)]
    img, colors = render_image(three_rooms, ep, r)
    assert colors == gradient(11) and colors[0] == START and colors[-1] == END
    assert tuple(img[4 * 8 + 4, 11 * 8 + 4]) == END


def test_zero_action_render_is_a_valid_image(tmp_path, three_rooms, fixture_suite):
    _, ep = fixture_suite[0]
    r = EpisodeResult("f0", ep.split, False, [], 0.0, 1.0, Termination.STEP_BUDGET)
    path = render_trajectory(three_rooms, None, r, tmp_path / "z.ppm", ep)
    img = read_ppm(path)
    assert img.shape == (three_rooms.height * 8, three_rooms.width * 8, 3)
    x, y = ep.start.cell
    assert tuple(img[y * 8 + 4, x * 8 + 4]) == START


def test_render_is_stable_across_reruns(tmp_path, fixture_suite):
    report = run_suite(fixture_suite[:1], model_config=ModelConfig())
    world, ep = fixture_suite[0]
    r = report.results[0]
    a = render_trajectory(world, r.map_snapshot, r, tmp_path / "a.ppm", ep).read_bytes()
    again = run_suite(fixture_suite[:1], model_config=ModelConfig()).results[0]
    b = render_trajectory(world, again.map_snapshot, again, tmp_path / "b.ppm", ep).read_bytes()
    assert a == b and a.startswith(b"P6\n")
    img, _ = render_image(world, ep, r, r.map_snapshot)
    gx, gy = world.object(ep.goal_instance_id).position
    assert tuple(img[gy * 8, gx * 8]) == GOAL


# -- ablation ----------------------------------------------------------------

def test_ablation_rows_and_labels(fixture_suite, tmp_path):
    base = RunConfig()
    assert [v.label for v in variants("tot-prompts", base)] == ["NearestFrontier", "W/o ToT prompts", "ToT prompts"]
    with pytest.raises(ConfigError):
        variants("speed", base)
    rep = run_ablation(fixture_suite, "identifier", base)
    assert isinstance(rep, AblationReport) and [label for label, _ in rep.rows] == ["LLM", "AttributeMatch",
                                                                                    "CategoryOnly"]
    assert rep.sr("LLM") == 100.0
    out = rep.write(tmp_path)
    assert "ablation: identifier" in (out / "ablation.txt").read_text()
    assert len(json.loads((out / "ablation.json").read_text())["rows"]) == 3


def test_default_suite_passes_the_audit():
    suite = generate_suite(0)
    assert len(suite) == 350
    problems = [p for world, ep in suite for p in audit_episode(world, ep)]
    assert problems == []
