import math
import random

import numpy as np
import pytest

from langnav.mapping import (FREE, OBSTACLE, UNKNOWN, SemanticMap, explored_fraction, integrate_depth,
                             integrate_semantics, ray_cells)
from langnav.perception import DetectedObject, DetectedRoom, Detections
from langnav.world import Action, AgentPose, DepthScan, Ray, sense_depth, step

from conftest import open_world, random_world


def test_hit_inside_a_cell_marks_cells_before_it_free():
    m = SemanticMap(8, 1, 0.25)
    integrate_depth(m, DepthScan(AgentPose((0, 0), 0), (Ray(0.0, 1.0, True),), 5.0, 0.25))
    assert [m.state((x, 0)) for x in range(6)] == [FREE, FREE, FREE, FREE, OBSTACLE, UNKNOWN]


def test_miss_frees_cells_up_to_max_range():
    m = SemanticMap(8, 1, 0.25)
    integrate_depth(m, DepthScan(AgentPose((0, 0), 0), (Ray(0.0, 0.5, False),), 0.5, 0.25))
    assert [m.state((x, 0)) for x in range(4)] == [FREE, FREE, FREE, UNKNOWN]
    assert not (m.occ == OBSTACLE).any()


def test_hit_on_a_boundary_marks_the_entered_cell():
    m = SemanticMap(8, 3, 0.25)
    scan = DepthScan(AgentPose((0, 1), 0), (Ray(0.0, 0.625, True),), 5.0, 0.25)  # 2.5 cells
    integrate_depth(m, scan)
    assert [m.state((x, 1)) for x in range(4)] == [FREE, FREE, FREE, OBSTACLE]


def test_exact_corner_hit_claims_no_obstacle():
    free, hit = ray_cells(0.5, 0.5, 45.0, math.sqrt(2) / 2, True)
    assert hit is None and free == [(0, 0)]


def test_miss_frees_the_whole_ray_and_scan_is_clipped():
    m = SemanticMap(3, 1, 0.25)
    integrate_depth(m, DepthScan(AgentPose((0, 0), 0), (Ray(0.0, 5.0, False),), 5.0, 0.25))
    assert list(m.occ[0]) == [FREE, FREE, FREE]


def test_latest_observation_wins():
    m = SemanticMap(6, 3, 1.0)
    integrate_depth(m, DepthScan(AgentPose((0, 1), 0), (Ray(0.0, 1.5, True),), 5.0, 1.0))
    assert m.state((2, 1)) == OBSTACLE
    integrate_depth(m, DepthScan(AgentPose((0, 1), 0), (Ray(0.0, 3.5, True),), 5.0, 1.0))
    assert m.state((2, 1)) == FREE and m.state((4, 1)) == OBSTACLE


def test_explored_count_tracks_known_cells():
    w = open_world(10, 8)
    m = SemanticMap.for_world(w)
    integrate_depth(m, sense_depth(w, AgentPose((4, 4), 0)))
    assert m.explored_count == int(np.count_nonzero(m.occ))
    assert explored_fraction(m) == m.explored_count / 80


def test_semantics_first_room_label_wins_and_detections_free_cells():
    m = SemanticMap(6, 4, 0.25)
    m.occ[1, 1:4] = FREE
    d = Detections((DetectedObject("mug", (), (5, 3), "m1"),),
                   (DetectedRoom("kitchen", (0, 0, 2, 3)), DetectedRoom("office", (0, 0, 5, 3))), 0)
    integrate_semantics(m, d)
    assert m.state((5, 3)) == FREE
    assert m.room_at((1, 1)) == "kitchen" and m.room_at((3, 1)) == "office"
    assert m.room_at((0, 0)) is None  # still unknown, so unlabeled
    assert m.objects[(5, 3)] == {"m1": "mug"}


def test_snapshot_round_trip():
    w = open_world(10, 8)
    m = SemanticMap.for_world(w)
    integrate_depth(m, sense_depth(w, AgentPose((4, 4), 90)))
    m.objects[(4, 5)] = {"a": "apple"}
    again = SemanticMap.from_snapshot(m.snapshot())
    assert np.array_equal(again.occ, m.occ) and again.objects == m.objects
    assert again.explored_count == m.explored_count


@pytest.mark.parametrize("seed", range(8))
def test_soundness_along_random_walks(seed):
    rng = random.Random(seed)
    w = random_world(rng, 18, 14, density=0.25)
    pose = AgentPose(rng.choice(w.free_cells()), 0)
    m = SemanticMap.for_world(w)
    last = 0.0
    for _ in range(40):
        integrate_depth(m, sense_depth(w, pose, 90, 30, 3.0))
        ys, xs = np.nonzero(m.occ == OBSTACLE)
        assert all(w.walls[y, x] for y, x in zip(ys, xs))
        ys, xs = np.nonzero(m.occ == FREE)
        assert not any(w.walls[y, x] for y, x in zip(ys, xs))
        assert explored_fraction(m) >= last
        last = explored_fraction(m)
        pose, _ = step(w, pose, rng.choice([Action.MOVE_AHEAD, Action.MOVE_AHEAD, Action.ROTATE_RIGHT]))


def test_detections_are_idempotent_and_empty_is_identity():
    m = SemanticMap(8, 8, 0.25)
    d = Detections((DetectedObject("bowl", (), (5, 5), "b1"),), (), 0)
    integrate_semantics(m, d)
    integrate_semantics(m, d)
    assert m.object_entries() == [((5, 5), "bowl", "b1")]
    before = m.snapshot()
    integrate_semantics(m, Detections((), (), 1))
    assert m.snapshot() == before


def test_permuting_rays_without_conflicts_gives_identical_map():
    w = open_world(20, 20)
    scan = sense_depth(w, AgentPose((10, 10), 0), 360, 72, 2.0)
    rays = list(scan.rays)
    random.Random(3).shuffle(rays)
    a, b = SemanticMap.for_world(w), SemanticMap.for_world(w)
    integrate_depth(a, scan)
    integrate_depth(b, DepthScan(scan.pose, tuple(rays), scan.max_range, scan.cell_size))
    assert a.occ.tobytes() == b.occ.tobytes()


@pytest.mark.parametrize("seed", range(5))
def test_free_cells_agree_with_millimetre_marching(seed):
    # Marching samples points, so it can miss cells the ray only clips; it
    # must never report a cell the exact traversal leaves out.
    rng = random.Random(seed)
    w = random_world(rng, 14, 14, density=0.2)
    pose = AgentPose(rng.choice(w.free_cells()), rng.randrange(12) * 30)
    scan = sense_depth(w, pose, 90, 20, 2.0)
    m = SemanticMap.for_world(w)
    integrate_depth(m, scan)
    from langnav.raycast import direction
    for ray in scan.rays:
        dx, dy = direction(pose.heading + ray.angle_offset)
        d = 0.0
        while d < ray.range - 0.002:
            x = math.floor(pose.cell[0] + 0.5 + dx * d / w.cell_size)
            y = math.floor(pose.cell[1] + 0.5 + dy * d / w.cell_size)
            assert m.state((x, y)) == FREE
            d += 0.001
