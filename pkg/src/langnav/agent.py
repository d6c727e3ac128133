"""Navigation policy loop, path planning and goal identification."""

from __future__ import annotations

import enum
import heapq
import logging
import math
import random
import re
from collections import deque
from dataclasses import asdict, dataclass
from typing import Sequence

from . import prompts
from .catalog import article
from .episode import Episode, EpisodeResult, Instruction, Termination, Transcript
from .errors import ConfigError, ParseError, ReasoningError
from .frontier import (Frontier, FrontierContext, cap_candidates, cluster_frontiers, extract_frontier_cells,
                       free_distances, summarize)
from .llm.base import DEFAULT_PARAMS, CompletionModel, CompletionParams, RecordingModel
from .mapping import FREE, OBSTACLE, UNKNOWN, SemanticMap, integrate_depth, integrate_semantics
from .perception import (DetectedObject, Detections, NoiseModel, PromptVocab, describe_scene, detect,
                         load_vocab)
from .raycast import Cell, line_cells
from .reasoning import PromptDecorators, ToTConfig, select_frontier
from .world import (NEIGHBORS4, ROTATION_STEP, Action, AgentPose, GridWorld, angle_diff, bearing,
                    optimal_length, sense_depth, step, visible_objects)

log = logging.getLogger(__name__)


class Policy(str, enum.Enum):
    TOT = "ToT"
    NEAREST = "NearestFrontier"
    RANDOM = "Random"


class Identifier(str, enum.Enum):
    LLM = "LLM"
    ATTRIBUTE_MATCH = "AttributeMatch"
    CATEGORY_ONLY = "CategoryOnly"


@dataclass(frozen=True)
class AgentConfig:
    max_steps: int = 500
    success_distance: float = 1.0
    fov: float = 90.0
    n_rays: int = 60
    max_range: float = 5.0
    policy: Policy = Policy.TOT
    identifier: Identifier = Identifier.LLM
    replan_interval: int = 8
    min_cluster_size: int = 2
    radius_m: float = 2.0
    max_candidates: int = 8
    identify_radius: float = 1.25
    max_reasoning_failures: int = 25
    miss_prob: float = 0.0
    false_pos_prob: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy(self.policy))
        object.__setattr__(self, "identifier", Identifier(self.identifier))
        for name in ("max_steps", "success_distance", "fov", "n_rays", "max_range", "replan_interval",
                     "min_cluster_size", "radius_m", "max_candidates", "identify_radius",
                     "max_reasoning_failures"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"agent config {name} must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["policy"] = self.policy.value
        d["identifier"] = self.identifier.value
        return d


# -- planning ---------------------------------------------------------------

_COST = {FREE: 1, UNKNOWN: 3}
SWEEP_DEG = 60
_HEADING_OF = {(1, 0): 0, (0, 1): 90, (-1, 0): 180, (0, -1): 270}


def rotations(heading: int, target: int) -> list[Action]:
    diff = (target - heading) % 360
    if diff <= 180:
        return [Action.ROTATE_RIGHT] * (diff // ROTATION_STEP)
    return [Action.ROTATE_LEFT] * ((360 - diff) // ROTATION_STEP)


def search_cells(m: SemanticMap, start: Cell, goals: Sequence[Cell]) -> list[Cell] | None:
    """Cheapest cell path from ``start`` to any goal (Free 1, Unknown 3, Obstacle blocked)."""
    goal_set = set(goals)
    if not goal_set:
        return None
    if start in goal_set:
        return [start]
    single = next(iter(goal_set)) if len(goal_set) == 1 else None

    def h(c: Cell) -> int:
        return abs(c[0] - single[0]) + abs(c[1] - single[1]) if single else 0

    occ = m.occ
    w, hgt = m.width, m.height
    g = {start: 0}
    parent: dict[Cell, Cell] = {}
    counter = 0
    heap = [(h(start), counter, start)]
    closed = set()
    while heap:
        _, _, c = heapq.heappop(heap)
        if c in closed:
            continue
        if c in goal_set:
            path = [c]
            while c in parent:
                c = parent[c]
                path.append(c)
            return path[::-1]
        closed.add(c)
        gc = g[c]
        for dx, dy in NEIGHBORS4:
            x, y = c[0] + dx, c[1] + dy
            if not (0 <= x < w and 0 <= y < hgt):
                continue
            state = occ[y, x]
            if state == OBSTACLE:
                continue
            n = (x, y)
            ng = gc + _COST[int(state)]
            if ng < g.get(n, math.inf):
                g[n] = ng
                parent[n] = c
                counter += 1
                heapq.heappush(heap, (ng + h(n), counter, n))
    return None


def cells_to_actions(path: Sequence[Cell], heading: int) -> list[Action]:
    actions: list[Action] = []
    for a, b in zip(path, path[1:]):
        target = _HEADING_OF[(b[0] - a[0], b[1] - a[1])]
        actions += rotations(heading, target)
        actions.append(Action.MOVE_AHEAD)
        heading = target
    return actions


def plan_path(m: SemanticMap, start: AgentPose | Cell, goal: Cell, heading: int = 0) -> list[Action] | None:
    """Action primitives along the cheapest path, or ``None`` when unreachable."""
    if isinstance(start, AgentPose):
        cell, heading = start.cell, start.heading
    else:
        cell = start
    path = search_cells(m, cell, [goal])
    return None if path is None else cells_to_actions(path, heading)


# -- goal identification -----------------------------------------------------

def relation_anchor(term: str) -> str:
    """``"on a dresser"`` -> ``"dresser"``."""
    return re.sub(r"^(?:on|near|under|behind|inside|next to|by|in)\s+(?:a|an|the)\s+", "", term.strip())


_HIDING_WORDS = ("under", "behind", "inside")


def hiding_anchors(instruction: Instruction) -> list[str]:
    """Furniture the goal is said to be tucked under, behind or inside."""
    return [relation_anchor(r) for r in instruction.relation_terms if r.split(" ", 1)[0] in _HIDING_WORDS]


def _mentions(text: str, phrase: str) -> bool:
    return re.search(r"\b" + re.escape(phrase.lower()) + r"\b", text.lower()) is not None


_YES_NO = re.compile(r"^\W*(yes|no)\b", re.IGNORECASE)


def identify_goal(instruction: Instruction, scene: str, model: CompletionModel | None,
                  identifier_kind: Identifier, params: CompletionParams = DEFAULT_PARAMS) -> bool:
    kind = Identifier(identifier_kind)
    if kind is Identifier.CATEGORY_ONLY:
        return _mentions(scene, instruction.goal_category)
    if kind is Identifier.ATTRIBUTE_MATCH:
        terms = [instruction.goal_category, *instruction.attribute_terms,
                 *(relation_anchor(r) for r in instruction.relation_terms)]
        return all(_mentions(scene, t) for t in terms)
    reply = model.complete(prompts.IDENTIFY.format(scene=scene, target=instruction.text), params)
    m = _YES_NO.match(reply)
    if m is None:
        log.info("unparsable identification reply treated as no: %r", reply[:80])
        return False
    return m.group(1).lower() == "yes"


def goal_phrase(instruction: Instruction) -> str:
    text = instruction.text.rstrip(".")
    return f"{article(text.lower())} {text[0].lower()}{text[1:]}"


# -- the episode loop ---------------------------------------------------------

@dataclass
class _Target:
    instance_id: str
    cell: Cell
    swept: bool = False  # look-around done at the current tier
    close: bool = False  # second tier: only viewpoints adjacent to the candidate


class _Episode:
    """Mutable per-episode state; one instance per ``run_episode`` call."""

    def __init__(self, world, episode, cfg, model, tot_cfg, vocab, decorators, params, transcript):
        self.world = world
        self.episode = episode
        self.cfg = cfg
        self.model = RecordingModel(model, transcript.sink) if model is not None else None
        self.tot_cfg = tot_cfg
        self.vocab = vocab
        self.decorators = decorators
        self.params = params
        self.tr = transcript
        self.noise = NoiseModel(cfg.miss_prob, cfg.false_pos_prob, seed=episode.seed)
        self.rng = random.Random(episode.seed)
        self.pose = episode.start
        self.map = SemanticMap.for_world(world)
        self.actions: list[Action] = []
        self.path_m = 0.0
        self.deny: list[str] = []
        self.target: _Target | None = None
        self.plan: deque[Action] = deque()
        self.plan_kind = ""
        self.since_plan = 0
        self.failures = 0
        self.idle = 0
        self.det: Detections | None = None
        self.anchors = set(hiding_anchors(episode.instruction))
        self.searched: set[str] = set()
        self.spots: list[Cell] = []

    # perception + mapping
    def observe(self) -> None:
        cfg = self.cfg
        scan = sense_depth(self.world, self.pose, cfg.fov, cfg.n_rays, cfg.max_range)
        self.det = detect(self.world, self.pose, self.vocab, self.noise, len(self.actions), cfg.fov,
                          cfg.max_range, cfg.n_rays)
        integrate_depth(self.map, scan)
        integrate_semantics(self.map, self.det)
        self.tr.log("observe", pose=self.pose.to_dict(), room=self.det.current_room,
                    objects=[o.instance_id for o in self.det.objects], explored=self.map.explored_count)

    def act(self, action: Action) -> None:
        new_pose, collided = step(self.world, self.pose, action)
        if action is Action.MOVE_AHEAD and not collided:
            self.path_m += self.world.cell_size
        self.pose = new_pose
        self.actions.append(action)
        self.since_plan += 1
        self.tr.log("action", action=action.value, collided=collided)
        self.tr.step = len(self.actions)
        if collided:
            self.plan.clear()

    def set_plan(self, actions: list[Action], kind: str) -> None:
        self.plan = deque(actions)
        self.plan_kind = kind
        self.since_plan = 0

    def needs_plan(self, kind: str) -> bool:
        return not self.plan or self.plan_kind != kind or self.since_plan >= self.cfg.replan_interval

    # candidates
    def pick_candidate(self) -> _Target | None:
        goal = self.episode.instruction.goal_category
        found = [(c, iid) for c, cat, iid in self.map.object_entries() if cat == goal and iid not in self.deny]
        if not found:
            return None
        dist = free_distances(self.map, self.pose.cell)
        c, iid = min(found, key=lambda p: (dist.get(p[0], math.inf),
                                           math.hypot(p[0][0] - self.pose.cell[0], p[0][1] - self.pose.cell[1]),
                                           p[1]))
        self.tr.log("candidate", instance_id=iid, cell=list(c))
        return _Target(iid, c)

    def viewpoint_ok(self, cell: Cell, target: Cell, close: bool = False) -> bool:
        if cell == target or self.map.state(cell) != FREE:
            return False
        if close and max(abs(cell[0] - target[0]), abs(cell[1] - target[1])) > 1:
            return False
        if math.hypot(cell[0] - target[0], cell[1] - target[1]) * self.map.cell_size > self.cfg.success_distance:
            return False
        return all(self.map.state(c) == FREE for c in line_cells(cell, target))

    def viewpoints(self, target: Cell, close: bool = False) -> list[Cell]:
        r = int(self.cfg.success_distance / self.map.cell_size) + 1
        out = []
        for y in range(target[1] - r, target[1] + r + 1):
            for x in range(target[0] - r, target[0] + r + 1):
                if self.map.in_bounds((x, y)) and self.viewpoint_ok((x, y), target, close):
                    out.append((x, y))
        return out

    def reject(self, reason: str) -> None:
        self.tr.log("reject", instance_id=self.target.instance_id, reason=reason)
        self.deny.append(self.target.instance_id)
        self.target = None
        self.plan.clear()

    def identification_scene(self, seen: DetectedObject) -> str:
        radius = self.cfg.identify_radius / self.map.cell_size
        tx, ty = seen.cell
        objs = [seen]
        ids = {seen.instance_id}
        near = lambda c: math.hypot(c[0] - tx, c[1] - ty) <= radius + 1e-9  # noqa: E731
        for o in self.det.objects:
            if o.instance_id not in ids and near(o.cell):
                objs.append(o)
                ids.add(o.instance_id)
        for c, cat, iid in self.map.object_entries():
            if iid not in ids and near(c):
                objs.append(DetectedObject(cat, (), c, iid))
                ids.add(iid)
        return describe_scene(Detections(tuple(objs), self.det.rooms, self.det.timestamp, self.pose))

    # returns the next action, or None when the episode should stop with Stop
    def handle_target(self) -> Action | str | None:
        t = self.target
        if self.plan and self.plan_kind == "inspect":
            return self.plan.popleft()
        if self.viewpoint_ok(self.pose.cell, t.cell, t.close):
            face = round(bearing(self.pose.cell, t.cell) / ROTATION_STEP) * ROTATION_STEP % 360
            turn = rotations(self.pose.heading, face)
            if turn:
                self.set_plan(turn, "face")
                return self.plan.popleft()
            seen = next((o for o in self.det.objects if o.instance_id == t.instance_id), None)
            if seen is None:
                self.reject("not re-detected at viewpoint")
                return "again"
            scene = self.identification_scene(seen)
            ok = identify_goal(self.episode.instruction, scene, self.model, self.cfg.identifier, self.params)
            self.tr.log("identify", instance_id=t.instance_id, scene=scene, match=ok)
            if ok:
                return None
            if not t.swept:
                # Context near the candidate may sit outside the view cone; look
                # either side once, then ask again.
                t.swept = True
                left, right = (face - SWEEP_DEG) % 360, (face + SWEEP_DEG) % 360
                self.set_plan(rotations(face, left) + rotations(left, right) + rotations(right, face), "inspect")
                return self.plan.popleft()
            if not t.close and self.viewpoints(t.cell, close=True) and not self.viewpoint_ok(
                    self.pose.cell, t.cell, close=True):
                # It may be occluded from here; check once more from right beside it.
                t.close, t.swept = True, False
                self.plan.clear()
                return self.handle_target()
            self.reject("identification said no")
            return "again"
        if self.needs_plan("approach"):
            path = search_cells(self.map, self.pose.cell, self.viewpoints(t.cell, t.close))
            if path is None:
                self.reject("no reachable viewpoint")
                return "again"
            self.set_plan(cells_to_actions(path, self.pose.heading), "approach")
        return self.plan.popleft()

    def choose_frontier(self) -> tuple[Frontier, float] | None:
        cfg = self.cfg
        frontiers = cluster_frontiers(extract_frontier_cells(self.map), cfg.min_cluster_size)
        if not frontiers:
            return None
        dist = free_distances(self.map, self.pose.cell)
        contexts = [summarize(self.map, f, self.pose.cell, cfg.radius_m, dist) for f in frontiers]
        self.tr.log("frontiers", frontiers=[{"size": f.size, "centroid": list(f.centroid), **c.to_dict()}
                                            for f, c in zip(frontiers, contexts)])
        by_distance = sorted(zip(frontiers, contexts), key=lambda p: (p[1].distance_from_agent, p[0].id))
        if cfg.policy is Policy.RANDOM:
            f, c = by_distance[self.rng.randrange(len(by_distance))]
            return f, c.distance_from_agent
        if cfg.policy is Policy.TOT:
            kept = cap_candidates(frontiers, contexts, cfg.max_candidates)
            try:
                choice = select_frontier(goal_phrase(self.episode.instruction), [c for _, c in kept], self.model,
                                         self.tot_cfg, self.decorators, self.params)
            except (ReasoningError, ParseError) as exc:
                self.failures += 1
                self.tr.log("fallback", reason=str(exc), failures=self.failures)
            else:
                f, c = kept[choice.location_index - 1]
                self.tr.log("choice", frontier_id=f.id, location_index=choice.location_index,
                            likelihood=choice.likelihood)
                return f, c.distance_from_agent
        f, c = by_distance[0]
        self.tr.log("choice", frontier_id=f.id, policy="nearest")
        return f, c.distance_from_agent

    def covers(self, spot: Cell) -> bool:
        ax, ay = self.pose.cell
        if max(abs(spot[0] - ax), abs(spot[1] - ay)) > 1:
            return False
        return spot == self.pose.cell or abs(angle_diff(bearing(self.pose.cell, spot),
                                                         self.pose.heading)) <= self.cfg.fov / 2

    def search_anchor(self) -> Action | None:
        """Look closely around mapped furniture the goal may be hidden by."""
        if self.plan and self.plan_kind == "search":
            return self.plan.popleft()
        while True:
            self.spots = [c for c in self.spots if not self.covers(c)]
            if not self.spots:
                dist = free_distances(self.map, self.pose.cell)
                pending = [(c, iid) for c, cat, iid in self.map.object_entries()
                           if cat in self.anchors and iid not in self.searched and c in dist]
                if not pending:
                    return None
                cell, iid = min(pending, key=lambda p: (dist[p[0]], p[1]))
                self.searched.add(iid)
                self.tr.log("search", instance_id=iid, cell=list(cell))
                self.spots = [(cell[0] + dx, cell[1] + dy) for dx, dy in NEIGHBORS4
                              if self.map.in_bounds((cell[0] + dx, cell[1] + dy))
                              and self.map.state((cell[0] + dx, cell[1] + dy)) == FREE]
                continue
            views = {}
            for spot in self.spots:
                for dx in (-1, 0, 1):
                    for dy in (-1, 0, 1):
                        v = (spot[0] + dx, spot[1] + dy)
                        if (dx or dy) and self.map.in_bounds(v) and self.map.state(v) == FREE:
                            views.setdefault(v, spot)
            path = search_cells(self.map, self.pose.cell, list(views))
            if path is None:
                self.spots = []
                continue
            spot = views[path[-1]]
            actions = cells_to_actions(path, self.pose.heading)
            heading = _HEADING_OF[(path[-1][0] - path[-2][0], path[-1][1] - path[-2][1])] if len(path) > 1 \
                else self.pose.heading
            face = round(bearing(path[-1], spot) / ROTATION_STEP) * ROTATION_STEP % 360
            actions += rotations(heading, face)
            if not actions:
                self.spots.remove(spot)
                continue
            self.set_plan(actions, "search")
            return self.plan.popleft()

    def explore(self) -> Action | None:
        if not self.needs_plan("frontier"):
            return self.plan.popleft()
        picked = self.choose_frontier()
        if picked is None:
            return None
        frontier, _ = picked
        dist = free_distances(self.map, self.pose.cell)
        goal = min(frontier.cells, key=lambda c: (dist.get(c, math.inf),
                                                  abs(c[0] - self.pose.cell[0]) + abs(c[1] - self.pose.cell[1]),
                                                  c[1], c[0]))
        path = search_cells(self.map, self.pose.cell, [goal])
        if path is None:
            return None
        actions = cells_to_actions(path, self.pose.heading)
        if not actions:
            actions = self.face_unknown(goal)
        self.set_plan(actions, "frontier")
        return self.plan.popleft()

    def face_unknown(self, cell: Cell) -> list[Action]:
        for dx, dy in NEIGHBORS4:
            n = (cell[0] + dx, cell[1] + dy)
            if self.map.in_bounds(n) and self.map.state(n) == UNKNOWN:
                turn = rotations(self.pose.heading, _HEADING_OF[(dx, dy)])
                if turn:
                    return turn
        return [Action.ROTATE_RIGHT]

    def run(self) -> EpisodeResult:
        cfg = self.cfg
        termination = Termination.STEP_BUDGET
        while len(self.actions) < cfg.max_steps:
            self.observe()
            if self.target is None:
                self.target = self.pick_candidate()
            action = None
            while self.target is not None:
                action = self.handle_target()
                if action != "again":
                    break
                action = None
                self.target = self.pick_candidate()
            if self.target is not None and action is None:
                self.actions.append(Action.STOP)
                self.tr.log("action", action=Action.STOP.value, collided=False)
                termination = Termination.STOPPED
                break
            if action is None and self.anchors:
                action = self.search_anchor()
            if action is None:
                action = self.explore()
                if self.failures >= cfg.max_reasoning_failures:
                    termination = Termination.REASONING_FALLBACK_EXHAUSTED
                    break
            if action is None:
                self.idle += 1
                if self.idle > 360 // ROTATION_STEP and cfg.false_pos_prob == 0:
                    # Nothing left to learn from this spot; spin out the budget.
                    self.fill_budget()
                    break
                action = Action.ROTATE_RIGHT
            else:
                self.idle = 0
            self.act(action)
        return self.result(termination)

    def fill_budget(self) -> None:
        while len(self.actions) < self.cfg.max_steps:
            self.act(Action.ROTATE_RIGHT)

    def result(self, termination: Termination) -> EpisodeResult:
        world, cfg = self.world, self.cfg
        goal = world.object(self.episode.goal_instance_id)
        success = False
        if termination is Termination.STOPPED:
            close = math.hypot(self.pose.cell[0] - goal.position[0],
                               self.pose.cell[1] - goal.position[1]) * world.cell_size <= cfg.success_distance
            seen = any(o.id == goal.id for o in visible_objects(world, self.pose, cfg.fov, cfg.max_range))
            success = close and seen
        return EpisodeResult(
            episode_id=self.episode.id, split=self.episode.split, success=success, actions=list(self.actions),
            path_length_m=round(self.path_m, 10),
            optimal_length_m=optimal_length(world, self.episode.start.cell, goal, cfg.success_distance),
            termination=termination, rejected_ids=list(self.deny), final_pose=self.pose,
            map_snapshot=self.map.snapshot())


def run_episode(world: GridWorld, episode: Episode, agent_config: AgentConfig = AgentConfig(),
                model: CompletionModel | None = None, tot_config: ToTConfig = ToTConfig(), *,
                vocab: PromptVocab | None = None, decorators: PromptDecorators | None = None,
                params: CompletionParams = DEFAULT_PARAMS, transcript: Transcript | None = None,
                ) -> EpisodeResult:
    needs_model = agent_config.policy is Policy.TOT or agent_config.identifier is Identifier.LLM
    if needs_model and model is None:
        raise ConfigError("this policy/identifier combination needs a completion model")
    transcript = transcript if transcript is not None else Transcript()
    state = _Episode(world, episode, agent_config, model, tot_config, vocab or load_vocab(),
                     decorators or PromptDecorators.default(), params, transcript)
    transcript.log("episode", episode_id=episode.id, instruction=episode.instruction.text,
                   start=episode.start.to_dict())
    result = state.run()
    transcript.log("result", success=result.success, termination=result.termination.value,
                   steps=result.steps, path_length_m=result.path_length_m)
    return result
