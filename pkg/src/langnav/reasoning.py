"""Tree-of-Thoughts frontier selection."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

from . import prompts
from .errors import ConfigError, ContractViolation, ParseError, ReasoningError
from .frontier import FrontierContext
from .llm.base import DEFAULT_PARAMS, CompletionModel, CompletionParams


class ToTMode(str, enum.Enum):
    PROGRAMMATIC = "Programmatic"
    SINGLE_SHOT = "SingleShot"
    DIRECT = "Direct"  # plain query, no decorators: the no-reasoning ablation


@dataclass(frozen=True)
class ToTConfig:
    k: int = 3
    T: int = 2
    b: int = 3
    mode: ToTMode = ToTMode.SINGLE_SHOT

    def __post_init__(self):
        if self.k < 1 or self.T < 1 or self.b < 1:
            raise ConfigError("ToT config needs k, T, b >= 1")
        object.__setattr__(self, "mode", ToTMode(self.mode))

    def to_dict(self) -> dict:
        return {"k": self.k, "T": self.T, "b": self.b, "mode": self.mode.value}


@dataclass(frozen=True)
class ThoughtState:
    thoughts: tuple[str, ...]
    value: float | None = None

    def __post_init__(self):
        if not self.thoughts:
            raise ContractViolation("a thought state starts with the input")

    def extend(self, thought: str) -> "ThoughtState":
        return ThoughtState(self.thoughts + (thought,))


@dataclass(frozen=True)
class FrontierChoice:
    location_index: int
    likelihood: float | None
    raw_text: str


@dataclass(frozen=True)
class PromptDecorators:
    decomposition: str
    generation: str
    evaluation: str
    search: str

    def __post_init__(self):
        for name in ("decomposition", "generation", "evaluation", "search"):
            if not getattr(self, name).strip():
                raise ConfigError(f"decorator {name!r} is empty")

    @classmethod
    def default(cls) -> "PromptDecorators":
        return cls(**json.loads(resources.files("langnav.data").joinpath("decorators.json").read_text()))

    @classmethod
    def from_file(cls, path: str | Path) -> "PromptDecorators":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read decorators: {exc}") from exc
        return cls(**{**vars(cls.default()), **data})

    def all(self) -> str:
        return "\n".join((self.decomposition, self.generation, self.evaluation, self.search))


ThoughtGenerator = Callable[[CompletionModel, ThoughtState, int], Sequence[str]]
StateEvaluator = Callable[[CompletionModel, Sequence[ThoughtState]], Sequence[float]]


def _rank(states: list[ThoughtState]) -> list[ThoughtState]:
    return sorted(states, key=lambda s: (-s.value, s.thoughts))


def tot_search(x: str, model: CompletionModel, gen: ThoughtGenerator, k: int, evaluate: StateEvaluator,
               T: int, b: int, *, final_gen: ThoughtGenerator | None = None,
               trace: list | None = None) -> str:
    """Breadth-limited tree search; returns one final generation from the best state.

    Ties between equal values go to the lexicographically smallest thought
    sequence. ``trace`` (if given) receives the kept state list per step.
    """
    if k < 1 or T < 1 or b < 1:
        raise ContractViolation("k, T and b must be >= 1")
    final_gen = final_gen or gen
    levels: list[list[ThoughtState]] = [[ThoughtState((x,))]]
    try:
        for _ in range(T):
            expanded = [s.extend(z) for s in levels[-1] for z in list(gen(model, s, k))[:k]]
            values = list(evaluate(model, expanded))
            if len(values) != len(expanded):
                raise ReasoningError("evaluator returned the wrong number of values", levels)
            scored = [replace(s, value=float(v)) for s, v in zip(expanded, values)]
            levels.append(_rank(scored)[:b])
            if trace is not None:
                trace.append(levels[-1])
        if not levels[-1]:
            raise ReasoningError("search ran out of states", levels)
        answer = list(final_gen(model, levels[-1][0], 1))
    except ReasoningError:
        raise
    except Exception as exc:
        raise ReasoningError(f"tree search failed: {exc}", levels) from exc
    if not answer:
        raise ReasoningError("final generation produced nothing", levels)
    return answer[0]


# -- frontier queries -----------------------------------------------------

def build_frontier_query(goal_phrase: str, contexts: Sequence[FrontierContext]) -> str:
    if not contexts:
        raise ContractViolation("frontier query needs at least one frontier")
    lines = [prompts.location_line(i, c.room, c.nearby_objects) for i, c in enumerate(contexts, start=1)]
    lines.append(prompts.FRONTIER_QUERY.format(goal=goal_phrase))
    lines.append(prompts.ANSWER_FORMAT)
    return "\n".join(lines)


_INDEX_RE = re.compile(r"location\s*#\s*(\d+)", re.IGNORECASE)
_PERCENT_RE = re.compile(r"(\d+(?:\.\d+)?)\s*%")


def parse_conclusion(text: str, n_locations: int) -> FrontierChoice:
    if n_locations < 1:
        raise ContractViolation("n_locations must be >= 1")
    matches = list(_INDEX_RE.finditer(text))
    if not matches:
        raise ParseError("no 'location #<i>' in reply", text)
    last = matches[-1]
    index = int(last.group(1))
    if not 1 <= index <= n_locations:
        raise ParseError(f"location #{index} outside 1..{n_locations}", text)
    likelihood = None
    pm = _PERCENT_RE.search(text, last.end())
    if pm and float(pm.group(1)) <= 100:
        likelihood = float(pm.group(1)) / 100
    return FrontierChoice(index, likelihood, text)


_NUMBERED = re.compile(r"^\s*(?:\d+[.)]|[-*])\s*")
_VALUE_RE = re.compile(r"(\d{1,3})\s*%")


class ModelThoughtGenerator:
    """Programmatic-mode generator: decomposition and generation decorators steer each call."""

    def __init__(self, decorators: PromptDecorators, params: CompletionParams = DEFAULT_PARAMS):
        self.decorators = decorators
        self.params = params

    def _prompt(self, state: ThoughtState, instruction: str) -> str:
        parts = [self.decorators.decomposition, self.decorators.generation, "", state.thoughts[0]]
        if len(state.thoughts) > 1:
            parts += ["", "Reasoning so far:"] + [f"- {t}" for t in state.thoughts[1:]]
        parts += ["", instruction]
        return "\n".join(parts)

    def __call__(self, model: CompletionModel, state: ThoughtState, k: int) -> list[str]:
        reply = model.complete(self._prompt(state, f"Write {k} different possible next steps, one per line."),
                               self.params)
        if k == 1:
            return [reply.strip()] if reply.strip() else []
        lines = [_NUMBERED.sub("", ln).strip() for ln in reply.splitlines()]
        return [ln for ln in lines if ln][:k]

    def final(self, model: CompletionModel, state: ThoughtState, k: int) -> list[str]:
        reply = model.complete(self._prompt(state, self.decorators.search), self.params)
        return [reply.strip()] if reply.strip() else []


class ModelStateEvaluator:
    """Asks for a percentage per state; the last integer percent is the value (0.5 if none)."""

    def __init__(self, decorators: PromptDecorators, params: CompletionParams = DEFAULT_PARAMS):
        self.decorators = decorators
        self.params = params

    def __call__(self, model: CompletionModel, states: Sequence[ThoughtState]) -> list[float]:
        values = []
        for s in states:
            prompt = "\n".join([s.thoughts[0], "", "Reasoning:", *(f"- {t}" for t in s.thoughts[1:]), "",
                                self.decorators.evaluation, "Reply with a percentage."])
            found = _VALUE_RE.findall(model.complete(prompt, self.params))
            values.append(min(int(found[-1]), 100) / 100 if found else 0.5)
        return values


def select_frontier(goal_phrase: str, contexts: Sequence[FrontierContext], model: CompletionModel,
                    config: ToTConfig = ToTConfig(), decorators: PromptDecorators | None = None,
                    params: CompletionParams = DEFAULT_PARAMS) -> FrontierChoice:
    decorators = decorators or PromptDecorators.default()
    query = build_frontier_query(goal_phrase, contexts)
    if config.mode is ToTMode.PROGRAMMATIC:
        gen = ModelThoughtGenerator(decorators, params)
        text = tot_search(query, model, gen, config.k, ModelStateEvaluator(decorators, params), config.T,
                          config.b, final_gen=gen.final)
    else:
        prompt = query if config.mode is ToTMode.DIRECT else decorators.all() + "\n\n" + query
        try:
            text = model.complete(prompt, params)
        except Exception as exc:
            raise ReasoningError(f"completion failed: {exc}") from exc
    return parse_conclusion(text, len(contexts))
