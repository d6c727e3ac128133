"""Deterministic co-occurrence backend.

Stands in for an LLM's commonsense: it reads the location lines of a
frontier query and scores each one from an affinity table, and it answers
goal-identification prompts by checking that every known term of the target
description shows up in the scene text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..errors import ConfigError, OracleError
from .. import prompts
from .base import DEFAULT_PARAMS, CompletionParams


@dataclass
class AffinityTable:
    scores: dict[str, dict[str, float]]
    default_score: float = 0.0
    attributes: tuple[str, ...] = ()
    _lexicon: re.Pattern | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        for goal, row in self.scores.items():
            for term, v in row.items():
                if not isinstance(v, (int, float)) or v != v or v in (float("inf"), float("-inf")):
                    raise ConfigError(f"affinity ({goal}, {term}) is not finite")

    def score(self, goal: str, term: str) -> float:
        return self.scores.get(goal, {}).get(term, self.default_score)

    @property
    def goals(self) -> list[str]:
        return list(self.scores)

    def terms(self) -> set[str]:
        out = set(self.scores)
        for row in self.scores.values():
            out.update(row)
        return out | set(self.attributes)

    def lexicon(self) -> re.Pattern:
        """Regex over every known phrase, longest first, on word boundaries."""
        if self._lexicon is None:
            words = sorted(self.terms(), key=lambda w: (-len(w), w))
            self._lexicon = re.compile(r"\b(" + "|".join(re.escape(w) for w in words) + r")\b")
        return self._lexicon

    @classmethod
    def from_dict(cls, data: dict) -> "AffinityTable":
        if "scores" not in data:
            raise ConfigError("affinity table needs 'scores'")
        return cls({g: dict(r) for g, r in data["scores"].items()},
                   float(data.get("default_score", 0.0)), tuple(data.get("attributes", ())))


def load_affinity(path: str | Path | None = None) -> AffinityTable:
    if path is None:
        text = resources.files("langnav.data").joinpath("affinity.json").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read affinity table: {exc}") from exc
    return AffinityTable.from_dict(json.loads(text))


class OracleModel:
    deterministic = True

    def __init__(self, table: AffinityTable | None = None):
        self.table = table or load_affinity()

    def complete(self, prompt: str, params: CompletionParams = DEFAULT_PARAMS) -> str:
        if prompts.QUERY_SENTINEL in prompt:
            return self._frontier_answer(prompt)
        m = prompts.IDENTIFY_RE.search(prompt)
        if m:
            return self._identify(m.group(1), m.group(2))
        raise OracleError(f"unrecognised prompt shape: {prompt[:60]!r}")

    def goal_of(self, phrase: str) -> str:
        phrase = phrase.lower()
        for goal in sorted(self.table.goals, key=lambda g: (-len(g), g)):
            if re.search(r"\b" + re.escape(goal) + r"\b", phrase):
                return goal
        raise OracleError(f"no known goal category in {phrase!r}")

    def location_scores(self, prompt: str) -> list[tuple[int, float]]:
        goal_m = prompts.GOAL_RE.search(prompt)
        if goal_m is None:
            raise OracleError("frontier query without a goal phrase")
        goal = self.goal_of(goal_m.group(1))
        out = []
        for m in prompts.LOCATION_RE.finditer(prompt):
            index, room, objects = int(m.group(1)), m.group(2), m.group(3)
            objs = [o.strip() for o in objects.split(",")] if objects else []
            best_obj = max((self.table.score(goal, o) for o in objs), default=0.0)
            room_score = 0.0 if room == "unknown area" else self.table.score(goal, room)
            out.append((index, best_obj + room_score))
        if not out:
            raise OracleError("frontier query without location lines")
        return out

    def _frontier_answer(self, prompt: str) -> str:
        scores = self.location_scores(prompt)
        # max() keeps the first maximal element: ties go to the lowest index.
        index, score = max(sorted(scores), key=lambda p: p[1])
        percent = round(100 * min(1.0, max(0.0, score)))
        return prompts.conclusion(index, percent)

    def _identify(self, scene: str, target: str) -> str:
        lex = self.table.lexicon()
        terms = set(lex.findall(target.lower()))
        found = set(lex.findall(scene.lower()))
        return "yes" if terms and terms <= found else "no"
