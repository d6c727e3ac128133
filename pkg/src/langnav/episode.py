"""Episode and result records, with their JSON forms."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ContractViolation, SuiteError
from .world import Action, AgentPose


class Split(str, enum.Enum):
    UNCOMMON = "Uncommon"
    APPEARANCE = "Appearance"
    SPACE = "Space"
    APPEARANCE_DISTRACT = "AppearanceDistract"
    SPACE_DISTRACT = "SpaceDistract"
    HIDDEN = "Hidden"
    HIDDEN_DISTRACT = "HiddenDistract"
    CATEGORY_ONLY = "CategoryOnly"


DEFAULT_SPLITS = tuple(s for s in Split if s is not Split.CATEGORY_ONLY)

# Column headers in the order the benchmark table prints them.
SPLIT_LABELS = {
    Split.UNCOMMON: "Unc.",
    Split.APPEARANCE: "App.",
    Split.SPACE: "Space",
    Split.APPEARANCE_DISTRACT: "App. dist.",
    Split.SPACE_DISTRACT: "Space dist.",
    Split.HIDDEN: "Hid.",
    Split.HIDDEN_DISTRACT: "Hid. dist.",
    Split.CATEGORY_ONLY: "Cat.",
}


class Termination(str, enum.Enum):
    STOPPED = "Stopped"
    STEP_BUDGET = "StepBudget"
    REASONING_FALLBACK_EXHAUSTED = "ReasoningFallbackExhausted"
    ERROR = "Error"  # the episode raised; recorded as a failure


@dataclass(frozen=True)
class Instruction:
    text: str
    goal_category: str
    attribute_terms: tuple[str, ...] = ()
    relation_terms: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.text or not self.goal_category:
            raise ContractViolation("instruction needs text and a goal category")

    def to_dict(self) -> dict:
        return {"text": self.text, "goal_category": self.goal_category,
                "attribute_terms": list(self.attribute_terms), "relation_terms": list(self.relation_terms)}

    @classmethod
    def from_dict(cls, d: dict) -> "Instruction":
        return cls(d["text"], d["goal_category"], tuple(d.get("attribute_terms", ())),
                   tuple(d.get("relation_terms", ())))


@dataclass(frozen=True)
class Episode:
    id: str
    world_ref: str
    start: AgentPose
    instruction: Instruction
    goal_instance_id: str
    split: Split
    seed: int = 0

    def to_dict(self) -> dict:
        return {"id": self.id, "world_ref": self.world_ref, "start": self.start.to_dict(),
                "instruction": self.instruction.to_dict(), "goal_instance_id": self.goal_instance_id,
                "split": self.split.value, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "Episode":
        try:
            return cls(d["id"], d["world_ref"], AgentPose.from_dict(d["start"]),
                       Instruction.from_dict(d["instruction"]), d["goal_instance_id"], Split(d["split"]),
                       int(d.get("seed", 0)))
        except (KeyError, ValueError, ContractViolation) as exc:
            raise SuiteError(f"bad episode record {d.get('id', '?')}: {exc}") from exc


@dataclass
class EpisodeResult:
    episode_id: str
    split: Split
    success: bool
    actions: list[Action]
    path_length_m: float
    optimal_length_m: float | None
    termination: Termination
    transcript_ref: str | None = None
    rejected_ids: list[str] = field(default_factory=list)
    final_pose: AgentPose | None = None
    model_backend: str = ""
    error: str | None = None
    # Final semantic map, kept in memory for reports and renders; not part of the JSON record.
    map_snapshot: dict | None = field(default=None, repr=False, compare=False)

    @property
    def steps(self) -> int:
        return len(self.actions)

    def spl_term(self) -> float:
        if not self.success:
            return 0.0
        l, p = self.optimal_length_m or 0.0, self.path_length_m
        return 1.0 if max(p, l) == 0 else l / max(p, l)

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id, "split": self.split.value, "success": self.success,
            "actions": [a.value for a in self.actions], "steps": self.steps,
            "path_length_m": self.path_length_m, "optimal_length_m": self.optimal_length_m,
            "termination": self.termination.value, "transcript_ref": self.transcript_ref,
            "rejected_ids": list(self.rejected_ids),
            "final_pose": self.final_pose.to_dict() if self.final_pose else None,
            "model_backend": self.model_backend, "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeResult":
        return cls(d["episode_id"], Split(d["split"]), bool(d["success"]), [Action(a) for a in d["actions"]],
                   float(d["path_length_m"]), d.get("optimal_length_m"), Termination(d["termination"]),
                   d.get("transcript_ref"), list(d.get("rejected_ids", [])),
                   AgentPose.from_dict(d["final_pose"]) if d.get("final_pose") else None,
                   d.get("model_backend", ""), d.get("error"))


class Transcript:
    """Append-only per-episode event log, written as JSON lines."""

    def __init__(self):
        self.records: list[dict] = []
        self.step = 0

    def log(self, event: str, **fields) -> None:
        self.records.append({"t": self.step, "event": event, **fields})

    def sink(self, record: dict) -> None:
        self.records.append({"t": self.step, **record})

    def dumps(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())
