"""Side-by-side comparisons over one suite: reasoning prompts and goal identifiers."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

from ..agent import Identifier, Policy
from ..config import RunConfig
from ..episode import SPLIT_LABELS, Episode, Split
from ..errors import ConfigError
from ..llm import CompletionModel, build_model
from ..reasoning import ToTMode
from ..world import GridWorld
from .runner import SuiteReport, run_suite

AXES = ("tot-prompts", "identifier")


@dataclass(frozen=True)
class Variant:
    label: str
    config: RunConfig


def variants(axis: str, base: RunConfig) -> list[Variant]:
    if axis == "tot-prompts":
        mode = base.tot.mode if base.tot.mode is not ToTMode.DIRECT else ToTMode.SINGLE_SHOT
        tot = replace(base, agent=replace(base.agent, policy=Policy.TOT))
        return [
            Variant("NearestFrontier", replace(base, agent=replace(base.agent, policy=Policy.NEAREST))),
            Variant("W/o ToT prompts", replace(tot, tot=replace(base.tot, mode=ToTMode.DIRECT))),
            Variant("ToT prompts", replace(tot, tot=replace(base.tot, mode=mode))),
        ]
    if axis == "identifier":
        return [Variant(kind.value, replace(base, agent=replace(base.agent, identifier=kind)))
                for kind in (Identifier.LLM, Identifier.ATTRIBUTE_MATCH, Identifier.CATEGORY_ONLY)]
    raise ConfigError(f"unknown ablation axis {axis!r}; choose from {', '.join(AXES)}")


@dataclass
class AblationReport:
    axis: str
    rows: list[tuple[str, SuiteReport]]

    def sr(self, label: str, split: Split | None = None) -> float:
        report = dict(self.rows)[label]
        return report.aggregate.sr if split is None else report.splits[split].sr

    def to_table(self) -> str:
        splits = list(self.rows[0][1].splits)
        width = max(len(label) for label, _ in self.rows) + 2
        head = f"{'variant':<{width}}" + "".join(f"{SPLIT_LABELS[s]:>13}" for s in splits) + f"{'All':>13}"
        lines = [f"ablation: {self.axis} (cells are SR/SPL)", head]
        for label, rep in self.rows:
            groups = rep.splits
            cells = [f"{groups[s].sr:.1f}/{groups[s].spl:.1f}" for s in splits]
            a = rep.aggregate
            cells.append(f"{a.sr:.1f}/{a.spl:.1f}")
            lines.append(f"{label:<{width}}" + "".join(f"{c:>13}" for c in cells))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"axis": self.axis, "rows": [{"variant": label, **rep.summary()} for label, rep in self.rows]}

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "ablation.txt").write_text(self.to_table())
        (out / "ablation.json").write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")
        return out


def run_ablation(suite: Sequence[tuple[GridWorld, Episode]], axis: str, base: RunConfig, parallelism: int = 1,
                 splits: Sequence[Split] | None = None, model: CompletionModel | None = None,
                 progress: Callable[[str], None] | None = None) -> AblationReport:
    if splits:
        wanted = {Split(s) for s in splits}
        suite = [(w, e) for w, e in suite if e.split in wanted]
    model = model or build_model(base.llm, base.base_dir)
    rows = []
    for v in variants(axis, base):
        if progress:
            progress(v.label)
        rows.append((v.label, run_suite(suite, v.config.agent, v.config.llm, v.config.tot, parallelism, model=model,
                                        decorators=v.config.decorators)))
    return AblationReport(axis, rows)
