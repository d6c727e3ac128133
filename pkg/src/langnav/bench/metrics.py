"""Success rate and success-weighted path length, both in percent."""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum
from typing import Iterable, Sequence

from ..episode import EpisodeResult, Split
from ..errors import MetricError

SPL_NOTE = ("SPL = 100/N * sum(S_i * l_i / max(p_i, l_i)), with l_i the shortest path to any viewpoint "
            "within the success distance and p_i the distance travelled; the standard navigation definition.")


def compute_metrics(results: Sequence[EpisodeResult]) -> tuple[float, float]:
    if not results:
        raise MetricError("cannot compute metrics over zero episodes")
    n = len(results)
    sr = 100.0 * sum(1 for r in results if r.success) / n
    spl = 100.0 * fsum(r.spl_term() for r in results) / n
    return sr, spl


@dataclass(frozen=True)
class GroupMetrics:
    sr: float
    spl: float
    episodes: int

    def to_dict(self) -> dict:
        return {"sr": self.sr, "spl": self.spl, "episodes": self.episodes}


def group_metrics(results: Iterable[EpisodeResult]) -> dict[Split, GroupMetrics]:
    groups: dict[Split, list[EpisodeResult]] = {}
    for r in results:
        groups.setdefault(r.split, []).append(r)
    return {split: GroupMetrics(*compute_metrics(rs), len(rs))
            for split, rs in sorted(groups.items(), key=lambda kv: list(Split).index(kv[0]))}
