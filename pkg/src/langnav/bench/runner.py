"""Run a suite over a worker pool and aggregate a report."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..agent import AgentConfig, run_episode
from ..episode import Episode, EpisodeResult, SPLIT_LABELS, Split, Termination, Transcript
from ..errors import BackendError, SuiteError
from ..llm import CompletionModel, ModelConfig, build_model
from ..llm.base import CompletionParams
from ..perception import PromptVocab, load_vocab
from ..reasoning import PromptDecorators, ToTConfig
from ..world import GridWorld, optimal_length
from .metrics import SPL_NOTE, GroupMetrics, compute_metrics, group_metrics

log = logging.getLogger(__name__)

CSV_COLUMNS = ("episode_id", "split", "success", "steps", "path_m", "optimal_m", "spl_term", "termination",
               "model_backend")


def fingerprint(configs: dict, suite: Sequence[tuple[GridWorld, Episode]]) -> str:
    """sha256 over every config section plus the episode records (which carry the seeds)."""
    payload = {"configs": configs, "episodes": [ep.to_dict() for _, ep in suite]}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


@dataclass
class SuiteReport:
    results: list[EpisodeResult]
    fingerprint: str
    configs: dict = field(default_factory=dict)
    transcripts: dict[str, str] = field(default_factory=dict, repr=False)
    backend_failures: list[str] = field(default_factory=list)  # episode ids with any failed completion call

    def __post_init__(self):
        if not self.results:
            raise SuiteError("a report needs at least one episode result")
        self.results = sorted(self.results, key=lambda r: r.episode_id)

    @property
    def splits(self) -> dict[Split, GroupMetrics]:
        return group_metrics(self.results)

    @property
    def aggregate(self) -> GroupMetrics:
        return GroupMetrics(*compute_metrics(self.results), len(self.results))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.results:
            w.writerow([r.episode_id, r.split.value, int(r.success), r.steps, f"{r.path_length_m:.2f}",
                        "" if r.optimal_length_m is None else f"{r.optimal_length_m:.2f}",
                        f"{r.spl_term():.6f}", r.termination.value, r.model_backend])
        return buf.getvalue()

    def to_table(self) -> str:
        lines = [f"{'split':<12} {'episodes':>8} {'SR':>7} {'SPL':>7}"]
        for split, g in self.splits.items():
            lines.append(f"{SPLIT_LABELS[split]:<12} {g.episodes:>8} {g.sr:>7.1f} {g.spl:>7.1f}")
        a = self.aggregate
        lines.append(f"{'All':<12} {a.episodes:>8} {a.sr:>7.1f} {a.spl:>7.1f}")
        lines += ["", f"config fingerprint: {self.fingerprint}", SPL_NOTE]
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {"fingerprint": self.fingerprint, "configs": self.configs, "aggregate": self.aggregate.to_dict(),
                "splits": {s.value: g.to_dict() for s, g in self.splits.items()}}

    def write(self, out_dir: str | Path, maps: bool = True) -> Path:
        out = Path(out_dir)
        for sub in ("episodes", "transcripts") + (("maps",) if maps else ()):
            (out / sub).mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(self.to_csv())
        (out / "report.txt").write_text(self.to_table())
        (out / "report.json").write_text(json.dumps(self.summary(), indent=1, sort_keys=True) + "\n")
        for r in self.results:
            (out / "episodes" / f"{r.episode_id}.json").write_text(json.dumps(r.to_dict(), sort_keys=True) + "\n")
            if r.episode_id in self.transcripts:
                (out / "transcripts" / f"{r.episode_id}.jsonl").write_text(self.transcripts[r.episode_id])
            if maps and r.map_snapshot is not None:
                (out / "maps" / f"{r.episode_id}.json").write_text(json.dumps(r.map_snapshot) + "\n")
        return out


def load_report(in_dir: str | Path) -> SuiteReport:
    root = Path(in_dir)
    try:
        summary = json.loads((root / "report.json").read_text())
        results = [EpisodeResult.from_dict(json.loads(p.read_text()))
                   for p in sorted((root / "episodes").glob("*.json"))]
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise SuiteError(f"cannot read run output in {root}: {exc}") from exc
    return SuiteReport(results, summary.get("fingerprint", ""), summary.get("configs", {}))


def _crashed(world: GridWorld, episode: Episode, cfg: AgentConfig, exc: BaseException) -> EpisodeResult:
    try:
        optimal = optimal_length(world, episode.start.cell, world.object(episode.goal_instance_id),
                                 cfg.success_distance)
    except Exception:  # the crash may come from the world itself
        optimal = None
    return EpisodeResult(episode.id, episode.split, False, [], 0.0, optimal, Termination.ERROR,
                         final_pose=episode.start, error=f"{type(exc).__name__}: {exc}")


def run_suite(suite: Sequence[tuple[GridWorld, Episode]], agent_config: AgentConfig = AgentConfig(),
              model_config: ModelConfig | None = ModelConfig(), tot_config: ToTConfig = ToTConfig(),
              parallelism: int = 1, *, model: CompletionModel | None = None,
              decorators: PromptDecorators | None = None, vocab: PromptVocab | None = None,
              base_dir: Path | None = None) -> SuiteReport:
    """Run every episode; crashes become failed rows annotated ``Error``.

    A given ``model`` is used instead of building one from ``model_config``;
    the config still supplies sampling params and the backend label. One
    model instance is shared across workers.
    """
    if not suite:
        raise SuiteError("suite is empty")
    if parallelism < 1:
        raise SuiteError("parallelism must be >= 1")
    decorators = decorators or PromptDecorators.default()
    vocab = vocab or load_vocab()
    if model is None and model_config is not None:
        model = build_model(model_config, base_dir)
    backend = model_config.backend if model_config is not None else type(model).__name__
    params = model_config.params if model_config is not None else CompletionParams()
    configs = {"agent": agent_config.to_dict(), "tot": tot_config.to_dict(),
               "llm": model_config.to_dict() if model_config is not None else {"backend": backend},
               "decorators": vars(decorators)}

    def one(item: tuple[GridWorld, Episode]) -> tuple[EpisodeResult, str, bool]:
        world, ep = item
        tr = Transcript()
        backend_failed = False
        try:
            result = run_episode(world, ep, agent_config, model, tot_config, vocab=vocab, decorators=decorators,
                                 params=params, transcript=tr)
        except Exception as exc:
            log.warning("episode %s crashed: %s", ep.id, exc)
            tr.log("crash", error=f"{type(exc).__name__}: {exc}", traceback=traceback.format_exc())
            result = _crashed(world, ep, agent_config, exc)
            backend_failed = isinstance(exc, BackendError)
        # Reasoning falls back to the nearest frontier, so a dead backend can
        # leave an episode running; the recorded call errors still count.
        backend_failed = backend_failed or any(r.get("event") == "llm" and r.get("response") is None
                                               for r in tr.records)
        result.model_backend = backend
        result.transcript_ref = f"transcripts/{ep.id}.jsonl"
        return result, tr.dumps(), backend_failed

    if parallelism == 1:
        triples = [one(item) for item in suite]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            triples = list(pool.map(one, suite))
    results = [r for r, _, _ in triples]
    transcripts = {r.episode_id: t for r, t, _ in triples}
    failed = sorted(r.episode_id for r, _, bad in triples if bad)
    return SuiteReport(results, fingerprint(configs, suite), configs, transcripts, failed)
