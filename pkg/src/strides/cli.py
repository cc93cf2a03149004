"""Batch harness: run instances in strides and/or direct mode, grade and report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .agents import AgentRole
from .backend import API_KEY_ENV, DEFAULT_URL, RecordingBackend, RemoteBackend, ReplayBackend, Transcript
from .errors import EmptyInput, StridesError, Unreadable
from .grader import ScoreBreakdown, aggregate, grade, render_json, render_text
from .orchestrator import PipelineConfig, RunRecord, run_direct_mode, run_pipeline
from .schema import BenchInstance, parse_instance

logger = logging.getLogger("strides")

EXIT_OK = 0
EXIT_PARTIAL = 2
EXIT_USAGE = 64
EXIT_NOINPUT = 66
DEFAULT_JOBS = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class HarnessConfig:
    instances_path: Path
    backend: str = "replay"
    transcript: Path | None = None
    model: str = "gpt-4o"
    base_url: str = DEFAULT_URL
    record: Path | None = None
    mode: str = "both"
    max_iterations: int = 3
    seed: int = 0
    grading: str = "lexical"
    out: Path = Path("out")
    jobs: int = DEFAULT_JOBS

    def __post_init__(self):
        if self.backend == "replay" and self.transcript is None:
            raise UsageError("--backend replay requires --transcript")
        if self.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        if self.max_iterations < 1:
            raise UsageError("--max-iters must be at least 1")

    @property
    def modes(self) -> tuple[str, ...]:
        return ("direct", "strides") if self.mode == "both" else (self.mode,)

    @property
    def workers(self) -> int:
        # Replay cursors are simplest to reason about with one run in flight.
        return 1 if self.backend == "replay" else self.jobs


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="strides", description="Propose and verify causal designs for policy instances.")
    p.add_argument("--instances", required=True, type=Path, help="line-delimited JSON instance file")
    p.add_argument("--mode", choices=("strides", "direct", "both"), default="both")
    p.add_argument("--backend", choices=("remote", "replay"), default="replay")
    p.add_argument("--transcript", type=Path, help="transcript file for the replay backend")
    p.add_argument("--model", default="gpt-4o", help="model name for the remote backend")
    p.add_argument("--base-url", default=DEFAULT_URL, help="chat-completions endpoint")
    p.add_argument("--record", type=Path, help="save every remote exchange to this transcript file")
    p.add_argument("--max-iters", type=int, default=3, dest="max_iterations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grading", choices=("lexical", "judge"), default="lexical")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--jobs", type=int, default=DEFAULT_JOBS)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_instances(path: str | Path) -> tuple[list[BenchInstance], list[str]]:
    """Valid instances in file order plus one message per malformed line."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise Unreadable(f"{path}: {exc}") from exc
    instances, errors = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            instances.append(parse_instance(line))
        except StridesError as exc:
            errors.append(f"line {lineno}: {type(exc).__name__}: {exc}")
    if not instances and not errors:
        logger.warning("%s contains no instances", path)
    return instances, errors


def _backend(cfg: HarnessConfig):
    if cfg.backend == "replay":
        try:
            return ReplayBackend(Transcript.load(cfg.transcript))
        except (OSError, ValueError, KeyError) as exc:
            raise Unreadable(f"{cfg.transcript}: {exc}") from exc
    remote = RemoteBackend(cfg.model, url=cfg.base_url, api_key_env=API_KEY_ENV)
    return RecordingBackend(remote) if cfg.record else remote


class _Sink:
    """Serialized line writer shared by worker threads."""

    def __init__(self, path: Path):
        self._fh = open(path, "w", encoding="utf-8")
        self._lock = threading.Lock()

    def write(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n"
        with self._lock:
            self._fh.write(line)
            self._fh.flush()

    def close(self):
        self._fh.close()


def _run_one(inst: BenchInstance, mode: str, cfg: HarnessConfig, pcfg: PipelineConfig, backend):
    runner = run_pipeline if mode == "strides" else run_direct_mode
    run = runner(inst, pcfg, backend)
    if run.final_design is None:
        score = ScoreBreakdown(comments=f"run failed: {run.error}", mode=cfg.grading)
    else:
        judge_cfg = pcfg.agent(AgentRole.Judge, f"{inst.instance_id}/{mode}")
        score = grade(run.final_design, inst.ground_truth, cfg.grading,
                      backend=backend if cfg.grading == "judge" else None, cfg=judge_cfg)
    return run, score


def run_harness(cfg: HarnessConfig) -> int:
    instances, errors = load_instances(cfg.instances_path)
    for err in errors:
        logger.error("skipping malformed instance (%s)", err)
    backend = _backend(cfg)
    pcfg = PipelineConfig(max_iterations=cfg.max_iterations, seed=cfg.seed)
    cfg.out.mkdir(parents=True, exist_ok=True)

    jobs = [(inst, mode) for mode in cfg.modes for inst in instances]
    runs_sink, scores_sink = _Sink(cfg.out / "runs.jsonl"), _Sink(cfg.out / "scores.jsonl")
    results: list[tuple[RunRecord, ScoreBreakdown, BenchInstance] | None] = [None] * len(jobs)

    def work(i: int):
        inst, mode = jobs[i]
        run, score = _run_one(inst, mode, cfg, pcfg, backend)
        results[i] = (run, score, inst)
        runs_sink.write(run.to_dict())
        scores_sink.write({"instance_id": inst.instance_id, "mode": mode, **score.to_dict()})
        logger.info("%s [%s] %s score %.3f", inst.instance_id, mode, run.status, score.normalized)

    try:
        if cfg.workers == 1:
            for i in range(len(jobs)):
                work(i)
        else:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                list(pool.map(work, range(len(jobs))))
    finally:
        runs_sink.close()
        scores_sink.close()
        if isinstance(backend, RecordingBackend) and cfg.record:
            backend.transcript.save(cfg.record)

    records = [r for r in results if r is not None]
    try:
        report = aggregate(records)
    except EmptyInput:
        (cfg.out / "report.txt").write_text("no instances graded\n", encoding="utf-8")
        (cfg.out / "report.json").write_text("{}\n", encoding="utf-8")
        return EXIT_PARTIAL if errors else EXIT_OK
    (cfg.out / "report.txt").write_text(render_text(report), encoding="utf-8")
    (cfg.out / "report.json").write_text(render_json(report), encoding="utf-8")
    sys.stdout.write(render_text(report))

    failed = sum(1 for run, _, _ in records if run.status != "ok")
    return EXIT_PARTIAL if failed or errors else EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = HarnessConfig(
            instances_path=args.instances, backend=args.backend, transcript=args.transcript, model=args.model,
            base_url=args.base_url, record=args.record, mode=args.mode, max_iterations=args.max_iterations,
            seed=args.seed, grading=args.grading, out=args.out, jobs=args.jobs,
        )
    except UsageError as exc:
        sys.stderr.write(parser.format_usage())
        sys.stderr.write(f"strides: error: {exc}\n")
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run_harness(cfg)
    except Unreadable as exc:
        sys.stderr.write(f"strides: cannot read input: {exc}\n")
        return EXIT_NOINPUT
    except StridesError as exc:
        sys.stderr.write(f"strides: {type(exc).__name__}: {exc}\n")
        return EXIT_PARTIAL


if __name__ == "__main__":
    raise SystemExit(main())
