"""Benchmark harness: dataset ingestion, batch runner, reports, and sweeps."""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
import random
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import orchestrator
from .backend import QueryCounter, ReplayBackend, RecordingBackend, ScriptedBackend
from .baselines import (
    Method,
    MethodCoT,
    MethodIO,
    MethodMACM,
    MethodSCCoT,
    solve_cot,
    solve_io,
    solve_sc_cot,
)
from .domain import (
    AgentCall,
    ConditionProposed,
    Event,
    Final,
    Problem,
    RunConfig,
    SamplingParams,
    Solved,
    StateChange,
    Transcript,
    VerdictEvent,
    outcome_from_dict,
    outcome_to_dict,
)
from .errors import (
    BackendFailure,
    BudgetExceeded,
    CassetteExhausted,
    CassetteMismatch,
    EmptyDataset,
    ParseFailure,
    SchemaError,
    ScriptExhausted,
    ScriptMismatch,
)
from .tasks import Game24Instance, equal_answers, needs_manual_review, verify_game24, verify_sorted

TASKS = ("math", "game24", "sorting")

_SOLVE_ERRORS = (ParseFailure, BudgetExceeded, BackendFailure,
                 ScriptExhausted, ScriptMismatch, CassetteMismatch, CassetteExhausted)


# ---------------------------------------------------------------------------
# Dataset ingestion
# ---------------------------------------------------------------------------

def _problem_from_record(record: dict, line: int) -> Problem:
    if not isinstance(record, dict):
        raise SchemaError(f"line {line}: expected a JSON object", line)
    for key in ("id", "question"):
        if not isinstance(record.get(key), str) or not record[key]:
            raise SchemaError(f"line {line}: missing or empty field {key!r}", line)
    level = record.get("level")
    if level is not None and (not isinstance(level, int) or not 1 <= level <= 5):
        raise SchemaError(f"line {line}: level must be an integer 1..5", line)
    return Problem(
        id=record["id"],
        question=record["question"],
        gold_answer=record.get("answer"),
        category=record.get("category"),
        level=level,
    )


def load_problems(path: str | Path, lenient: bool = False) -> list[Problem]:
    """Read a JSON Lines problem file. Bad lines abort with SchemaError unless
    ``lenient``, in which case they are reported to stderr and skipped."""
    problems: list[Problem] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                problem = _problem_from_record(record, lineno)
                if problem.id in seen_ids:
                    raise SchemaError(f"line {lineno}: duplicate id {problem.id!r}", lineno)
            except (json.JSONDecodeError, SchemaError, ValueError) as exc:
                if lenient:
                    import sys
                    print(f"skipping line {lineno}: {exc}", file=sys.stderr)
                    continue
                if isinstance(exc, SchemaError):
                    raise
                raise SchemaError(f"line {lineno}: {exc}", lineno) from exc
            seen_ids.add(problem.id)
            problems.append(problem)
    return problems


def load_game24_file(path: str | Path) -> list[Problem]:
    """One instance per line: 4 space-separated integers. The numbers are kept
    in gold_answer for the grader."""
    problems = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise SchemaError(f"line {lineno}: expected 4 integers", lineno)
            try:
                numbers = tuple(int(p) for p in parts)
                Game24Instance(numbers)
            except ValueError as exc:
                raise SchemaError(f"line {lineno}: {exc}", lineno) from exc
            problems.append(Problem(
                id=f"game24-{lineno}",
                question=(f"Use the numbers {numbers[0]}, {numbers[1]}, {numbers[2]}, "
                          f"{numbers[3]} exactly once each with + - * / and parentheses "
                          "to make an expression equal to 24."),
                gold_answer=" ".join(parts),
                category="game24",
            ))
    return problems


def load_sorting_file(path: str | Path) -> list[Problem]:
    """JSON Lines {"input": [int, ...]}. The input sequence is kept in
    gold_answer for the grader."""
    problems = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                seq = record["input"]
                if not isinstance(seq, list) or not all(isinstance(x, int) for x in seq):
                    raise SchemaError(f"line {lineno}: input must be a list of integers", lineno)
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise SchemaError(f"line {lineno}: {exc}", lineno) from exc
            problems.append(Problem(
                id=f"sorting-{lineno}",
                question=("Sort the following numbers in non-decreasing order and "
                          "output the sorted sequence: "
                          + " ".join(str(x) for x in seq)),
                gold_answer=" ".join(str(x) for x in seq),
                category="sorting",
            ))
    return problems


def sample_problems(problems: list[Problem], fraction: float, seed: int) -> list[Problem]:
    """Seeded-shuffle sample of round(fraction * len) problems."""
    if not 0 < fraction <= 1:
        raise ValueError("sample fraction must be in (0, 1]")
    shuffled = list(problems)
    random.Random(seed).shuffle(shuffled)
    count = max(1, round(fraction * len(problems))) if problems else 0
    return shuffled[:count]


# ---------------------------------------------------------------------------
# Grading
# ---------------------------------------------------------------------------

_INT_PATTERN = re.compile(r"-?\d+")
_REFUSAL = re.compile(r"\b(?:cannot|can't|unable to|refuse)\b", re.IGNORECASE)


def grade(task: str, problem: Problem, answer: str) -> bool:
    if task == "math":
        if problem.gold_answer is None:
            return False
        return equal_answers(answer, problem.gold_answer)
    if task == "game24":
        numbers = tuple(int(p) for p in problem.gold_answer.split())
        return verify_game24(Game24Instance(numbers), answer)
    if task == "sorting":
        input_seq = [int(p) for p in problem.gold_answer.split()]
        output_seq = [int(m.group()) for m in _INT_PATTERN.finditer(answer)]
        return verify_sorted(input_seq, output_seq)
    raise ValueError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# Transcript persistence
# ---------------------------------------------------------------------------

def _event_to_dict(event: Event) -> dict:
    if isinstance(event, AgentCall):
        return {"event": "agent_call", "role": event.role, "prompt": event.prompt,
                "raw_response": event.raw_response, "tokens_in": event.tokens_in,
                "tokens_out": event.tokens_out, "timestamp": event.timestamp,
                "n_choices": event.n_choices}
    if isinstance(event, ConditionProposed):
        return {"event": "condition_proposed", "text": event.text, "round": event.round}
    if isinstance(event, VerdictEvent):
        return {"event": "verdict", "subject": event.subject, "value": event.value}
    if isinstance(event, StateChange):
        return {"event": "state_change", "description": event.description, "data": event.data}
    if isinstance(event, Final):
        return {"event": "final", "outcome": outcome_to_dict(event.outcome)}
    raise TypeError(f"unknown event type {type(event)!r}")


def _event_from_dict(data: dict) -> Event:
    kind = data["event"]
    if kind == "agent_call":
        return AgentCall(role=data["role"], prompt=data["prompt"],
                         raw_response=data["raw_response"], tokens_in=data["tokens_in"],
                         tokens_out=data["tokens_out"], timestamp=data["timestamp"],
                         n_choices=data.get("n_choices", 1))
    if kind == "condition_proposed":
        return ConditionProposed(text=data["text"], round=data["round"])
    if kind == "verdict":
        return VerdictEvent(subject=data["subject"], value=data["value"])
    if kind == "state_change":
        return StateChange(description=data["description"], data=data.get("data", {}))
    if kind == "final":
        return Final(outcome_from_dict(data["outcome"]))
    raise ValueError(f"unknown event kind {kind!r}")


def _atomic_write(path: Path, content: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(content, encoding="utf-8")
    os.replace(tmp, path)


def write_transcript(transcript: Transcript, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps({"event": "meta", "run_id": transcript.run_id}, ensure_ascii=False)]
    lines += [json.dumps(_event_to_dict(e), ensure_ascii=False) for e in transcript.events]
    _atomic_write(path, "\n".join(lines) + "\n")


def read_transcript(path: str | Path) -> Transcript:
    run_id = None
    events: list[Event] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            data = json.loads(line)
            if data.get("event") == "meta":
                run_id = data.get("run_id")
                continue
            events.append(_event_from_dict(data))
    transcript = Transcript(run_id)
    transcript.events = events
    return transcript


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    id: str
    method: str
    outcome: dict
    correct: bool
    queries: int
    wall_ms: int
    transcript_path: str
    category: str | None = None
    refusal: bool = False
    needs_review: bool = False


@dataclass
class Report:
    rows: list[ReportRow]
    aggregates: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.aggregates:
            self.aggregates = compute_aggregates(self.rows)


def compute_aggregates(rows: list[ReportRow]) -> dict:
    overall = sum(r.correct for r in rows) / len(rows) if rows else 0.0
    by_category: dict[str, dict] = {}
    for row in rows:
        cat = row.category or "uncategorized"
        bucket = by_category.setdefault(cat, {"attempted": 0, "correct": 0})
        bucket["attempted"] += 1
        bucket["correct"] += int(row.correct)
    for bucket in by_category.values():
        bucket["accuracy"] = bucket["correct"] / bucket["attempted"]
    mean_queries = sum(r.queries for r in rows) / len(rows) if rows else 0.0
    return {
        "attempted": len(rows),
        "correct": sum(r.correct for r in rows),
        "accuracy": overall,
        "mean_queries": mean_queries,
        "by_category": by_category,
    }


def method_label(method: Method) -> str:
    if isinstance(method, MethodIO):
        return "io"
    if isinstance(method, MethodCoT):
        return "cot"
    if isinstance(method, MethodSCCoT):
        return "sc-cot"
    return "macm"


def _solve_one(problem: Problem, method: Method, backend,
               sampling: SamplingParams) -> Transcript:
    """Run one problem with the chosen method; always returns a finalized
    transcript."""
    if isinstance(method, MethodMACM):
        _, transcript = orchestrator.solve(problem, method.config, backend,
                                           run_id=problem.id)
        return transcript

    transcript = Transcript(run_id=problem.id)
    try:
        if isinstance(method, MethodIO):
            answer, _ = solve_io(problem, sampling, backend, transcript)
        elif isinstance(method, MethodCoT):
            answer, _ = solve_cot(problem, method.chain_length_l, sampling,
                                  backend, transcript)
        else:
            answer, _ = solve_sc_cot(problem, method.chain_length_l, method.voters_v,
                                     sampling, backend, transcript,
                                     majority=method.majority)
        transcript.append(Final(Solved(answer)))
    except _SOLVE_ERRORS as exc:
        transcript.append(Final(orchestrator._error_outcome(exc)))
    return transcript


def run_benchmark(problems: list[Problem], method: Method, backend_factory,
                  out_dir: str | Path, task: str = "math", parallelism: int = 1,
                  count_choices: bool = False,
                  sampling: SamplingParams | None = None) -> Report:
    """Solve every problem, grade it, and write one transcript file each.

    ``backend_factory(problem_id)`` must return a backend for that problem
    (scripted/replay backends are single-run). Individual problem failures
    become Error rows; the batch never aborts. Row order is by problem id,
    independent of parallelism.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    out_dir = Path(out_dir)
    transcripts_dir = out_dir / "transcripts"
    transcripts_dir.mkdir(parents=True, exist_ok=True)
    sampling = sampling or SamplingParams()
    label = method_label(method)

    def run_one(problem: Problem) -> ReportRow:
        backend = backend_factory(problem.id)
        start = time.monotonic()
        transcript = _solve_one(problem, method, backend, sampling)
        wall_ms = int((time.monotonic() - start) * 1000)
        outcome = transcript.outcome
        correct = False
        refusal = False
        needs_review = False
        if isinstance(outcome, Solved):
            correct = grade(task, problem, outcome.answer)
            refusal = bool(_REFUSAL.search(outcome.answer))
            if task == "math" and problem.gold_answer is not None:
                needs_review = (needs_manual_review(outcome.answer)
                                or needs_manual_review(problem.gold_answer))
        transcript_path = transcripts_dir / f"{problem.id}.jsonl"
        write_transcript(transcript, transcript_path)
        queries = transcript.choice_count() if count_choices else transcript.query_count()
        return ReportRow(
            id=problem.id,
            method=label,
            outcome=outcome_to_dict(outcome),
            correct=correct,
            queries=queries,
            wall_ms=wall_ms,
            transcript_path=str(transcript_path.relative_to(out_dir)),
            category=problem.category,
            refusal=refusal,
            needs_review=needs_review,
        )

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(run_one, problems))
    else:
        rows = [run_one(p) for p in problems]
    rows.sort(key=lambda r: r.id)
    return Report(rows=rows)


# ---------------------------------------------------------------------------
# Report persistence
# ---------------------------------------------------------------------------

_CSV_FIELDS = ["id", "method", "outcome_kind", "correct", "queries",
               "transcript_path", "category", "refusal", "needs_review"]


def report_to_dict(report: Report) -> dict:
    return {
        "rows": [{
            "id": r.id, "method": r.method, "outcome": r.outcome,
            "correct": r.correct, "queries": r.queries, "wall_ms": r.wall_ms,
            "transcript_path": r.transcript_path, "category": r.category,
            "refusal": r.refusal, "needs_review": r.needs_review,
        } for r in report.rows],
        "aggregates": report.aggregates,
    }


def report_from_dict(data: dict) -> Report:
    rows = [ReportRow(
        id=r["id"], method=r["method"], outcome=r["outcome"], correct=r["correct"],
        queries=r["queries"], wall_ms=r["wall_ms"], transcript_path=r["transcript_path"],
        category=r.get("category"), refusal=r.get("refusal", False),
        needs_review=r.get("needs_review", False),
    ) for r in data["rows"]]
    return Report(rows=rows, aggregates=data["aggregates"])


def load_report(path: str | Path) -> Report:
    with open(path, encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


def _report_csv_text(report: Report) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in report.rows:
        writer.writerow({
            "id": r.id, "method": r.method, "outcome_kind": r.outcome["kind"],
            "correct": r.correct, "queries": r.queries,
            "transcript_path": r.transcript_path, "category": r.category or "",
            "refusal": r.refusal, "needs_review": r.needs_review,
        })
    return buf.getvalue()


def _summary_md_text(report: Report) -> str:
    agg = report.aggregates
    lines = [
        "# Benchmark summary",
        "",
        "| Category | Attempted | Correct | Accuracy (%) |",
        "|---|---|---|---|",
    ]
    for cat in sorted(agg["by_category"]):
        bucket = agg["by_category"][cat]
        lines.append(f"| {cat} | {bucket['attempted']} | {bucket['correct']} "
                     f"| {bucket['accuracy'] * 100:.2f} |")
    lines.append(f"| **Overall** | {agg['attempted']} | {agg['correct']} "
                 f"| {agg['accuracy'] * 100:.2f} |")
    lines += ["", f"Mean queries per problem: {agg['mean_queries']:.2f}", ""]
    return "\n".join(lines)


def write_report(report: Report, out_dir: str | Path) -> None:
    """report.json (rows + aggregates), report.csv (rows), summary.md.
    All writes are atomic (temp file + rename)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / "report.json",
                  json.dumps(report_to_dict(report), indent=2, ensure_ascii=False) + "\n")
    _atomic_write(out_dir / "report.csv", _report_csv_text(report))
    _atomic_write(out_dir / "summary.md", _summary_md_text(report))


def filter_wrong(problems: list[Problem], baseline_report: Report) -> list[Problem]:
    """Subset of problems the baseline report graded incorrect."""
    wrong_ids = {r.id for r in baseline_report.rows if not r.correct}
    return [p for p in problems if p.id in wrong_ids]


# ---------------------------------------------------------------------------
# Query-count sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    settings: dict
    mean_queries: float
    corrected_fraction: float

    def __post_init__(self):
        if not 0 <= self.corrected_fraction <= 1:
            raise ValueError("corrected_fraction must be in [0, 1]")


KNOBS = ("n", "l", "v", "max_iterations")


def _method_for_point(method_name: str, settings: dict) -> tuple[Method, SamplingParams]:
    sampling = SamplingParams(n=settings.get("n", 1))
    if method_name == "io":
        return MethodIO(n=sampling.n), sampling
    if method_name == "cot":
        return MethodCoT(chain_length_l=settings.get("l", 5)), sampling
    if method_name == "sc-cot":
        return MethodSCCoT(chain_length_l=settings.get("l", 5),
                           voters_v=settings.get("v", 5)), sampling
    if method_name == "macm":
        config = RunConfig(max_iterations=settings.get("max_iterations", 5))
        return MethodMACM(config=config), sampling
    raise ValueError(f"unknown method {method_name!r}")


def sweep_queries(problems: list[Problem], method_name: str, knob_grid: dict,
                  backend_factory, out_dir: str | Path, task: str = "math",
                  count_choices: bool = True) -> list[SweepPoint]:
    """Run one benchmark per knob setting and record (mean query count,
    fraction corrected). Writes sweep.csv under out_dir."""
    if not problems:
        raise EmptyDataset("sweep requires at least one problem")
    if not knob_grid:
        raise ValueError("knob grid must be nonempty")
    for knob in knob_grid:
        if knob not in KNOBS:
            raise ValueError(f"unknown knob {knob!r}")

    out_dir = Path(out_dir)
    keys = sorted(knob_grid)
    points: list[SweepPoint] = []
    for values in itertools.product(*(knob_grid[k] for k in keys)):
        settings = dict(zip(keys, values))
        method, sampling = _method_for_point(method_name, settings)
        point_dir = out_dir / ("point_" + "_".join(f"{k}{v}" for k, v in settings.items()))
        report = run_benchmark(problems, method, backend_factory, point_dir,
                               task=task, count_choices=count_choices,
                               sampling=sampling)
        points.append(SweepPoint(
            settings=settings,
            mean_queries=report.aggregates["mean_queries"],
            corrected_fraction=report.aggregates["accuracy"],
        ))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(keys + ["mean_queries", "corrected_fraction"])
    for point in points:
        writer.writerow([point.settings.get(k, "") for k in keys]
                        + [point.mean_queries, point.corrected_fraction])
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / "sweep.csv", buf.getvalue())
    return points


# ---------------------------------------------------------------------------
# Backend factories
# ---------------------------------------------------------------------------

def make_backend_factory(selector: str, counter: QueryCounter,
                         record_dir: str | Path | None = None):
    """Build a per-problem backend factory from a CLI selector:
    "http", "scripted:<file>", or "replay:<dir-or-file>". With ``record_dir``
    every problem's traffic is recorded to <record_dir>/<id>.jsonl."""

    def wrap(backend, problem_id: str):
        if record_dir is not None:
            return RecordingBackend(backend, Path(record_dir) / f"{problem_id}.jsonl")
        return backend

    if selector == "http":
        from .backend import HttpBackend
        shared = HttpBackend(counter=counter)
        return lambda problem_id: wrap(shared, problem_id)
    if selector.startswith("scripted:"):
        path = selector.split(":", 1)[1]
        with open(path, encoding="utf-8") as fh:
            script_data = json.load(fh)
        return lambda problem_id: wrap(
            ScriptedBackend.from_dict(script_data, counter=counter), problem_id)
    if selector.startswith("replay:"):
        target = Path(selector.split(":", 1)[1])

        def factory(problem_id: str):
            path = target / f"{problem_id}.jsonl" if target.is_dir() else target
            return wrap(ReplayBackend(path, counter=counter), problem_id)

        return factory
    raise ValueError(f"unknown backend selector {selector!r}")
