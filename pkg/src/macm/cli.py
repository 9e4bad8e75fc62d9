"""Command-line interface: solve one problem, run a benchmark, or sweep knobs."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, orchestrator
from .backend import HttpBackend, QueryCounter, RecordingBackend, ReplayBackend, ScriptedBackend
from .baselines import MethodCoT, MethodIO, MethodMACM, MethodSCCoT, solve_cot, solve_io, solve_sc_cot
from .domain import (
    Final,
    Problem,
    RunConfig,
    RunError,
    SamplingParams,
    Solved,
    THINKER_MAX_TOKENS,
    JUDGE_MAX_TOKENS,
    EXECUTOR_MAX_TOKENS,
    Transcript,
    outcome_to_dict,
)
from .errors import (
    BackendFailure,
    BudgetExceeded,
    CassetteExhausted,
    CassetteMismatch,
    EmptyDataset,
    SchemaError,
    ScriptExhausted,
    ScriptMismatch,
)
from .prompts import PromptCatalog

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_BUDGET = 4

_BACKEND_ERRORS = (BackendFailure, ScriptExhausted, ScriptMismatch,
                   CassetteMismatch, CassetteExhausted)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--method", choices=["io", "cot", "sc-cot", "macm"], default="macm")
    parser.add_argument("--backend", required=True,
                        help="http | scripted:<file> | replay:<cassette-or-dir>")
    parser.add_argument("--record", help="record traffic to this cassette file/dir")
    parser.add_argument("--max-iterations", type=int, default=5)
    parser.add_argument("--temperature", type=float, default=0.7)
    parser.add_argument("--n", type=int, default=1)
    parser.add_argument("--l", type=int, default=5)
    parser.add_argument("--v", type=int, default=5)
    parser.add_argument("--format-retries", type=int, default=2)
    parser.add_argument("--query-budget", type=int)
    parser.add_argument("--prompts-dir", help="directory of prompt override files")
    parser.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="macm")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve a single problem")
    group = p_solve.add_mutually_exclusive_group(required=True)
    group.add_argument("--question", help="problem text")
    group.add_argument("--problem-file", help="JSONL file; the first problem is solved")
    _add_common_flags(p_solve)

    p_bench = sub.add_parser("bench", help="run a benchmark over a dataset")
    p_bench.add_argument("--dataset", required=True)
    p_bench.add_argument("--task", choices=list(harness.TASKS), default="math")
    p_bench.add_argument("--parallelism", type=int, default=1)
    p_bench.add_argument("--sample", type=float, help="sample fraction (0, 1]")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--count-choices", action="store_true",
                         help="count responses instead of requests")
    p_bench.add_argument("--lenient", action="store_true",
                         help="skip malformed dataset lines instead of aborting")
    p_bench.add_argument("--filter-wrong-from",
                         help="report.json whose incorrect rows select the problem subset")
    _add_common_flags(p_bench)

    p_sweep = sub.add_parser("sweep", help="sweep knob settings over a dataset")
    p_sweep.add_argument("--dataset", required=True)
    p_sweep.add_argument("--task", choices=list(harness.TASKS), default="math")
    p_sweep.add_argument("--grid", required=True,
                         help="JSON knob grid, e.g. '{\"n\": [1, 3]}', or @file")
    p_sweep.add_argument("--count-choices", action="store_true", default=True)
    p_sweep.add_argument("--filter-wrong-from")
    p_sweep.add_argument("--sample", type=float)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--lenient", action="store_true")
    _add_common_flags(p_sweep)

    return parser


def _run_config(args) -> RunConfig:
    def sampling(max_tokens: int) -> SamplingParams:
        return SamplingParams(temperature=args.temperature, max_tokens=max_tokens)

    return RunConfig(
        max_iterations=args.max_iterations,
        format_retries=args.format_retries,
        thinker_sampling=sampling(THINKER_MAX_TOKENS),
        judge_sampling=sampling(JUDGE_MAX_TOKENS),
        executor_sampling=sampling(EXECUTOR_MAX_TOKENS),
        backend=args.backend,
        query_budget=args.query_budget,
    )


def _method(args):
    if args.method == "io":
        return MethodIO(n=args.n)
    if args.method == "cot":
        return MethodCoT(chain_length_l=args.l)
    if args.method == "sc-cot":
        return MethodSCCoT(chain_length_l=args.l, voters_v=args.v)
    return MethodMACM(config=_run_config(args))


def _single_backend(selector: str, counter: QueryCounter, record_path: str | None):
    if selector == "http":
        backend = HttpBackend(counter=counter)
    elif selector.startswith("scripted:"):
        backend = ScriptedBackend.from_file(selector.split(":", 1)[1], counter=counter)
    elif selector.startswith("replay:"):
        backend = ReplayBackend(selector.split(":", 1)[1], counter=counter)
    else:
        raise ValueError(f"unknown backend selector {selector!r}")
    if record_path:
        backend = RecordingBackend(backend, record_path)
    return backend


def _load_dataset(args) -> list[Problem]:
    if args.task == "game24":
        problems = harness.load_game24_file(args.dataset)
    elif args.task == "sorting":
        problems = harness.load_sorting_file(args.dataset)
    else:
        problems = harness.load_problems(args.dataset, lenient=getattr(args, "lenient", False))
    if getattr(args, "filter_wrong_from", None):
        problems = harness.filter_wrong(problems, harness.load_report(args.filter_wrong_from))
    if getattr(args, "sample", None):
        problems = harness.sample_problems(problems, args.sample, args.seed)
    return problems


def cmd_solve(args) -> int:
    counter = QueryCounter()
    backend = _single_backend(args.backend, counter, args.record)
    prompts = PromptCatalog.load(args.prompts_dir)
    if args.question:
        problem = Problem(id="cli", question=args.question)
    else:
        problems = harness.load_problems(args.problem_file)
        if not problems:
            raise EmptyDataset(f"no problems in {args.problem_file}")
        problem = problems[0]

    sampling = SamplingParams(n=args.n, temperature=args.temperature)
    if args.method == "macm":
        outcome, transcript = orchestrator.solve(problem, _run_config(args), backend,
                                                 prompts=prompts)
    else:
        transcript = Transcript(run_id=problem.id)
        try:
            if args.method == "io":
                answer, _ = solve_io(problem, sampling, backend, transcript)
            elif args.method == "cot":
                answer, _ = solve_cot(problem, args.l, sampling, backend, transcript)
            else:
                answer, _ = solve_sc_cot(problem, args.l, args.v, sampling, backend, transcript)
            outcome = Solved(answer)
        except harness._SOLVE_ERRORS as exc:
            outcome = orchestrator._error_outcome(exc)
        transcript.append(Final(outcome))

    print(json.dumps({"outcome": outcome_to_dict(outcome),
                      "queries": transcript.query_count(),
                      "choices": transcript.choice_count()}, ensure_ascii=False))
    if args.out:
        harness.write_transcript(transcript, Path(args.out) / f"{problem.id}.jsonl")

    if isinstance(outcome, RunError):
        return {"BackendFailure": EXIT_BACKEND,
                "BudgetExceeded": EXIT_BUDGET}.get(outcome.kind, EXIT_FAIL)
    return EXIT_OK


def cmd_bench(args) -> int:
    problems = _load_dataset(args)
    counter = QueryCounter()
    factory = harness.make_backend_factory(args.backend, counter, record_dir=args.record)
    out_dir = Path(args.out or "bench_out")
    report = harness.run_benchmark(
        problems, _method(args), factory, out_dir, task=args.task,
        parallelism=args.parallelism, count_choices=args.count_choices,
        sampling=SamplingParams(n=args.n, temperature=args.temperature))
    harness.write_report(report, out_dir)
    agg = report.aggregates
    print(f"accuracy {agg['accuracy'] * 100:.2f}% "
          f"({agg['correct']}/{agg['attempted']}), "
          f"mean queries {agg['mean_queries']:.2f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    problems = _load_dataset(args)
    grid_text = args.grid
    if grid_text.startswith("@"):
        grid_text = Path(grid_text[1:]).read_text(encoding="utf-8")
    grid = json.loads(grid_text)
    counter = QueryCounter()
    factory = harness.make_backend_factory(args.backend, counter, record_dir=args.record)
    out_dir = Path(args.out or "sweep_out")
    points = harness.sweep_queries(problems, args.method, grid, factory, out_dir,
                                   task=args.task, count_choices=args.count_choices)
    for point in points:
        print(f"{point.settings} -> mean_queries={point.mean_queries:.2f} "
              f"corrected={point.corrected_fraction:.3f}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "bench":
            return cmd_bench(args)
        return cmd_sweep(args)
    except (SchemaError, EmptyDataset, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except _BACKEND_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
