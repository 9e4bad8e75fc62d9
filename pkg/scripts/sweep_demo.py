#!/usr/bin/env python3
"""Offline query-count sweep demo: I-O prompting with n in {1, 3} over a tiny
synthetic dataset, using scripted backends. Writes sweep.csv under --out."""

import argparse

from macm.backend import QueryCounter, ScriptedBackend, ScriptEntry
from macm.domain import Problem
from macm.harness import sweep_queries


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="sweep_demo_out")
    args = parser.parse_args()

    problems = [Problem(id=f"p{i}", question=f"What is {i} + {i}?",
                        gold_answer=str(2 * i)) for i in range(5)]
    counter = QueryCounter()

    def factory(problem_id: str) -> ScriptedBackend:
        answer = str(2 * int(problem_id[1:]))
        # Two replies: one for generation, one for the n>1 selection round.
        entries = [ScriptEntry(reply=f"Answer: {answer}")] * 2
        return ScriptedBackend({"solver": list(entries)}, counter=counter)

    points = sweep_queries(problems, "io", {"n": [1, 3]}, factory, args.out)
    for point in points:
        print(f"{point.settings} -> mean_queries={point.mean_queries:.2f} "
              f"corrected={point.corrected_fraction:.3f}")
    print(f"total responses consumed: {counter.choices}")
    print(f"wrote {args.out}/sweep.csv")


if __name__ == "__main__":
    main()
