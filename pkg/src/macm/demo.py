"""Shipped demo assets: the algebra problem and its scripted solve trace."""

from importlib.resources import files
from pathlib import Path

from .domain import Problem

ALGEBRA_QUESTION = (
    "Let S be the set of all real numbers α such that the function "
    "(x^2 + 5x + α)/(x^2 + 7x - 44) can be expressed as a quotient of two "
    "linear functions. What is the sum of the elements of S?"
)
ALGEBRA_GOLD = "-102"


def algebra_problem() -> Problem:
    return Problem(id="algebra-quotient", question=ALGEBRA_QUESTION,
                   gold_answer=ALGEBRA_GOLD, category="Intermediate Algebra", level=5)


def algebra_trace_path() -> Path:
    return Path(str(files("macm").joinpath("data/algebra_trace.json")))
