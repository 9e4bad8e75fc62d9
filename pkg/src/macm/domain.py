"""Shared vocabulary: problems, conditions, objectives, configs, transcripts, outcomes."""

from __future__ import annotations

import re
import time
import unicodedata
import uuid
from dataclasses import dataclass, field

_WS_RUN = re.compile(r"\s+")


def normalize_condition_text(text: str) -> str:
    """Canonical form used for condition identity.

    Trims surrounding whitespace, collapses internal whitespace runs to a
    single space, and applies Unicode NFC. Case is preserved: math symbols
    are case-sensitive.
    """
    return _WS_RUN.sub(" ", unicodedata.normalize("NFC", text)).strip()


@dataclass(frozen=True)
class Problem:
    id: str
    question: str
    gold_answer: str | None = None
    category: str | None = None
    level: int | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("problem id must be nonempty")
        if not self.question:
            raise ValueError("problem question must be nonempty")
        if self.level is not None and not 1 <= self.level <= 5:
            raise ValueError(f"level must be 1..5, got {self.level}")


@dataclass(frozen=True)
class Objective:
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("objective must be nonempty")


@dataclass(frozen=True)
class Condition:
    """One statement in the mining ledger.

    ``mined_round`` is None for conditions extracted from the original
    problem statement, otherwise the 1-based round it was mined in.
    """

    text: str
    mined_round: int | None = None
    accepted: bool = True

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("condition text must be nonempty")
        if self.mined_round is None and not self.accepted:
            raise ValueError("initial conditions are always accepted")
        if self.mined_round is not None and self.mined_round < 1:
            raise ValueError("mined_round must be positive")

    @property
    def is_initial(self) -> bool:
        return self.mined_round is None


class ConditionList:
    """The evolving problem state: an append-only ledger of conditions plus
    the fixed objective.

    Accepted conditions are never edited or removed, and no two accepted
    conditions share the same normalized text.
    """

    def __init__(self, objective: Objective, conditions: list[Condition] | None = None):
        self.objective = objective
        self.conditions: list[Condition] = []
        self._accepted_keys: set[str] = set()
        for cond in conditions or []:
            self.add(cond)

    def add(self, condition: Condition) -> bool:
        """Append a condition. Returns False (and drops it) if an accepted
        condition with the same normalized text already exists."""
        key = normalize_condition_text(condition.text)
        if condition.accepted:
            if key in self._accepted_keys:
                return False
            self._accepted_keys.add(key)
        self.conditions.append(condition)
        return True

    def is_duplicate(self, text: str) -> bool:
        return normalize_condition_text(text) in self._accepted_keys

    def accepted(self) -> list[Condition]:
        return [c for c in self.conditions if c.accepted]

    def accepted_texts(self) -> list[str]:
        return [c.text for c in self.accepted()]

    def __len__(self) -> int:
        return len(self.conditions)


@dataclass(frozen=True)
class SamplingParams:
    n: int = 1
    top_k: int = 1
    temperature: float = 0.7
    max_tokens: int = 512

    def __post_init__(self):
        if self.n < 1 or self.top_k < 1 or self.max_tokens < 1:
            raise ValueError("n, top_k, max_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


THINKER_MAX_TOKENS = 512
JUDGE_MAX_TOKENS = 4
EXECUTOR_MAX_TOKENS = 256


@dataclass(frozen=True)
class BaselineConfig:
    chain_length_l: int = 5
    voters_v: int = 5

    def __post_init__(self):
        if self.chain_length_l < 1 or self.voters_v < 1:
            raise ValueError("l and v must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    max_iterations: int = 5
    format_retries: int = 2
    thinker_sampling: SamplingParams = SamplingParams(max_tokens=THINKER_MAX_TOKENS)
    judge_sampling: SamplingParams = SamplingParams(max_tokens=JUDGE_MAX_TOKENS)
    executor_sampling: SamplingParams = SamplingParams(max_tokens=EXECUTOR_MAX_TOKENS)
    backend: str = "scripted"
    query_budget: int | None = None
    candidate_cap: int = 8

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.format_retries < 0:
            raise ValueError("format_retries must be >= 0")
        if self.candidate_cap < 1:
            raise ValueError("candidate_cap must be >= 1")


@dataclass(frozen=True)
class Verdict:
    value: bool


# ---------------------------------------------------------------------------
# Outcomes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Solved:
    answer: str


@dataclass(frozen=True)
class Unsolvable:
    rounds_used: int


ERROR_KINDS = ("ParseFailure", "BackendFailure", "BudgetExceeded")


@dataclass(frozen=True)
class RunError:
    kind: str
    detail: str

    def __post_init__(self):
        if self.kind not in ERROR_KINDS:
            raise ValueError(f"unknown error kind {self.kind!r}")


Outcome = Solved | Unsolvable | RunError


def outcome_to_dict(outcome: Outcome) -> dict:
    if isinstance(outcome, Solved):
        return {"kind": "solved", "answer": outcome.answer}
    if isinstance(outcome, Unsolvable):
        return {"kind": "unsolvable", "rounds_used": outcome.rounds_used}
    return {"kind": "error", "error_kind": outcome.kind, "detail": outcome.detail}


def outcome_from_dict(data: dict) -> Outcome:
    kind = data["kind"]
    if kind == "solved":
        return Solved(data["answer"])
    if kind == "unsolvable":
        return Unsolvable(data["rounds_used"])
    if kind == "error":
        return RunError(data["error_kind"], data["detail"])
    raise ValueError(f"unknown outcome kind {kind!r}")


# ---------------------------------------------------------------------------
# Transcript events
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AgentCall:
    role: str
    prompt: str
    raw_response: str
    tokens_in: int
    tokens_out: int
    timestamp: float
    n_choices: int = 1


@dataclass(frozen=True)
class ConditionProposed:
    text: str
    round: int


@dataclass(frozen=True)
class VerdictEvent:
    subject: str
    value: bool


@dataclass(frozen=True)
class StateChange:
    description: str
    data: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Final:
    outcome: Outcome


Event = AgentCall | ConditionProposed | VerdictEvent | StateChange | Final


class Transcript:
    """Append-only event log of one run.

    Exactly one Final event may be appended, after which the transcript is
    closed. Each AgentCall corresponds to exactly one backend request, so
    the run's request count equals the number of AgentCall events.
    """

    def __init__(self, run_id: str | None = None):
        self.run_id = run_id or uuid.uuid4().hex
        self.events: list[Event] = []

    def append(self, event: Event) -> None:
        if self.is_final:
            raise ValueError("transcript already finalized")
        self.events.append(event)

    @property
    def is_final(self) -> bool:
        return bool(self.events) and isinstance(self.events[-1], Final)

    @property
    def outcome(self) -> Outcome | None:
        return self.events[-1].outcome if self.is_final else None

    def agent_calls(self) -> list[AgentCall]:
        return [e for e in self.events if isinstance(e, AgentCall)]

    def query_count(self) -> int:
        """Backend requests issued during the run (one per AgentCall)."""
        return len(self.agent_calls())

    def choice_count(self) -> int:
        """Backend responses consumed (sum of per-request n)."""
        return sum(e.n_choices for e in self.agent_calls())


def now() -> float:
    return time.time()
