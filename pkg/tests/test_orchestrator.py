import pytest

from macm.backend import ScriptedBackend, record, replay
from macm.demo import algebra_problem, algebra_trace_path
from macm.domain import (
    AgentCall,
    Final,
    RunConfig,
    RunError,
    Solved,
    StateChange,
    Transcript,
    Unsolvable,
    VerdictEvent,
)
from macm.errors import CorruptTranscript
from macm.orchestrator import (
    CONDITION_ACCEPTED,
    CONDITION_DISCARDED,
    DUPLICATE_DROPPED,
    resume_from_transcript,
    solve,
)

from conftest import extraction_reply, mining_reply, random_script, scripted


def accepted_mined(transcript):
    return [e for e in transcript.events
            if isinstance(e, StateChange) and e.description == CONDITION_ACCEPTED
            and e.data.get("provenance") != "initial"]


def discarded(transcript):
    return [e for e in transcript.events
            if isinstance(e, StateChange) and e.description == CONDITION_DISCARDED]


class TestAlgebraTraceReplay:
    def test_full_trace(self):
        backend = ScriptedBackend.from_file(algebra_trace_path())
        outcome, transcript = solve(algebra_problem(), RunConfig(), backend)
        assert outcome == Solved("-102")
        assert len(discarded(transcript)) == 1
        assert discarded(transcript)[0].data["text"] == "x^2 + 5x + α = k(x + 11)(x - 4)"
        assert len(accepted_mined(transcript)) == 2
        rounds = [e.data["round"] for e in accepted_mined(transcript)]
        assert rounds == [2, 2]

    def test_rejected_condition_never_reappears_in_prompts(self):
        backend = ScriptedBackend.from_file(algebra_trace_path())
        _, transcript = solve(algebra_problem(), RunConfig(), backend)
        discard_index = next(i for i, e in enumerate(transcript.events)
                             if isinstance(e, StateChange)
                             and e.description == CONDITION_DISCARDED)
        bad = "x^2 + 5x + α = k(x + 11)(x - 4)"
        for event in transcript.events[discard_index + 1:]:
            if isinstance(event, AgentCall):
                assert bad not in event.prompt


class TestTermination:
    def test_unsolvable_after_five_rounds(self, toy_problem, fast_config):
        backend = scripted(
            thinker=[extraction_reply(["c0"], "obj")]
            + [mining_reply([f"c{r}"]) for r in range(1, 6)],
            judge=["True", "False"] * 5)
        outcome, transcript = solve(toy_problem, fast_config, backend)
        assert outcome == Unsolvable(5)
        mining_rounds = {e.round for e in transcript.events
                         if type(e).__name__ == "ConditionProposed"}
        assert mining_rounds == {1, 2, 3, 4, 5}
        sufficiency = [e for e in transcript.events
                       if isinstance(e, VerdictEvent) and e.subject.startswith("sufficiency")]
        assert len(sufficiency) == 5
        assert not any(v.value for v in sufficiency)

    def test_max_iterations_one(self, toy_problem):
        config = RunConfig(max_iterations=1, format_retries=0)
        backend = scripted(thinker=[extraction_reply(["c0"], "obj"), mining_reply(["c1"])],
                           judge=["True", "False"])
        outcome, _ = solve(toy_problem, config, backend)
        assert outcome == Unsolvable(1)


class TestErrorPropagation:
    def test_judge_off_vocabulary_aborts(self, toy_problem):
        config = RunConfig(format_retries=0)
        backend = scripted(thinker=[extraction_reply(["c0"], "obj"), mining_reply(["c1"])],
                           judge=["Maybe"])
        outcome, transcript = solve(toy_problem, config, backend)
        assert isinstance(outcome, RunError)
        assert outcome.kind == "ParseFailure"
        assert transcript.is_final
        # Partial transcript intact: the failed judging call is recorded.
        assert transcript.agent_calls()[-1].role == "judge"

    def test_script_exhaustion_is_backend_failure(self, toy_problem, fast_config):
        backend = scripted(thinker=[extraction_reply(["c0"], "obj")])
        outcome, _ = solve(toy_problem, fast_config, backend)
        assert isinstance(outcome, RunError)
        assert outcome.kind == "BackendFailure"

    def test_query_budget(self, toy_problem):
        config = RunConfig(format_retries=0, query_budget=2)
        backend = scripted(
            thinker=[extraction_reply(["c0"], "obj"), mining_reply(["c1"])],
            judge=["True", "True"])
        outcome, transcript = solve(toy_problem, config, backend)
        assert isinstance(outcome, RunError)
        assert outcome.kind == "BudgetExceeded"
        assert transcript.query_count() == 2


class TestDedupAndRejudge:
    def test_duplicate_accepted_condition_not_judged_again(self, toy_problem, fast_config):
        backend = scripted(
            thinker=[extraction_reply(["c0"], "obj"),
                     mining_reply(["x = 1"]),
                     mining_reply(["x = 1", "y = 2"]),
                     "1. combine\n2. finish"],
            judge=["True", "False",  # round 1: accept x=1, insufficient
                   "True", "True"],  # round 2: only y=2 judged, then sufficient
            executor=["Answer: done"])
        outcome, transcript = solve(toy_problem, fast_config, backend)
        assert outcome == Solved("done")
        dups = [e for e in transcript.events
                if isinstance(e, StateChange) and e.description == DUPLICATE_DROPPED]
        assert len(dups) == 1 and dups[0].data["text"] == "x = 1"
        # x = 1 accepted exactly once
        texts = [e.data["text"] for e in accepted_mined(transcript)]
        assert texts == ["x = 1", "y = 2"]

    def test_discarded_condition_is_rejudged_on_reproposal(self, toy_problem, fast_config):
        backend = scripted(
            thinker=[extraction_reply(["c0"], "obj"),
                     mining_reply(["z = 9"]),
                     mining_reply(["z = 9"]),
                     "1. go"],
            judge=["False", "False",   # round 1: reject, insufficient
                   "True", "True"],    # round 2: same text accepted, sufficient
            executor=["Answer: ok"])
        outcome, transcript = solve(toy_problem, fast_config, backend)
        assert outcome == Solved("ok")
        verdicts = [e for e in transcript.events
                    if isinstance(e, VerdictEvent) and e.subject == "condition: z = 9"]
        assert [v.value for v in verdicts] == [False, True]


class TestOrderInsensitivity:
    def test_permuting_candidates_keeps_accepted_set(self, toy_problem, fast_config):
        # Judge verdict is a function of candidate text: "good-*" -> True.
        def run(order):
            verdicts = ["True" if t.startswith("good") else "False" for t in order]
            backend = scripted(
                thinker=[extraction_reply(["c0"], "obj"), mining_reply(list(order)), "1. go"],
                judge=verdicts + ["True"],
                executor=["Answer: fin"])
            outcome, transcript = solve(toy_problem, fast_config, backend)
            assert outcome == Solved("fin")
            return {e.data["text"] for e in accepted_mined(transcript)}

        a = run(["good-1", "bad-1", "good-2"])
        b = run(["good-2", "good-1", "bad-1"])
        assert a == b == {"good-1", "good-2"}


class TestGateSoundnessFuzz:
    @pytest.mark.parametrize("seed", range(40))
    def test_random_scripts(self, seed, toy_problem, fast_config):
        backend, expected = random_script(seed)
        outcome, transcript = solve(toy_problem, fast_config, backend)
        if expected["solved"]:
            assert outcome == Solved(f"answer-{seed}")
        else:
            assert outcome == Unsolvable(5)

        # Every accepted mined condition has a preceding True verdict.
        seen_true: set[str] = set()
        for event in transcript.events:
            if isinstance(event, VerdictEvent) and event.value \
                    and event.subject.startswith("condition: "):
                seen_true.add(event.subject[len("condition: "):])
            if isinstance(event, StateChange) and event.description == CONDITION_ACCEPTED \
                    and event.data.get("provenance") != "initial":
                assert event.data["text"] in seen_true

        # Discarded texts never appear in later prompts.
        discard_points = [(i, e.data["text"]) for i, e in enumerate(transcript.events)
                          if isinstance(e, StateChange)
                          and e.description == CONDITION_DISCARDED]
        for index, text in discard_points:
            for event in transcript.events[index + 1:]:
                if isinstance(event, AgentCall):
                    assert text not in event.prompt

        # Call budget: extract + per round (mine + judgments + sufficiency) + plan + execute.
        cap = fast_config.candidate_cap
        budget = 1 + expected["rounds"] * (cap + 2) + 2
        assert transcript.query_count() <= budget


def two_round_script(counter=None):
    return scripted(
        thinker=[extraction_reply(["c0"], "obj"),
                 mining_reply(["m1"]),
                 mining_reply(["m2"]),
                 "1. combine\n2. compute"],
        judge=["True", "False", "True", "True"],
        executor=["Answer: 99"],
        counter=counter)


class TestResume:
    def _record_full_run(self, tmp_path, problem, config):
        cassette = tmp_path / "run.jsonl"
        backend = record(two_round_script(), cassette)
        outcome, transcript = solve(problem, config, backend)
        assert outcome == Solved("99")
        return cassette, transcript

    def test_resume_after_round_one_sufficiency(self, tmp_path, toy_problem, fast_config):
        cassette, full = self._record_full_run(tmp_path, toy_problem, fast_config)
        cut = next(i for i, e in enumerate(full.events)
                   if isinstance(e, VerdictEvent) and e.subject == "sufficiency round 1")
        partial = Transcript(full.run_id)
        partial.events = list(full.events[: cut + 1])
        calls_done = partial.query_count()

        outcome, resumed = resume_from_transcript(
            partial, replay(cassette, skip_calls=calls_done), config=fast_config)
        assert outcome == full.outcome
        assert resumed.query_count() == full.query_count()
        assert accepted_mined(resumed) == accepted_mined(full)

    def test_resume_mid_judging(self, tmp_path, toy_problem, fast_config):
        cassette, full = self._record_full_run(tmp_path, toy_problem, fast_config)
        # Cut right after the round-2 candidate was proposed but before judging.
        cut = max(i for i, e in enumerate(full.events)
                  if type(e).__name__ == "ConditionProposed" and e.round == 2)
        partial = Transcript(full.run_id)
        partial.events = list(full.events[: cut + 1])
        outcome, resumed = resume_from_transcript(
            partial, replay(cassette, skip_calls=partial.query_count()),
            config=fast_config)
        assert outcome == full.outcome

    def test_resume_finalized_transcript_is_corrupt(self, toy_problem, fast_config):
        transcript = Transcript("done")
        transcript.append(Final(Solved("1")))
        with pytest.raises(CorruptTranscript):
            resume_from_transcript(transcript, two_round_script(), config=fast_config)

    def test_resume_empty_transcript_is_fresh_solve(self, toy_problem, fast_config):
        outcome, transcript = resume_from_transcript(
            Transcript("fresh"), two_round_script(), problem=toy_problem,
            config=fast_config)
        assert outcome == Solved("99")
        assert transcript.query_count() == 9

    def test_resume_empty_without_problem_is_corrupt(self, fast_config):
        with pytest.raises(CorruptTranscript):
            resume_from_transcript(Transcript("fresh"), two_round_script(),
                                   config=fast_config)


class TestTranscriptShape:
    def test_exactly_one_final_and_it_is_last(self, toy_problem, fast_config):
        backend, _ = random_script(7)
        _, transcript = solve(toy_problem, fast_config, backend)
        finals = [e for e in transcript.events if isinstance(e, Final)]
        assert len(finals) == 1
        assert isinstance(transcript.events[-1], Final)

    def test_determinism_modulo_timestamps(self, toy_problem, fast_config):
        def run():
            _, t = solve(toy_problem, fast_config, two_round_script(), run_id="fixed")
            return [
                (type(e).__name__,
                 getattr(e, "prompt", None), getattr(e, "raw_response", None),
                 getattr(e, "text", None), getattr(e, "description", None),
                 getattr(e, "subject", None), getattr(e, "value", None))
                for e in t.events
            ]

        assert run() == run()
