"""Orchestration of solve passes, verify passes, and rejection sampling.

A run is driven by per-model backends: either a live chat endpoint or the
stochastic simulator. Within one rejection trace attempts are strictly
sequential (attempt i+1 exists only because verdict i rejected); across
problems work fans out up to a configured in-flight cap. Boxless solver
attempts consume an attempt slot and are auto-rejected without a verifier
call, and a trace that never sees an acceptance keeps its last attempt.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence, TypeVar

import numpy as np

from .answers import ExtractedAnswer, Verdict, correctness, extract_boxed, parse_verdict
from .metrics import ConfusionCounts, MetricsRecord, accumulate, classify_setting
from .models import (
    ChatEndpoint,
    GenerationParams,
    ModelSpec,
    SimModelParams,
    sim_solve,
    sim_verify,
    solver_prompt,
    verifier_prompt,
)
from .rng import derive_seed
from .taskgen import Problem

T = TypeVar("T")
U = TypeVar("U")

DEFAULT_MAX_ATTEMPTS = 9


@dataclass(frozen=True)
class Attempt:
    """One sampled solver solution; ``correct`` is absent when discarded."""

    solver: ModelSpec
    problem_id: str
    index: int
    raw_text: str
    extracted: ExtractedAnswer
    correct: bool | None


@dataclass(frozen=True)
class RejectionTrace:
    """One bounded rejection-sampling run for a (solver, verifier, problem).

    ``attempts`` pairs each attempt with its verdict; the verdict is None for
    boxless attempts that were auto-rejected without a verifier call. When
    ``accepted`` the final attempt is the first accepted one, otherwise it is
    the last attempt generated.
    """

    solver: ModelSpec
    verifier: ModelSpec
    problem_id: str
    attempts: tuple[tuple[Attempt, Verdict | None], ...]
    final: Attempt
    accepted: bool


class Backend(Protocol):
    """Produces solver/verifier text for one model."""

    def solve(
        self, model: ModelSpec, problem: Problem, params: GenerationParams, attempt: int
    ) -> str: ...

    def verify(
        self,
        model: ModelSpec,
        problem: Problem,
        solution_text: str,
        solution_correct: bool,
        params: GenerationParams,
        attempt: int,
    ) -> tuple[str, Verdict]: ...


class SimBackend:
    """Backend over the stochastic simulator; no network, fully seeded."""

    def __init__(self, sim: SimModelParams) -> None:
        self.sim = sim

    def solve(
        self, model: ModelSpec, problem: Problem, params: GenerationParams, attempt: int
    ) -> str:
        text, _ = sim_solve(self.sim, problem, attempt)
        return text

    def verify(
        self,
        model: ModelSpec,
        problem: Problem,
        solution_text: str,
        solution_correct: bool,
        params: GenerationParams,
        attempt: int,
    ) -> tuple[str, Verdict]:
        verdict = sim_verify(self.sim, solution_correct, problem.id, attempt)
        text = "\\boxed{correct}" if verdict.accepted else "\\boxed{incorrect}"
        return text, verdict


class GenerationCache:
    """Append-only completion cache keyed by a content hash.

    Lets aborted endpoint runs resume without repeating finished calls; the
    key covers (role, model, problem id, attempt, sampling params) so a
    config change invalidates naturally.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path else None
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            with open(self.path, "r", encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if line:
                        row = json.loads(line)
                        self._entries[row["key"]] = row["text"]

    @staticmethod
    def key(
        role: str, model: str, problem_id: str, attempt: int, params: GenerationParams
    ) -> str:
        return format(
            derive_seed(
                role,
                model,
                problem_id,
                attempt,
                params.temperature,
                params.top_p,
                params.max_tokens,
            ),
            "016x",
        )

    def get(self, key: str) -> str | None:
        return self._entries.get(key)

    def put(self, key: str, text: str) -> None:
        with self._lock:
            self._entries[key] = text
            if self.path:
                with open(self.path, "a", encoding="utf-8") as handle:
                    handle.write(json.dumps({"key": key, "text": text}) + "\n")


class EndpointBackend:
    """Backend over a live chat endpoint, with optional response caching."""

    def __init__(
        self, endpoint: ChatEndpoint, run_seed: int, cache: GenerationCache | None = None
    ) -> None:
        self.endpoint = endpoint
        self.run_seed = run_seed
        self.cache = cache

    def _generate(
        self, role: str, model: ModelSpec, problem: Problem, prompt: str,
        params: GenerationParams, attempt: int,
    ) -> str:
        key = GenerationCache.key(role, model.name, problem.id, attempt, params)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        seed = derive_seed(self.run_seed, model.name, problem.id, attempt, role)
        text = self.endpoint.generate(model, prompt, params, attempt_seed=seed)
        if self.cache is not None:
            self.cache.put(key, text)
        return text

    def solve(
        self, model: ModelSpec, problem: Problem, params: GenerationParams, attempt: int
    ) -> str:
        return self._generate("solve", model, problem, solver_prompt(problem), params, attempt)

    def verify(
        self,
        model: ModelSpec,
        problem: Problem,
        solution_text: str,
        solution_correct: bool,
        params: GenerationParams,
        attempt: int,
    ) -> tuple[str, Verdict]:
        text = self._generate(
            "verify", model, problem, verifier_prompt(problem, solution_text), params, attempt
        )
        return text, parse_verdict(text)


def _map_ordered(
    fn: Callable[[T], U], items: Sequence[T], max_workers: int
) -> list[U]:
    """Apply fn to items, optionally fanned out; results keep input order."""
    if max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


class EvalRunner:
    """Runs passes against a pool of per-model backends."""

    def __init__(self, backends: Mapping[str, Backend], max_workers: int = 1) -> None:
        self.backends = dict(backends)
        self.max_workers = max_workers

    def _backend(self, model: ModelSpec) -> Backend:
        try:
            return self.backends[model.name]
        except KeyError:
            raise KeyError(f"no backend configured for model {model.name!r}") from None

    def _make_attempt(
        self, solver: ModelSpec, problem: Problem, index: int, params: GenerationParams
    ) -> Attempt:
        raw = self._backend(solver).solve(solver, problem, params, index)
        extracted = extract_boxed(raw)
        correct = correctness(problem, extracted) if extracted.present else None
        return Attempt(
            solver=solver,
            problem_id=problem.id,
            index=index,
            raw_text=raw,
            extracted=extracted,
            correct=correct,
        )

    def solve_pass(
        self,
        solver: ModelSpec,
        problems: Sequence[Problem],
        samples_per_problem: int,
        params: GenerationParams,
    ) -> list[Attempt]:
        """samples_per_problem attempts per problem, extraction and
        correctness populated; discarded attempts kept with correct=None."""
        if samples_per_problem < 1:
            raise ValueError("samples_per_problem must be >= 1")
        work = [
            (problem, index)
            for problem in problems
            for index in range(1, samples_per_problem + 1)
        ]
        return _map_ordered(
            lambda item: self._make_attempt(solver, item[0], item[1], params),
            work,
            self.max_workers,
        )

    def verify_pass(
        self,
        verifier: ModelSpec,
        problems_by_id: Mapping[str, Problem],
        attempts: Sequence[Attempt],
        params: GenerationParams,
    ) -> list[tuple[Attempt, Verdict]]:
        """One verdict per attempt; attempts must carry an extracted answer."""
        return [
            (attempt, verdict)
            for attempt, _, verdict in self.verify_pass_texts(
                verifier, problems_by_id, attempts, params
            )
        ]

    def verify_pass_texts(
        self,
        verifier: ModelSpec,
        problems_by_id: Mapping[str, Problem],
        attempts: Sequence[Attempt],
        params: GenerationParams,
    ) -> list[tuple[Attempt, str, Verdict]]:
        """verify_pass variant that also returns the raw verifier text."""
        for attempt in attempts:
            if not attempt.extracted.present:
                raise ValueError("verify_pass requires extracted answers")

        def judge(attempt: Attempt) -> tuple[Attempt, str, Verdict]:
            problem = problems_by_id[attempt.problem_id]
            text, verdict = self._backend(verifier).verify(
                verifier,
                problem,
                attempt.raw_text,
                bool(attempt.correct),
                params,
                attempt.index,
            )
            return attempt, text, verdict

        return _map_ordered(judge, attempts, self.max_workers)

    def rejection_sample(
        self,
        solver: ModelSpec,
        verifier: ModelSpec,
        problem: Problem,
        max_attempts: int,
        params: GenerationParams,
    ) -> RejectionTrace:
        """Resample until the verifier accepts, up to max_attempts; keep the
        last attempt when nothing is accepted.

        Boxless attempts consume an attempt slot and are auto-rejected with
        no verifier call; unparseable verdicts auto-reject the attempt.
        """
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        solver_backend = self._backend(solver)
        verifier_backend = self._backend(verifier)
        pairs: list[tuple[Attempt, Verdict | None]] = []
        for index in range(1, max_attempts + 1):
            raw = solver_backend.solve(solver, problem, params, index)
            extracted = extract_boxed(raw)
            correct = correctness(problem, extracted) if extracted.present else None
            attempt = Attempt(
                solver=solver,
                problem_id=problem.id,
                index=index,
                raw_text=raw,
                extracted=extracted,
                correct=correct,
            )
            if not extracted.present:
                pairs.append((attempt, None))
                continue
            _, verdict = verifier_backend.verify(
                verifier, problem, raw, bool(correct), params, index
            )
            pairs.append((attempt, verdict))
            if verdict.parse_ok and verdict.accepted:
                return RejectionTrace(
                    solver=solver,
                    verifier=verifier,
                    problem_id=problem.id,
                    attempts=tuple(pairs),
                    final=attempt,
                    accepted=True,
                )
        return RejectionTrace(
            solver=solver,
            verifier=verifier,
            problem_id=problem.id,
            attempts=tuple(pairs),
            final=pairs[-1][0],
            accepted=False,
        )

    def rejection_pass(
        self,
        solver: ModelSpec,
        verifier: ModelSpec,
        problems: Sequence[Problem],
        max_attempts: int,
        params: GenerationParams,
    ) -> list[RejectionTrace]:
        return _map_ordered(
            lambda problem: self.rejection_sample(
                solver, verifier, problem, max_attempts, params
            ),
            problems,
            self.max_workers,
        )


# ---------------------------------------------------------------------------
# Accumulation helpers.
# ---------------------------------------------------------------------------


def tally_attempts(attempts: Iterable[Attempt]) -> ConfusionCounts:
    """Solver-side tallies (total / correct / discarded) for a set of attempts."""
    counts = ConfusionCounts()
    for attempt in attempts:
        counts = counts.record_attempt(attempt.extracted.present, attempt.correct)
    return counts


def fold_judgments(
    base: ConfusionCounts, judged: Iterable[tuple[Attempt, Verdict]]
) -> ConfusionCounts:
    """Fold (attempt, verdict) pairs into confusion cells on top of ``base``."""
    counts = base
    for attempt, verdict in judged:
        counts = accumulate(counts, bool(attempt.correct), verdict)
    return counts


# ---------------------------------------------------------------------------
# Empirical gains and comparison against the asymptotic prediction.
# ---------------------------------------------------------------------------


def final_at_cap(trace: RejectionTrace, cap: int) -> Attempt:
    """The trace's final attempt had it been run with a smaller attempt cap.

    Valid because attempt draws are keyed by (problem, attempt index): the
    first ``cap`` attempts of a stored trace are exactly the attempts a rerun
    with max_attempts=cap would generate. Caps beyond the cap an unaccepted
    trace was run with are rejected -- the longer run would have kept
    sampling, so its outcome is not recoverable from the stored attempts.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if not trace.accepted and cap > len(trace.attempts):
        raise ValueError(
            f"cap {cap} exceeds the {len(trace.attempts)} attempts this "
            "unaccepted trace was run with"
        )
    window = trace.attempts[:cap]
    for attempt, verdict in window:
        if verdict is not None and verdict.parse_ok and verdict.accepted:
            return attempt
    return window[-1][0]


def _final_accuracy(finals: Sequence[Attempt]) -> float:
    # A discarded final answers nothing, so it scores as incorrect.
    return sum(1 for a in finals if a.correct is True) / len(finals)


def empirical_gain(traces: Sequence[RejectionTrace], cap: int | None = None) -> float:
    """Mean final-attempt correctness minus the paired single-attempt
    baseline (attempt #1 of each trace, i.e. the same problems)."""
    if not traces:
        raise ValueError("no traces")
    pairs = {(t.solver.name, t.verifier.name) for t in traces}
    if len(pairs) > 1:
        raise ValueError(f"traces mix solver-verifier pairs: {sorted(pairs)}")
    finals = [
        final_at_cap(trace, cap) if cap is not None else trace.final for trace in traces
    ]
    baseline = [trace.attempts[0][0] for trace in traces]
    return _final_accuracy(finals) - _final_accuracy(baseline)


@dataclass(frozen=True)
class ComparisonRow:
    solver: str
    verifier: str
    dataset: str
    setting: str
    cap: int
    theoretical_gain: float | None
    empirical_gain: float
    gap: float | None


def compare_theory(
    records: Sequence[MetricsRecord],
    traces_by_triple: Mapping[tuple[str, str, str], Sequence[RejectionTrace]],
    caps: Sequence[int],
) -> list[ComparisonRow]:
    """Per (solver, verifier, dataset): the asymptotic gain predicted from
    single-pass metrics next to the measured rejection-sampling gain at each
    attempt cap."""
    by_triple = {
        (record.solver.name, record.verifier.name, record.dataset): record
        for record in records
    }
    matched = sorted(set(by_triple) & set(traces_by_triple))
    if not matched:
        raise ValueError("no (solver, verifier, dataset) triple present in both inputs")
    rows = []
    for triple in matched:
        record = by_triple[triple]
        traces = traces_by_triple[triple]
        for cap in caps:
            measured = empirical_gain(traces, cap=cap)
            gap = None if record.gain is None else measured - record.gain
            rows.append(
                ComparisonRow(
                    solver=triple[0],
                    verifier=triple[1],
                    dataset=triple[2],
                    setting=classify_setting(record.solver, record.verifier).value,
                    cap=cap,
                    theoretical_gain=record.gain,
                    empirical_gain=measured,
                    gap=gap,
                )
            )
    return rows


# ---------------------------------------------------------------------------
# Closed-form finite-cap accuracy and the vectorized Monte Carlo simulator.
# ---------------------------------------------------------------------------


def expected_final_accuracy(acc: float, tpr: float, fpr: float, cap: int) -> float:
    """Probability the kept attempt is correct under i.i.d. rejection
    sampling with ``cap`` attempts and keep-last fallback.

    Sums acceptance of a correct attempt at each position plus the keep-last
    event (all rejections, last attempt correct). At cap 1 this is the solver
    accuracy; as cap grows it converges to the verifier's precision on the
    solver's output distribution.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    accept_rate = acc * tpr + (1 - acc) * fpr
    if accept_rate == 0:
        return acc
    reject_rate = 1 - accept_rate
    accepted_correct = acc * tpr * (1 - reject_rate**cap) / accept_rate
    kept_last_correct = reject_rate ** (cap - 1) * acc * (1 - tpr)
    return accepted_correct + kept_last_correct


@dataclass(frozen=True)
class SimBatch:
    """Summary of a vectorized batch of simulated rejection traces."""

    acc: float
    tpr: float
    fpr: float
    cap: int
    n_problems: int
    final_accuracy: float
    baseline_accuracy: float
    mean_attempts: float

    @property
    def empirical_gain(self) -> float:
        return self.final_accuracy - self.baseline_accuracy


def simulate_rejection_batch(
    acc: float, tpr: float, fpr: float, n_problems: int, cap: int, seed: int
) -> SimBatch:
    """Monte Carlo over i.i.d. simulated traces, vectorized for scale.

    Semantically identical to running ``rejection_sample`` with simulator
    backends: first accepted attempt wins, otherwise the last attempt is
    kept. Used to validate the asymptotic theory at 1e5+ problems per cell.
    """
    if n_problems < 1 or cap < 1:
        raise ValueError("n_problems and cap must be >= 1")
    rng = np.random.default_rng(derive_seed("simulate", seed, acc, tpr, fpr, cap))
    correct = rng.random((n_problems, cap)) < acc
    accept = rng.random((n_problems, cap)) < np.where(correct, tpr, fpr)
    any_accept = accept.any(axis=1)
    first_accept = accept.argmax(axis=1)
    rows = np.arange(n_problems)
    final_correct = np.where(
        any_accept, correct[rows, first_accept], correct[:, -1]
    )
    attempts_used = np.where(any_accept, first_accept + 1, cap)
    return SimBatch(
        acc=acc,
        tpr=tpr,
        fpr=fpr,
        cap=cap,
        n_problems=n_problems,
        final_accuracy=float(final_correct.mean()),
        baseline_accuracy=float(correct[:, 0].mean()),
        mean_attempts=float(attempts_used.mean()),
    )
