"""Uniform interface over text-generating models.

Two backends produce solver/verifier text: a chat-completion HTTP endpoint
(vLLM, OpenAI-compatible servers, ...) with retry/backoff, and a parameterized
stochastic simulator whose draws are deterministic in
(seed, problem id, attempt index). The solver and verifier prompt templates
live here as byte-frozen constants.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import httpx

from .answers import Verdict
from .rng import unit_uniform
from .taskgen import (
    Problem,
    falsifying_assignment,
    format_grid,
    parse_cnf,
    parse_grid,
    satisfying_assignment,
    solve_sudoku,
)

logger = logging.getLogger(__name__)

MODEL_KINDS = ("base", "post-trained")


@dataclass(frozen=True)
class ModelSpec:
    """Identity of a solver/verifier model.

    ``family`` is post-training-aware: base and post-trained variants of the
    same lineage carry different family strings and therefore count as
    different families when pairs are partitioned.
    """

    name: str
    family: str
    size_b: float
    kind: str = "post-trained"

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        if self.size_b <= 0:
            raise ValueError("size_b must be positive")


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.7
    top_p: float = 0.9
    max_tokens: int = 8192


@dataclass(frozen=True)
class SimModelParams:
    """Bernoulli model of a solver/verifier pair of behaviors.

    Attempts are mutually independent given the parameters; draws are keyed
    by (seed, role, problem id, attempt) so identical inputs always replay
    identical outcomes.
    """

    solver_accuracy: float
    verifier_tpr: float
    verifier_fpr: float
    seed: int


SOLVER_PROMPT_TEMPLATE = """Please reason step by step, and put your final answer within \\boxed{}.

{question}"""

VERIFIER_PROMPT_TEMPLATE = """You are a teacher that is evaluating a student's answer to a question. Your task is to determine whether the answer is correct or incorrect.

Question: {question}

Student's Answer: {response}

Please evaluate the student's answer carefully. Consider:
- Is the answer factually accurate?
- Is the reasoning sound and logical?
- Does it fully address the question asked?

After your evaluation, provide your judgment in the following format:
- If the answer is correct, write: \\boxed{correct}.
- If the answer is incorrect, write: \\boxed{incorrect}.

First explain your analysis over the student's answer, then provide your final judgment in the boxed format. Make sure the final judgment is either "correct" or "incorrect" inside the \\boxed{}. Do not put anything else in \\boxed{}. Do not repeat the student's answer in \\boxed{}."""

# Split once at import so substituted text is never re-scanned for braces.
_SOLVER_HEAD, _, _SOLVER_TAIL = SOLVER_PROMPT_TEMPLATE.partition("{question}")
_VERIFIER_HEAD, _, _rest = VERIFIER_PROMPT_TEMPLATE.partition("{question}")
_VERIFIER_MID, _, _VERIFIER_TAIL = _rest.partition("{response}")


def solver_prompt(problem: Problem) -> str:
    return _SOLVER_HEAD + problem.prompt + _SOLVER_TAIL


def verifier_prompt(problem: Problem, solution_text: str) -> str:
    if not solution_text:
        raise ValueError("solution_text must be non-empty")
    return _VERIFIER_HEAD + problem.prompt + _VERIFIER_MID + solution_text + _VERIFIER_TAIL


# ---------------------------------------------------------------------------
# Chat-completion endpoint client.
# ---------------------------------------------------------------------------


class EndpointError(Exception):
    """Base error for endpoint failures; carries request metadata."""

    def __init__(self, message: str, *, model: str = "", url: str = "") -> None:
        super().__init__(message)
        self.model = model
        self.url = url


class RetryableEndpointError(EndpointError):
    """Network failures, timeouts, throttling: safe to retry."""


class PermanentEndpointError(EndpointError):
    """Endpoint rejections (bad model name, context overflow): do not retry."""


_RETRYABLE_STATUS = {408, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    auth_env_var: str | None = None
    timeout_s: float = 300.0
    max_retries: int = 3
    backoff_s: float = 1.0
    supports_seed: bool = True


class ChatEndpoint:
    """Minimal chat-completions client with exponential-backoff retries.

    API keys are read from the environment variable named in the config and
    never appear in configs or logs. Only the first choice's message text is
    consumed.
    """

    def __init__(
        self, config: EndpointConfig, transport: httpx.BaseTransport | None = None
    ) -> None:
        self.config = config
        self._client = httpx.Client(timeout=config.timeout_s, transport=transport)

    def close(self) -> None:
        self._client.close()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.auth_env_var:
            key = os.environ.get(self.config.auth_env_var, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def generate(
        self,
        model: ModelSpec,
        prompt: str,
        params: GenerationParams,
        attempt_seed: int,
    ) -> str:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        payload: dict = {
            "model": model.name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
        }
        if self.config.supports_seed:
            payload["seed"] = attempt_seed

        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt and self.config.backoff_s:
                time.sleep(self.config.backoff_s * 2 ** (attempt - 1))
            try:
                response = self._client.post(url, json=payload, headers=self._headers())
            except httpx.TransportError as exc:
                last_error = exc
                logger.warning("endpoint %s transport error: %s", url, exc)
                continue
            if response.status_code in _RETRYABLE_STATUS:
                last_error = RetryableEndpointError(
                    f"status {response.status_code}", model=model.name, url=url
                )
                logger.warning(
                    "endpoint %s returned %d, retrying", url, response.status_code
                )
                continue
            if response.status_code >= 400:
                raise PermanentEndpointError(
                    f"status {response.status_code}: {response.text[:200]}",
                    model=model.name,
                    url=url,
                )
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise PermanentEndpointError(
                    f"malformed completion response: {exc}", model=model.name, url=url
                ) from exc
        raise RetryableEndpointError(
            f"exhausted {self.config.max_retries} retries: {last_error}",
            model=model.name,
            url=url,
        )


# ---------------------------------------------------------------------------
# Stochastic simulator: Bernoulli solver/verifier with exact reproducibility.
# ---------------------------------------------------------------------------


def _perturb_exact(target: str) -> str:
    """A wrong-but-well-formed variant of an exact-match target."""
    tokens = target.split()
    for i, token in enumerate(tokens):
        try:
            value = int(token)
        except ValueError:
            continue
        tokens[i] = str(value + 1)
        return " ".join(tokens)
    return target + " x"


def _simulated_answer(problem: Problem, correct: bool) -> str:
    kind = problem.rule.kind
    if kind == "exact":
        target = problem.rule.payload
        return target if correct else _perturb_exact(target)
    if kind == "3sat":
        instance = parse_cnf(problem.rule.payload)
        assignment = (
            satisfying_assignment(instance) if correct else falsifying_assignment(instance)
        )
        if assignment is None:
            raise ValueError(f"unsatisfiable instance in problem {problem.id}")
        return "\n".join(
            f"{name} {'T' if value else 'F'}" for name, value in sorted(assignment.items())
        )
    if kind == "sudoku":
        puzzle = parse_grid(problem.rule.payload)
        solution = solve_sudoku(puzzle)
        if solution is None:
            raise ValueError(f"unsolvable puzzle in problem {problem.id}")
        if not correct:
            rows = [list(row) for row in solution]
            blanks = [
                (r, c) for r in range(9) for c in range(9) if puzzle.givens[r][c] == 0
            ]
            r, c = blanks[0]
            rows[r][c] = rows[r][c] % 9 + 1  # any change breaks a row permutation
            solution = tuple(tuple(row) for row in rows)
        return format_grid(solution)
    # matmul ships as "exact"; anything else is a configuration fault
    raise ValueError(f"cannot simulate answers for rule kind {kind!r}")


def sim_solve(params: SimModelParams, problem: Problem, attempt: int) -> tuple[str, bool]:
    """One simulated solver attempt.

    Correctness is Bernoulli(solver_accuracy), deterministic in
    (seed, problem id, attempt); the returned text embeds a boxed answer whose
    correctness under the problem's rule matches the drawn bit.
    """
    draw = unit_uniform(params.seed, "solve", problem.id, attempt)
    correct = draw < params.solver_accuracy
    body = _simulated_answer(problem, correct)
    text = (
        f"Simulated solver output for {problem.id}, attempt {attempt}.\n"
        f"\\boxed{{\n{body}\n}}"
    )
    return text, correct


def sim_verify(
    params: SimModelParams, is_correct: bool, problem_id: str, attempt: int
) -> Verdict:
    """One simulated verifier judgment: accept with probability TPR on correct
    inputs and FPR on incorrect ones; always parseable."""
    p_accept = params.verifier_tpr if is_correct else params.verifier_fpr
    draw = unit_uniform(params.seed, "verify", problem_id, attempt)
    return Verdict(accepted=draw < p_accept, parse_ok=True)
