from __future__ import annotations

import json

import httpx
import pytest

from svbench.answers import correctness, extract_boxed
from svbench.models import (
    ChatEndpoint,
    EndpointConfig,
    GenerationParams,
    ModelSpec,
    PermanentEndpointError,
    RetryableEndpointError,
    SimModelParams,
    sim_solve,
    sim_verify,
)
from svbench.taskgen import gen_3sat, gen_matmul, gen_sudoku


def test_model_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec(name="m", family="f", size_b=1.0, kind="fine-tuned")
    with pytest.raises(ValueError):
        ModelSpec(name="m", family="f", size_b=0.0)


def test_generation_defaults():
    params = GenerationParams()
    assert params.temperature == 0.7
    assert params.top_p == 0.9
    assert params.max_tokens == 8192


# --- simulator ----------------------------------------------------------------


def _sim(acc=0.5, tpr=0.9, fpr=0.1, seed=5) -> SimModelParams:
    return SimModelParams(acc, tpr, fpr, seed=seed)


def test_sim_solve_extremes():
    problems = gen_matmul(0, 10)
    always = SimModelParams(1.0, 1.0, 0.0, seed=1)
    never = SimModelParams(0.0, 1.0, 0.0, seed=1)
    for problem in problems:
        _, correct = sim_solve(always, problem, 1)
        assert correct
        _, correct = sim_solve(never, problem, 1)
        assert not correct


def test_sim_solve_deterministic():
    problem = gen_matmul(0, 1)[0]
    params = _sim()
    assert sim_solve(params, problem, 3) == sim_solve(params, problem, 3)
    assert sim_solve(params, problem, 3) != sim_solve(params, problem, 4)


def test_sim_solve_calibration():
    # binomial concentration: 100k draws, tolerance 0.01
    params = _sim(acc=0.5)
    problem = gen_matmul(0, 1)[0]
    hits = sum(sim_solve(params, problem, attempt)[1] for attempt in range(100_000))
    assert abs(hits / 100_000 - 0.5) < 0.01


@pytest.mark.parametrize("gen", [gen_3sat, gen_sudoku, gen_matmul])
def test_sim_solve_text_round_trips_through_grading(gen):
    # the embedded boxed answer must grade exactly as the drawn bit
    params = _sim(acc=0.5, seed=17)
    for problem in gen(13, 8):
        for attempt in (1, 2, 3):
            text, drawn = sim_solve(params, problem, attempt)
            extracted = extract_boxed(text)
            assert extracted.present
            assert correctness(problem, extracted) == drawn


def test_sim_verify_perfect_and_degenerate():
    perfect = SimModelParams(0.5, 1.0, 0.0, seed=2)
    for is_correct in (True, False):
        for attempt in range(20):
            verdict = sim_verify(perfect, is_correct, "p1", attempt)
            assert verdict.parse_ok
            assert verdict.accepted == is_correct
    always = SimModelParams(0.5, 1.0, 1.0, seed=2)
    assert all(
        sim_verify(always, correct, "p1", i).accepted
        for correct in (True, False)
        for i in range(20)
    )


def test_sim_verify_calibration():
    params = _sim(tpr=0.9, seed=23)
    accepted = sum(
        sim_verify(params, True, f"p{i}", 1).accepted for i in range(100_000)
    )
    assert abs(accepted / 100_000 - 0.9) < 0.01


def test_sim_verify_deterministic():
    params = _sim()
    assert sim_verify(params, True, "p1", 2) == sim_verify(params, True, "p1", 2)


# --- endpoint client -------------------------------------------------------------


def _completion(text: str) -> dict:
    return {"choices": [{"message": {"content": text}}]}


def _spec() -> ModelSpec:
    return ModelSpec(name="test-model", family="testfam", size_b=1.0)


def test_endpoint_passthrough_and_payload():
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["payload"] = json.loads(request.content)
        seen["auth"] = request.headers.get("authorization")
        return httpx.Response(200, json=_completion("...\\boxed{42}"))

    config = EndpointConfig(base_url="http://fake/v1", backoff_s=0.0)
    endpoint = ChatEndpoint(config, transport=httpx.MockTransport(handler))
    text = endpoint.generate(_spec(), "prompt text", GenerationParams(), attempt_seed=777)
    assert text == "...\\boxed{42}"
    assert seen["payload"]["model"] == "test-model"
    assert seen["payload"]["messages"] == [{"role": "user", "content": "prompt text"}]
    assert seen["payload"]["temperature"] == 0.7
    assert seen["payload"]["top_p"] == 0.9
    assert seen["payload"]["max_tokens"] == 8192
    assert seen["payload"]["seed"] == 777
    assert seen["auth"] is None


def test_endpoint_seed_omitted_when_unsupported():
    def handler(request: httpx.Request) -> httpx.Response:
        assert "seed" not in json.loads(request.content)
        return httpx.Response(200, json=_completion("ok"))

    config = EndpointConfig(base_url="http://fake/v1", supports_seed=False, backoff_s=0.0)
    endpoint = ChatEndpoint(config, transport=httpx.MockTransport(handler))
    assert endpoint.generate(_spec(), "p", GenerationParams(), 1) == "ok"


def test_endpoint_auth_header_from_env(monkeypatch):
    monkeypatch.setenv("TEST_SVBENCH_KEY", "sk-secret")
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["auth"] = request.headers.get("authorization")
        return httpx.Response(200, json=_completion("ok"))

    config = EndpointConfig(
        base_url="http://fake/v1", auth_env_var="TEST_SVBENCH_KEY", backoff_s=0.0
    )
    endpoint = ChatEndpoint(config, transport=httpx.MockTransport(handler))
    endpoint.generate(_spec(), "p", GenerationParams(), 1)
    assert seen["auth"] == "Bearer sk-secret"


def test_endpoint_retries_then_succeeds():
    calls = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        calls["n"] += 1
        if calls["n"] <= 2:
            raise httpx.ConnectTimeout("boom")
        return httpx.Response(200, json=_completion("finally"))

    config = EndpointConfig(base_url="http://fake/v1", max_retries=3, backoff_s=0.0)
    endpoint = ChatEndpoint(config, transport=httpx.MockTransport(handler))
    assert endpoint.generate(_spec(), "p", GenerationParams(), 1) == "finally"
    assert calls["n"] == 3


def test_endpoint_retryable_status_then_exhaustion():
    calls = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        calls["n"] += 1
        return httpx.Response(429, text="slow down")

    config = EndpointConfig(base_url="http://fake/v1", max_retries=2, backoff_s=0.0)
    endpoint = ChatEndpoint(config, transport=httpx.MockTransport(handler))
    with pytest.raises(RetryableEndpointError) as err:
        endpoint.generate(_spec(), "p", GenerationParams(), 1)
    assert calls["n"] == 3  # initial call + 2 retries
    assert err.value.model == "test-model"


def test_endpoint_permanent_rejection_no_retry():
    calls = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        calls["n"] += 1
        return httpx.Response(400, text="bad model")

    config = EndpointConfig(base_url="http://fake/v1", max_retries=3, backoff_s=0.0)
    endpoint = ChatEndpoint(config, transport=httpx.MockTransport(handler))
    with pytest.raises(PermanentEndpointError):
        endpoint.generate(_spec(), "p", GenerationParams(), 1)
    assert calls["n"] == 1


def test_endpoint_malformed_response_is_permanent():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json={"unexpected": True})

    config = EndpointConfig(base_url="http://fake/v1", backoff_s=0.0)
    endpoint = ChatEndpoint(config, transport=httpx.MockTransport(handler))
    with pytest.raises(PermanentEndpointError):
        endpoint.generate(_spec(), "p", GenerationParams(), 1)
