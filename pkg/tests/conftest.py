from __future__ import annotations

import pytest

from svbench.engine import EvalRunner, SimBackend
from svbench.models import GenerationParams, ModelSpec, SimModelParams
from svbench.taskgen import CorrectnessRule, Problem

SAMPLE_CNF = (
    "(~c or ~b or d) and (d or ~b or ~c) and (d or a or c) and (~c or d or a) "
    "and (b or ~a or d) and (c or d or ~b)"
)

SAMPLE_SUDOKU = """7 4 2 1 _ 5 8 9 6
1 6 9 2 4 8 3 5 7
8 5 3 _ _ 7 2 1 4
2 _ 8 9 7 1 4 6 5
5 7 6 4 8 2 9 3 _
4 9 1 3 _ 6 _ 8 _
3 1 5 8 2 4 6 7 9
6 8 _ 7 1 _ 5 2 3
_ 2 7 5 6 _ 1 4 8"""

SAMPLE_MATMUL_A = ((0, 1, 1, 4), (-1, 3, 4, 4), (-2, -5, -5, 0), (-4, 4, 5, 0))
SAMPLE_MATMUL_B = ((1, 2, 0, 5), (1, -2, 0, 0), (3, -1, -3, -3), (2, 5, -4, 2))


def exact_problems(n: int, dataset: str = "sim") -> list[Problem]:
    """Tiny exact-match problems for mass simulation."""
    return [
        Problem(
            id=f"{dataset}-{i:06d}",
            dataset=dataset,
            prompt=f"Compute item {i}.",
            rule=CorrectnessRule(kind="exact", payload=str(100 + i)),
        )
        for i in range(n)
    ]


def sim_runner(
    acc: float, tpr: float, fpr: float, seed: int = 99, name: str = "sim-model"
) -> tuple[EvalRunner, ModelSpec]:
    spec = ModelSpec(name=name, family="simfam", size_b=1.0)
    backend = SimBackend(SimModelParams(acc, tpr, fpr, seed=seed))
    return EvalRunner({name: backend}), spec


@pytest.fixture
def gen_params() -> GenerationParams:
    return GenerationParams()
