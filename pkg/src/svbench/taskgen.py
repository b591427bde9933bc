"""Seeded generation of the three synthetic task families.

Each generator is a pure function of (seed, count): instance i draws from its
own substream, so corpora are byte-identical across runs and prefixes agree
across counts. Every emitted instance is guaranteed solvable -- CNFs are
resampled until a brute-force check finds a satisfying assignment, Sudoku
puzzles are blanked from a completed grid, and matrix products ship their
exact answer.

Problems serialize to line-delimited JSON records:
``{id, dataset, prompt, rule_kind, rule_payload}`` where ``rule_payload`` is
the exact-match target string or the serialized instance for rule-checked
tasks (the CNF formula text for 3SAT, the underscore grid for Sudoku).
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .rng import SplitMix64, derive_seed

Literal = tuple[str, bool]  # (variable name, negated)

VAR_RANGE = (2, 8)
CLAUSE_RANGE = (2, 8)
SUDOKU_BLANKS = 12
MATMUL_SIZE = 4
MATMUL_ENTRY_RANGE = (-5, 5)
DEFAULT_COUNT = 1000

# Backtracking node budget per grid before a deterministic restart.
_SUDOKU_NODE_BUDGET = 200_000


@dataclass(frozen=True)
class SatInstance:
    """A 3-CNF formula; ``variables`` is the declared alphabet in order."""

    variables: tuple[str, ...]
    clauses: tuple[tuple[Literal, Literal, Literal], ...]


@dataclass(frozen=True)
class SudokuPuzzle:
    """9x9 givens; 0 marks a blank cell."""

    givens: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class MatMulInstance:
    a: tuple[tuple[int, ...], ...]
    b: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class CorrectnessRule:
    """How an extracted answer is judged: exact target or task-rule payload."""

    kind: str  # "exact" | "3sat" | "sudoku"
    payload: str


@dataclass(frozen=True)
class Problem:
    id: str
    dataset: str
    prompt: str
    rule: CorrectnessRule


# ---------------------------------------------------------------------------
# Prompt templates. Fixed prose is byte-frozen (see tests/golden); only the
# {slot} tokens vary per instance. Slots are filled with str.partition so
# instance text is never re-scanned for braces.
# ---------------------------------------------------------------------------

PROMPT_3SAT = """## Problem Definition

**SAT (Boolean Satisfiability Problem)** is a fundamental problem in computer science where we need to determine if there exists an assignment of Boolean values (True/False) to variables that makes a given Boolean formula evaluate to True.
**Variables**: In this problem, variables are named as single letters. Each variable can be assigned either True (T) or False (F).
**Literals**: A literal is either a variable (like a) or its negation (like ~a, meaning "not a"). If a is True, then ~a is False, and vice versa.
**Clauses**: A clause is a disjunction (OR operation) of literals. A clause is satisfied (True) if at least one of its literals is True. For example, the clause (a or ~b) is True if either a is True OR b is False (or both).
**CNF (Conjunctive Normal Form)**: The Boolean formula is given in CNF, which is a conjunction (AND operation) of multiple clauses. The entire formula is satisfied only if ALL clauses are satisfied simultaneously.
**3SAT**: This is a special case of SAT where every clause contains exactly 3 literals.

## The Problem

Find a satisfying assignment for the following CNF formula: {formula}

## Instructions

Provide your answer as a list of variable assignments, one per line, in the format "variable_name T" or "variable_name F." For example:
\\boxed{
a T
b F
}
This means a=True, b=False.

Another example answer is
\\boxed{
a F
b T
}
This means a=False, b=True.

Output and only output the T/F values for the variables that appear in the provided CNF formula."""

PROMPT_SUDOKU = """## Sudoku Problem

**Sudoku** is a logic-based number-placement puzzle. The objective is to fill a 9x9 grid with numbers so that each column, each row, and each of the 3x3 sub-grids contains all of the numbers from 1 to 9.

## The Puzzle

Complete the following 9x9 Sudoku grid (empty cells are marked with '_'):

{grid}

## Instructions

Provide your answer as a completed 9x9 grid with all numbers filled in, formatted exactly like the puzzle above but with numbers instead of underscores.

For example, a completed 4x4 grid should look like:
\\boxed{
1 2 3 4
3 4 1 2
2 3 4 1
4 1 2 3
}"""

PROMPT_MATMUL = """## Matrix Multiplication Problem

**Matrix Multiplication** is a fundamental operation in linear algebra where we compute the product of two matrices. For two square matrices A and B of size 4x4, the product C = A x B is computed as:

C[i][j] = Sum(k=0 to 3) A[i][k] x B[k][j]

## The Problem

Compute the product of the following two 4x4 matrices:

**Matrix A:**
{matrix_a}

**Matrix B:**
{matrix_b}

## Instructions

Provide your answer as the resulting 4x4 matrix C = A x B, formatted with each row
on a separate line and numbers separated by spaces.

For example, a 2x2 result matrix is formatted like:
\\boxed{
1 2
3 4
}"""


def _fill_slot(template: str, slot: str, value: str) -> str:
    head, found, tail = template.partition("{" + slot + "}")
    if not found:
        raise ValueError(f"template has no slot {slot!r}")
    return head + value + tail


# ---------------------------------------------------------------------------
# Formatting and parsing of instance payloads.
# ---------------------------------------------------------------------------


def format_literal(literal: Literal) -> str:
    name, negated = literal
    return f"~{name}" if negated else name


def format_cnf(instance: SatInstance) -> str:
    parts = []
    for clause in instance.clauses:
        parts.append("(" + " or ".join(format_literal(lit) for lit in clause) + ")")
    return " and ".join(parts)


def parse_cnf(text: str) -> SatInstance:
    """Inverse of :func:`format_cnf`; variables are the occurring letters."""
    clauses = []
    for chunk in text.split(" and "):
        chunk = chunk.strip()
        if not (chunk.startswith("(") and chunk.endswith(")")):
            raise ValueError(f"malformed clause: {chunk!r}")
        literals = []
        for raw in chunk[1:-1].split(" or "):
            raw = raw.strip()
            negated = raw.startswith("~")
            name = raw[1:] if negated else raw
            if len(name) != 1 or name not in string.ascii_lowercase:
                raise ValueError(f"malformed literal: {raw!r}")
            literals.append((name, negated))
        if len(literals) != 3:
            raise ValueError(f"clause must have 3 literals: {chunk!r}")
        clauses.append(tuple(literals))
    if not clauses:
        raise ValueError("empty formula")
    variables = tuple(sorted({name for clause in clauses for name, _ in clause}))
    return SatInstance(variables=variables, clauses=tuple(clauses))


def occurring_variables(instance: SatInstance) -> tuple[str, ...]:
    return tuple(sorted({name for clause in instance.clauses for name, _ in clause}))


def format_grid(givens: Iterable[Iterable[int]]) -> str:
    """Render rows as space-separated digits, blanks (0) as underscores."""
    return "\n".join(
        " ".join("_" if cell == 0 else str(cell) for cell in row) for row in givens
    )


def parse_grid(text: str) -> SudokuPuzzle:
    rows = []
    for line in text.strip().splitlines():
        line = line.strip()
        if not line:
            continue
        cells = []
        for token in line.split():
            if token == "_":
                cells.append(0)
            elif token.isdigit() and 1 <= int(token) <= 9:
                cells.append(int(token))
            else:
                raise ValueError(f"malformed grid cell: {token!r}")
        rows.append(tuple(cells))
    if len(rows) != 9 or any(len(row) != 9 for row in rows):
        raise ValueError("grid must be 9x9")
    return SudokuPuzzle(givens=tuple(rows))


def format_matrix(rows: Iterable[Iterable[int]]) -> str:
    return "\n".join(" ".join(str(cell) for cell in row) for row in rows)


def matmul_product(
    a: Iterable[Iterable[int]], b: Iterable[Iterable[int]]
) -> tuple[tuple[int, ...], ...]:
    a_rows = [tuple(row) for row in a]
    b_rows = [tuple(row) for row in b]
    n = len(a_rows)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            row.append(sum(a_rows[i][k] * b_rows[k][j] for k in range(n)))
        out.append(tuple(row))
    return tuple(out)


def render_prompt(instance: SatInstance | SudokuPuzzle | MatMulInstance) -> str:
    if isinstance(instance, SatInstance):
        return _fill_slot(PROMPT_3SAT, "formula", format_cnf(instance))
    if isinstance(instance, SudokuPuzzle):
        return _fill_slot(PROMPT_SUDOKU, "grid", format_grid(instance.givens))
    if isinstance(instance, MatMulInstance):
        text = _fill_slot(PROMPT_MATMUL, "matrix_a", format_matrix(instance.a))
        return _fill_slot(text, "matrix_b", format_matrix(instance.b))
    raise TypeError(f"not a task instance: {type(instance).__name__}")


# ---------------------------------------------------------------------------
# 3SAT: uniform clauses, brute-force satisfiability, resample on failure.
# ---------------------------------------------------------------------------


def _clause_satisfied(clause: Iterable[Literal], assignment: dict[str, bool]) -> bool:
    return any(assignment[name] != negated for name, negated in clause)


def satisfying_assignment(instance: SatInstance) -> dict[str, bool] | None:
    """First satisfying assignment over the occurring variables, or None."""
    names = occurring_variables(instance)
    for mask in range(1 << len(names)):
        assignment = {name: bool((mask >> i) & 1) for i, name in enumerate(names)}
        if all(_clause_satisfied(clause, assignment) for clause in instance.clauses):
            return assignment
    return None


def falsifying_assignment(instance: SatInstance) -> dict[str, bool]:
    """An assignment violating at least one clause.

    Always exists for our instances: a clause over k distinct variables is
    falsified by the assignments setting all its literals false.
    """
    names = occurring_variables(instance)
    for mask in range(1 << len(names)):
        assignment = {name: bool((mask >> i) & 1) for i, name in enumerate(names)}
        if not all(_clause_satisfied(clause, assignment) for clause in instance.clauses):
            return assignment
    raise ValueError("formula is satisfied by every assignment")


def _sample_clause(rng: SplitMix64, names: str) -> tuple[Literal, Literal, Literal]:
    # 3 distinct variables when the alphabet allows it; with only 2 variables
    # a clause repeats one of them (same polarity, so never tautological).
    distinct = rng.sample(list(names), min(3, len(names)))
    chosen = list(distinct)
    while len(chosen) < 3:
        chosen.append(distinct[rng.randrange(len(distinct))])
    polarity = {name: rng.random() < 0.5 for name in distinct}
    return tuple((name, polarity[name]) for name in chosen)  # type: ignore[return-value]


def _sample_sat_instance(rng: SplitMix64) -> SatInstance:
    while True:
        n_vars = rng.randint(*VAR_RANGE)
        n_clauses = rng.randint(*CLAUSE_RANGE)
        names = string.ascii_lowercase[:n_vars]
        clauses = tuple(_sample_clause(rng, names) for _ in range(n_clauses))
        instance = SatInstance(variables=tuple(names), clauses=clauses)
        if len(occurring_variables(instance)) < 2:
            continue
        if satisfying_assignment(instance) is not None:
            return instance


def gen_3sat(seed: int, count: int) -> list[Problem]:
    if count < 1:
        raise ValueError("count must be >= 1")
    problems = []
    for i in range(count):
        rng = SplitMix64(derive_seed(seed, "3sat", i))
        instance = _sample_sat_instance(rng)
        problems.append(
            Problem(
                id=f"3sat-{i:05d}",
                dataset="3sat",
                prompt=render_prompt(instance),
                rule=CorrectnessRule(kind="3sat", payload=format_cnf(instance)),
            )
        )
    return problems


# ---------------------------------------------------------------------------
# Sudoku: randomized-backtracking full grid, then blank 12 uniform cells.
# ---------------------------------------------------------------------------


def _placement_ok(grid: list[list[int]], r: int, c: int, val: int) -> bool:
    for k in range(9):
        if grid[r][k] == val or grid[k][c] == val:
            return False
    br, bc = 3 * (r // 3), 3 * (c // 3)
    for i in range(br, br + 3):
        for j in range(bc, bc + 3):
            if grid[i][j] == val:
                return False
    return True


def _try_full_grid(rng: SplitMix64) -> list[list[int]] | None:
    grid = [[0] * 9 for _ in range(9)]
    nodes = 0

    def fill(pos: int) -> bool:
        nonlocal nodes
        if pos == 81:
            return True
        nodes += 1
        if nodes > _SUDOKU_NODE_BUDGET:
            return False
        r, c = divmod(pos, 9)
        order = list(range(1, 10))
        rng.shuffle(order)
        for val in order:
            if _placement_ok(grid, r, c, val):
                grid[r][c] = val
                if fill(pos + 1):
                    return True
                grid[r][c] = 0
        return False

    return grid if fill(0) else None


def _full_grid(seed: int, index: int) -> tuple[list[list[int]], SplitMix64]:
    # Deterministic restarts: exceed the node budget and retry a fresh stream.
    for retry in range(64):
        rng = SplitMix64(derive_seed(seed, "sudoku", index, retry))
        grid = _try_full_grid(rng)
        if grid is not None:
            return grid, rng
    raise RuntimeError("sudoku grid generation exhausted retries")


def solve_sudoku(puzzle: SudokuPuzzle) -> tuple[tuple[int, ...], ...] | None:
    """First completion of the puzzle by backtracking, or None."""
    grid = [list(row) for row in puzzle.givens]
    blanks = [(r, c) for r in range(9) for c in range(9) if grid[r][c] == 0]

    def fill(pos: int) -> bool:
        if pos == len(blanks):
            return True
        r, c = blanks[pos]
        for val in range(1, 10):
            if _placement_ok(grid, r, c, val):
                grid[r][c] = val
                if fill(pos + 1):
                    return True
                grid[r][c] = 0
        return False

    if not fill(0):
        return None
    return tuple(tuple(row) for row in grid)


def gen_sudoku(seed: int, count: int) -> list[Problem]:
    if count < 1:
        raise ValueError("count must be >= 1")
    problems = []
    for i in range(count):
        grid, rng = _full_grid(seed, i)
        for r, c in (divmod(cell, 9) for cell in rng.sample(range(81), SUDOKU_BLANKS)):
            grid[r][c] = 0
        puzzle = SudokuPuzzle(givens=tuple(tuple(row) for row in grid))
        problems.append(
            Problem(
                id=f"sudoku-{i:05d}",
                dataset="sudoku",
                prompt=render_prompt(puzzle),
                rule=CorrectnessRule(kind="sudoku", payload=format_grid(puzzle.givens)),
            )
        )
    return problems


# ---------------------------------------------------------------------------
# Matrix multiplication: entries uniform in [-5, 5], exact-match target.
# ---------------------------------------------------------------------------


def gen_matmul(seed: int, count: int) -> list[Problem]:
    if count < 1:
        raise ValueError("count must be >= 1")
    lo, hi = MATMUL_ENTRY_RANGE
    problems = []
    for i in range(count):
        rng = SplitMix64(derive_seed(seed, "matmul", i))
        a = tuple(
            tuple(rng.randint(lo, hi) for _ in range(MATMUL_SIZE))
            for _ in range(MATMUL_SIZE)
        )
        b = tuple(
            tuple(rng.randint(lo, hi) for _ in range(MATMUL_SIZE))
            for _ in range(MATMUL_SIZE)
        )
        instance = MatMulInstance(a=a, b=b)
        target = format_matrix(matmul_product(a, b))
        problems.append(
            Problem(
                id=f"matmul-{i:05d}",
                dataset="matmul",
                prompt=render_prompt(instance),
                rule=CorrectnessRule(kind="exact", payload=target),
            )
        )
    return problems


GENERATORS = {"3sat": gen_3sat, "sudoku": gen_sudoku, "matmul": gen_matmul}


# ---------------------------------------------------------------------------
# Problem records.
# ---------------------------------------------------------------------------


def problem_to_record(problem: Problem) -> dict:
    return {
        "id": problem.id,
        "dataset": problem.dataset,
        "prompt": problem.prompt,
        "rule_kind": problem.rule.kind,
        "rule_payload": problem.rule.payload,
    }


def problem_from_record(record: dict) -> Problem:
    return Problem(
        id=record["id"],
        dataset=record["dataset"],
        prompt=record["prompt"],
        rule=CorrectnessRule(kind=record["rule_kind"], payload=record["rule_payload"]),
    )


def write_problems(problems: Iterable[Problem], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for problem in problems:
            handle.write(json.dumps(problem_to_record(problem), sort_keys=True) + "\n")


def read_problems(path: str | Path) -> list[Problem]:
    problems = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                problems.append(problem_from_record(json.loads(line)))
    return problems
