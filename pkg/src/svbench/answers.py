"""Boxed-answer extraction and correctness evaluation for every task family.

Extraction is total: any text maps to an ``ExtractedAnswer``, and a missing or
malformed final box is signalled only through ``present=False``. Verifier text
maps to exactly one of accept / reject / unparseable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .taskgen import (
    Problem,
    SatInstance,
    SudokuPuzzle,
    occurring_variables,
    parse_cnf,
    parse_grid,
)


class UnknownRuleError(ValueError):
    """Raised when a problem carries a rule kind no checker handles."""


@dataclass(frozen=True)
class ExtractedAnswer:
    raw: str
    present: bool


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    parse_ok: bool


_BOX_OPEN = re.compile(r"\\boxed\s*\{")

# A standalone number with thousands separators, e.g. "1,234" or "-12,345.6".
_SEPARATED_NUMBER = re.compile(r"[+-]?\d{1,3}(?:,\d{3})+(?:\.\d+)?")


def extract_boxed(text: str) -> ExtractedAnswer:
    """Interior of the last boxed region, whitespace-trimmed.

    Only the final box counts: if its braces never balance the answer is
    treated as missing rather than falling back to an earlier box.
    """
    last = None
    for match in _BOX_OPEN.finditer(text):
        last = match
    if last is None:
        return ExtractedAnswer(raw="", present=False)
    start = last.end()
    depth = 1
    for pos in range(start, len(text)):
        char = text[pos]
        if char == "{":
            depth += 1
        elif char == "}":
            depth -= 1
            if depth == 0:
                return ExtractedAnswer(raw=text[start:pos].strip(), present=True)
    return ExtractedAnswer(raw="", present=False)


def canonical(text: str) -> str:
    """Trim, collapse whitespace runs (incl. newlines) to single spaces, and
    drop thousands separators from standalone numeric tokens."""
    tokens = []
    for token in text.split():
        if _SEPARATED_NUMBER.fullmatch(token):
            token = token.replace(",", "")
        tokens.append(token)
    return " ".join(tokens)


def _require_present(answer: ExtractedAnswer) -> None:
    if not answer.present:
        raise ValueError("answer has no extracted box")


def check_exact(answer: ExtractedAnswer, target: str) -> bool:
    _require_present(answer)
    return canonical(answer.raw) == canonical(target)


def _parse_assignment(text: str) -> dict[str, bool] | None:
    """Parse 'name T|F' lines; None when any non-empty line is malformed."""
    assignment: dict[str, bool] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or parts[1] not in ("T", "F"):
            return None
        assignment[parts[0]] = parts[1] == "T"
    return assignment


def check_3sat(instance: SatInstance, answer: ExtractedAnswer) -> bool:
    """True iff every occurring variable is assigned and every clause has a
    true literal. Assignments for non-occurring variables are ignored;
    malformed lines or missing variables count as incorrect."""
    _require_present(answer)
    assignment = _parse_assignment(answer.raw)
    if assignment is None:
        return False
    for name in occurring_variables(instance):
        if name not in assignment:
            return False
    for clause in instance.clauses:
        if not any(assignment[name] != negated for name, negated in clause):
            return False
    return True


def check_sudoku(puzzle: SudokuPuzzle, answer: ExtractedAnswer) -> bool:
    """True iff the answer is a 9x9 digit grid that agrees with every given
    and has all rows, columns, and 3x3 boxes as permutations of 1-9."""
    _require_present(answer)
    rows: list[list[int]] = []
    for line in answer.raw.splitlines():
        line = line.strip()
        if not line:
            continue
        cells = []
        for token in line.split():
            if not (token.isdigit() and 1 <= int(token) <= 9):
                return False
            cells.append(int(token))
        rows.append(cells)
    if len(rows) != 9 or any(len(row) != 9 for row in rows):
        return False
    for r in range(9):
        for c in range(9):
            given = puzzle.givens[r][c]
            if given != 0 and rows[r][c] != given:
                return False
    full = set(range(1, 10))
    for r in range(9):
        if set(rows[r]) != full:
            return False
    for c in range(9):
        if {rows[r][c] for r in range(9)} != full:
            return False
    for br in range(0, 9, 3):
        for bc in range(0, 9, 3):
            box = {rows[br + i][bc + j] for i in range(3) for j in range(3)}
            if box != full:
                return False
    return True


def parse_verdict(text: str) -> Verdict:
    """Map verifier text to accept/reject/unparseable via its final box."""
    extracted = extract_boxed(text)
    if not extracted.present:
        return Verdict(accepted=False, parse_ok=False)
    token = canonical(extracted.raw).lower()
    if token == "correct":
        return Verdict(accepted=True, parse_ok=True)
    if token == "incorrect":
        return Verdict(accepted=False, parse_ok=True)
    return Verdict(accepted=False, parse_ok=False)


def correctness(problem: Problem, answer: ExtractedAnswer) -> bool:
    """The correctness indicator: dispatch on the problem's rule kind."""
    _require_present(answer)
    kind = problem.rule.kind
    if kind == "exact":
        return check_exact(answer, problem.rule.payload)
    if kind == "3sat":
        return check_3sat(parse_cnf(problem.rule.payload), answer)
    if kind == "sudoku":
        return check_sudoku(parse_grid(problem.rule.payload), answer)
    raise UnknownRuleError(f"unknown rule kind: {kind!r}")
