"""Collects one verdict line per acceptance criterion for the terminal summary."""

LINES: dict[int, str] = {}


def record(number: int, passed: bool, detail: str) -> None:
    LINES[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(LINES[number])
