"""Shared registry for acceptance-criterion outcomes.

Each criterion test records exactly one line here before asserting, so
the terminal summary shows one pass/fail line per criterion even when
pytest captures stdout.
"""

RESULTS: list[tuple[int, str]] = []


def record(number: int, passed: bool, detail: str) -> bool:
    """Register a criterion outcome; returns ``passed`` for the assert."""
    verdict = "PASS" if passed else "FAIL"
    RESULTS.append((number, f"Criterion {number:2d}: {verdict} - {detail}"))
    print(RESULTS[-1][1])
    return passed
