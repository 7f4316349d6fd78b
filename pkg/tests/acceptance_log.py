"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

import contextlib
import sys
import time

RESULTS: list[str] = []


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record PASS if the block completes, FAIL with the reason otherwise."""
    notes: list[str] = []
    start = time.perf_counter()
    try:
        yield notes
    except BaseException as exc:
        reason = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        _emit(f"ACCEPTANCE {number} FAIL  {title}: {reason}")
        raise
    detail = "; ".join(notes)
    _emit(f"ACCEPTANCE {number} PASS  {title} ({time.perf_counter() - start:.1f} s){': ' + detail if detail else ''}")


def _emit(line: str) -> None:
    RESULTS.append(line)
    print(line, file=sys.__stdout__, flush=True)
