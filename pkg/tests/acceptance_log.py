"""Shared registry for acceptance check outcomes.

Each acceptance test wraps its body in `recording(name)`; the conftest
terminal hook prints one PASS/FAIL line per recorded check at the end of
the run.
"""

from contextlib import contextmanager

RESULTS: dict[str, str] = {}


@contextmanager
def recording(name: str):
    try:
        yield
    except BaseException:
        RESULTS[name] = "FAIL"
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    else:
        RESULTS[name] = "PASS"
        print(f"[ACCEPTANCE] {name}: PASS")
