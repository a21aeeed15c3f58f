import pytest

from oracles import TOY_AFTER, TOY_BEFORE
from unknown_unknowns import Observation, build_sample


def make_sample(rows):
    return build_sample(Observation(s, e, v) for s, e, v in rows)


@pytest.fixture
def toy_before():
    return make_sample(TOY_BEFORE)


@pytest.fixture
def toy_after():
    return make_sample(TOY_AFTER)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
