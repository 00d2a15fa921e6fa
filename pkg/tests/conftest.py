import math

import pytest

from multiergodic import validate_spec

LN2 = math.log(2)
GOLDEN_Y = (math.sqrt(5) - 1) / 2

# m = q = 2, equal exponents, phi(i, j) = i*j
SYM = {"q": 2, "intervals": [[0, 0.5], [0.5, 1]], "phi": [[0, 0], [0, 1]]}
# lambda = (ln 2, ln 4): the similarity dimension is log2 of the golden ratio
GOLDEN = {"q": 2, "intervals": [[0, 0.5], [0.75, 1]], "phi": [[0, 0], [0, 1]]}
GOLDEN_Q3 = {**GOLDEN, "q": 3}
TRI = {
    "q": 3,
    "intervals": [[0, 0.25], [0.375, 0.5], [0.75, 1]],
    "phi": [[0, 1, 0], [1, 0, 2], [0, -1, 1]],
}
FIRST = {"q": 2, "intervals": [[0, 0.5], [0.5, 1]], "phi": [[0, 0], [1, 1]]}
CONST = {"q": 2, "intervals": [[0, 0.5], [0.75, 1]], "phi": [[0.7, 0.7], [0.7, 0.7]]}

ALL_SPECS = {"sym": SYM, "golden": GOLDEN, "golden_q3": GOLDEN_Q3, "tri": TRI, "first": FIRST, "const": CONST}


@pytest.fixture
def sym():
    return validate_spec(SYM)


@pytest.fixture
def golden():
    return validate_spec(GOLDEN)


@pytest.fixture
def tri():
    return validate_spec(TRI)


@pytest.fixture
def const():
    return validate_spec(CONST)


@pytest.fixture(params=sorted(ALL_SPECS))
def any_spec(request):
    return validate_spec(ALL_SPECS[request.param])


_ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}" + (f" ({detail})" if detail else "")
    _ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
