import pytest

from threestage import DesignInputs, HypothesisSpec, ParameterBox, make_design


def golden_inputs(a=5.0, **kw):
    spec = HypothesisSpec(0.0, 0.5)
    box = ParameterBox(-1.0, 1.5, 0.5, 2.0, 0.25)
    return DesignInputs(a, a, spec, box, **kw)


@pytest.fixture
def spec():
    return HypothesisSpec(0.0, 0.5)


@pytest.fixture
def golden():
    return make_design(golden_inputs())


@pytest.fixture
def golden8():
    return make_design(golden_inputs(8.0))


ACCEPTANCE_LINES = []


def record(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
