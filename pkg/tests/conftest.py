import pytest

from bioner.corpus import bundled_schemas
from bioner.model import EntitySpan, Sentence

CONSTRUCT = "IL-5 promoter/enhancer-luciferase gene construct"

# filled by test_acceptance, printed once at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def schemas():
    return bundled_schemas()


@pytest.fixture(scope="session")
def genia(schemas):
    return schemas["GENIA"]


@pytest.fixture
def construct():
    ents = (
        EntitySpan(0, 48, "DNA", CONSTRUCT),
        EntitySpan(0, 4, "Protein", "IL-5"),
        EntitySpan(23, 33, "Protein", "luciferase"),
    )
    return Sentence("construct", CONSTRUCT, "en", "GENIA", ents)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
