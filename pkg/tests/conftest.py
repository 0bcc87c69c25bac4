import pytest

from cardaudit.electiondata import Contest, Vote, VoteRecords

# 60-card IRV election used throughout: four candidates, Dee wins after
# Cal and Bob are eliminated, and changing a single (Bob, Cal, Dee) CVR
# to (Cal, Dee) flips the winner to Ali.
ACCEPTANCE_LINES = []


def record_acceptance(line):
    """Collect an acceptance pass/fail line for the end-of-run report."""
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


IRV_PROFILE = [
    (("Ali",), 20),
    (("Dee", "Ali", "Bob"), 15),
    (("Cal", "Dee"), 9),
    (("Bob", "Cal", "Dee"), 6),
    (("Ali", "Cal"), 6),
    (("Bob", "Cal"), 4),
]


@pytest.fixture(scope="session")
def irv_contest():
    return Contest(id="mayor", kind="irv", candidates=("Ali", "Bob", "Cal", "Dee"))


@pytest.fixture(scope="session")
def irv_votes():
    votes = []
    for ranking, count in IRV_PROFILE:
        votes.extend([Vote.of_ranking(ranking)] * count)
    return votes


@pytest.fixture(scope="session")
def irv_cvrs(irv_votes):
    return VoteRecords(tuple((f"c{i}", v) for i, v in enumerate(irv_votes)))


@pytest.fixture(scope="session")
def plurality_contest():
    return Contest(id="twoway", kind="plurality", candidates=("Amy", "Ben"))
