from fractions import Fraction

import pytest

from darkvenue.model import ModelParams, with_implied_gamma

VALS = (10.0, 9.0, 8.0, 7.95, 7.9, 6.0)


def game(v0=20.0, c=10.0, p=0.5, **kw) -> ModelParams:
    """Small-gap game; gamma is set to the simulated lit auction's value."""
    return with_implied_gamma(ModelParams(5, kw.pop("vals", VALS), v0, c, p, 0.01, 0.5, 1.05, **kw))


class ExactParams:
    """Rational stand-in for ModelParams, for exact formula checks."""

    def __init__(self, B, vals, v0, c, p, gamma):
        self.B = B
        self.vals = tuple(Fraction(x) for x in vals)
        self.v0, self.c, self.p, self.gamma = Fraction(v0), Fraction(c), Fraction(p), Fraction(gamma)

    def v(self, i):
        return self.v0 if i == 0 else self.vals[i - 1]

    @property
    def vb2(self):
        return self.v(self.B - 2)

    @property
    def vb1(self):
        return self.v(self.B - 1)

    @property
    def q(self):
        return 1 - (1 - self.p) ** 2


@pytest.fixture(scope="session")
def partial_game():
    return game()


@pytest.fixture(scope="session")
def full_game():
    return game(v0=12.0)


@pytest.fixture
def spec_params():
    return ModelParams(5, (10, 9, 8, 7, 6, 5), 9.5, 9.0, 0.5, 0.01, 0.5, 1.05)


# acceptance results, printed once at the end of the run
ACCEPTANCE: dict = {}


@pytest.fixture
def record():
    def _record(n: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {n:>2}: {detail}"
        ACCEPTANCE[n] = line
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
