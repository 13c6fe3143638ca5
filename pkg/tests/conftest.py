import numpy as np
import pytest

from mlpgrade.expr import RawSolution

# Two correct solution paths to "(x^2 + x + sin^2 x + cos^2 x)(2x - 3)".
# Path A expands first and keeps the trig terms grouped; path B applies the
# Pythagorean identity first. They share the starting expression and the
# final answer, giving 7 unique expressions across the pair.
PAIR_A = [
    "(x^2+x+sin^2 x+cos^2 x)(2x-3)",
    "(2x-3)x^2+(2x-3)x+(2x-3)sin^2 x+(2x-3)cos^2 x",
    "2x^3+2x^2-3x^2-3x+(2x-3)(sin^2 x+cos^2 x)",
    "2x^3-x^2-x-3",
]
PAIR_B = [
    "(x^2+x+sin^2 x+cos^2 x)(2x-3)",
    "(x^2+x+1)(2x-3)",
    "(2x-3)(x^2+x)+2x-3",
    "x^2(2x-3)+x(2x-3)+2x-3",
    "2x^3-x^2-x-3",
]

# Two solutions to the derivative question "(x^3 + sin x) / e^x": a correct
# one and one ending in the wrong final line, sharing only the starting
# derivative expression.
DERIV_A = [
    "D[(x^3+sin x)/e^x]",
    "(3x^2+cos x)/e^x-(x^3+sin x)/e^x",
    "(3x^2+cos x-x^3-sin x)/e^x",
]
DERIV_B = [
    "D[(x^3+sin x)/e^x]",
    "((3x^2+cos x)e^x-(x^3+sin x)e^x)/e^(2x)",
    "(2x^2-x^3+cos x-sin x)/e^x",
]


def chain(exprs):
    return " = ".join(exprs)


@pytest.fixture
def pair_solutions():
    return [
        RawSolution("a", chain(PAIR_A)),
        RawSolution("b", chain(PAIR_B)),
    ]


@pytest.fixture
def deriv_solutions():
    return [
        RawSolution("a", chain(DERIV_A)),
        RawSolution("b", chain(DERIV_B)),
    ]


def planted_spec(**overrides):
    from mlpgrade.evaluation import SyntheticSpec

    kw = dict(N=120, V=60, K_star=6, support_size=10, overlap=0.2, noise=0.05, seed=0)
    kw.update(overrides)
    return SyntheticSpec(**kw)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion."""
    reports = [
        r
        for outcome in ("passed", "failed")
        for r in terminalreporter.stats.get(outcome, [])
        if r.when == "call" and "test_acceptance.py" in r.nodeid
    ]
    if not reports:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for r in reports:
        name = r.nodeid.split("::")[-1].removeprefix("test_")
        terminalreporter.write_line(f"{'PASS' if r.passed else 'FAIL'}: {name}")
