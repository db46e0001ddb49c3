from __future__ import annotations

import random

import pytest

from cmabfas.context import SipHeader
from cmabfas.corpus import CorpusSpec, generate_corpus


def header(*values: str, fill: str = "") -> SipHeader:
    values = list(values) + [fill] * (16 - len(values))
    return SipHeader(tuple(values))


def tree_headers() -> list[SipHeader]:
    """Eight headers laid out as leaves of a depth-3 binary tree.

    Leaves split at the top bit agree on 0 attributes, at the middle bit on 4,
    at the last bit on 10.
    """
    out = []
    for i in range(8):
        top, mid, low = i >> 2, (i >> 1) & 1, i & 1
        values = [f"t{top}"] * 4 + [f"m{top}{mid}"] * 6 + [f"l{top}{mid}{low}"] * 6
        values = [f"s{s}:{v}" for s, v in enumerate(values)]
        out.append(SipHeader(tuple(values)))
    return out


def tree_mean(i: int, a: int) -> float:
    """Mean reward of action ``a`` (1-based) on tree leaf ``i``."""
    top, mid, low = i >> 2, (i >> 1) & 1, i & 1
    base = [0.3, 0.5, 0.6][a - 1]
    return min(0.95, max(0.05, base + 0.25 * (top if a == 1 else -top) + 0.1 * mid * (a - 2) + 0.03 * low))


def dyadic_reward(rng: random.Random, mean: float) -> float:
    """Reward in {0, 1/1024, ..., 1} with the given mean (exactly summable in floats)."""
    raw = mean + rng.uniform(-0.25, 0.25)
    return min(1024, max(0, round(raw * 1024))) / 1024


@pytest.fixture(scope="session")
def small_corpus():
    spec = CorpusSpec(
        counts={"normal": 40, "spitter": 15, "honeypot": 3, "warvox": 6, "voipbot": 20},
        seed=7,
    )
    return generate_corpus(spec)


@pytest.fixture(scope="session")
def default_corpus():
    return generate_corpus(CorpusSpec())


# Acceptance results, one line per criterion, echoed at the end of the session.
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
