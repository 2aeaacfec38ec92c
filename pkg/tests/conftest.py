import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import numpy as np
import pytest


@pytest.fixture(scope="session")
def corpus_split():
    """A 100-game synthetic 19x19 corpus split 90/10 into training pairs."""
    from convgo import corpus, sgf

    rng = np.random.default_rng(0)
    games = [corpus.generate_game(rng) for _ in range(100)]
    pairs = [sgf.to_training_pairs(g) for g in games]
    train = [p for ps in pairs[:90] for p in ps]
    held = [p for ps in pairs[90:] for p in ps]
    return games, train, held


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
