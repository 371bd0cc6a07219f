"""Shared fixtures: a seeded suite of small random CTMCs."""

from fractions import Fraction
from typing import List

import numpy as np
import pytest

from ctmcrand.ctmc import CtmcModel
from ctmcrand.transition import Initialization

MODEL_COUNT = 1000
NAMES = "abcd"


def random_model(seed: int) -> CtmcModel:
    """A model on 2 to 4 states with rational rates; some states are terminal."""
    rng = np.random.default_rng(seed)
    names = NAMES[: int(rng.integers(2, 5))]
    rows = {}
    for q in names:
        if rng.random() < 0.2:
            continue
        others = [r for r in names if r != q]
        targets = [r for r in others if rng.random() < 0.6]
        if not targets:
            targets = [others[int(rng.integers(0, len(others)))]]
        rows[q] = {
            r: Fraction(int(rng.integers(1, 6)), int(rng.integers(1, 4))) for r in targets
        }
    support = [q for q in names if rng.random() < 0.5] or [names[0]]
    weights = [int(rng.integers(1, 4)) for _ in support]
    init = Initialization({q: Fraction(w, sum(weights)) for q, w in zip(support, weights)})
    return CtmcModel.from_table(rows, init)


@pytest.fixture(scope="session")
def random_models() -> List[CtmcModel]:
    return [random_model(seed) for seed in range(MODEL_COUNT)]
