import json
import os

import numpy as np
import pytest

FIXTURES_DIR = os.path.join(os.path.dirname(__file__), "fixtures")
REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


@pytest.fixture(scope="session")
def pilot():
    with open(os.path.join(FIXTURES_DIR, "pilot_frozen.json"), encoding="utf-8") as fh:
        return json.load(fh)


def random_instances(count=100, max_m=50, max_n=200, seed=1234):
    """Seeded (M, n, probs, counts) instances for oracle-equivalence sweeps."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        M = int(rng.integers(1, max_m + 1))
        n = int(rng.integers(1, max_n + 1))
        probs = rng.dirichlet(np.ones(M))
        counts = rng.multinomial(n, probs)
        out.append((M, n, probs, counts))
    return out
