import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "lab",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "lab"))

CHAIN_SEED = 20240611


def random_chains(count=50, seed=CHAIN_SEED, k_max=6, lo=0.05, hi=1.0):
    """Reproducible corpus of box-spline width lists, k in [2, k_max]."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        k = int(rng.integers(2, k_max + 1))
        out.append([float(a) for a in rng.uniform(lo, hi, size=k)])
    return out


@pytest.fixture(scope="session")
def chain_corpus():
    return random_chains()


# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
