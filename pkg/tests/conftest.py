import numpy as np
import pytest

from nosig_usd.blackbox import QuantumScenario
from nosig_usd.qcore import (DensityOperator, NoiseSpec, apply_noise, bell_state, ideal_alice_povms,
                             random_density, random_povm)
from nosig_usd.stategen import generate_ensemble


def random_scenario(rng: np.random.Generator, d1: int = None, d2: int = None,
                    outcomes: int = None) -> QuantumScenario:
    """Random joint state (pure or mixed), random binary Alice POVMs, random Eve POVM."""
    d1 = d1 or int(rng.integers(2, 5))
    d2 = d2 or int(rng.integers(2, 5))
    rank = 1 if rng.random() < 0.5 else int(rng.integers(2, d1 * d2 + 1))
    state = random_density(rng, d1 * d2, rank)
    alice = (random_povm(rng, d1, 2), random_povm(rng, d1, 2))
    eve = random_povm(rng, d2, outcomes or int(rng.integers(2, 9)))
    return QuantumScenario(state, alice, eve)


def depolarized_bell(strength: float) -> DensityOperator:
    return apply_noise(bell_state(2), NoiseSpec.depolarizing(strength))


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture
def ideal_ensemble():
    return generate_ensemble(bell_state(2), ideal_alice_povms(), (2, 2))


@pytest.fixture
def depolarized_ensemble():
    return generate_ensemble(depolarized_bell(0.1), ideal_alice_povms(), (2, 2))


# ═══════════════════════════════════════════════════════════════════
# Acceptance summary
# ═══════════════════════════════════════════════════════════════════

_CRITERIA = {}


@pytest.fixture
def record_criterion():
    """Record ``(number, passed, detail)``; printed as one line per criterion."""
    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
