"""Tests for the two-state reference optimum and the POVM attack search."""

import numpy as np
import pytest

from nosig_usd.qcore import KET_0, KET_PLUS, DensityOperator, InvalidArgumentError
from nosig_usd.stategen import GeneratedEnsemble
from nosig_usd.usdcheck import optimize_usd_attack, pairwise_usd_oracle
from nosig_usd.usdcheck.attack import THREADS_ENV, _compass_search, default_workers

from oracles import grid_pairwise_usd


def pure(*amps):
    return DensityOperator.from_ket(amps)


def overlap_state(s):
    return pure(s, np.sqrt(1 - s * s))


def pair_ensemble(s):
    return GeneratedEnsemble.from_priors({(0, 0): pure(1, 0), (1, 0): overlap_state(s)},
                                         {(0, 0): 0.5, (1, 0): 0.5})


# ═══════════════════════════════════════════════════════════════════
# Reference optimum
# ═══════════════════════════════════════════════════════════════════


class TestPairwiseOracle:

    @pytest.mark.parametrize("q", [0.5, 0.2, 0.9])
    def test_orthogonal(self, q):
        assert pairwise_usd_oracle(pure(1, 0), pure(0, 1), (q, 1 - q)) == pytest.approx(1.0)

    def test_identical(self):
        assert pairwise_usd_oracle(pure(1, 0), pure(1, 0)) == 0.0

    def test_zero_and_plus_against_grid(self):
        value = pairwise_usd_oracle(pure(*KET_0), pure(*KET_PLUS))
        assert abs(value - grid_pairwise_usd(1 / np.sqrt(2))) <= 1e-3
        assert value == pytest.approx(1 - 1 / np.sqrt(2), abs=1e-12)

    @pytest.mark.parametrize("s", [0.0, 0.5, 1 / np.sqrt(2), 0.9])
    def test_equal_priors_against_grid(self, s):
        value = pairwise_usd_oracle(pure(1, 0), overlap_state(s))
        grid = grid_pairwise_usd(s)
        assert grid - 1e-12 <= value <= grid + 1e-3

    @pytest.mark.parametrize("q, s", [(0.8, 0.5), (0.9, 0.7), (0.3, 0.2)])
    def test_unequal_priors_against_grid(self, q, s):
        value = pairwise_usd_oracle(pure(1, 0), overlap_state(s), (q, 1 - q))
        assert abs(value - grid_pairwise_usd(s, q)) <= 1e-3

    def test_mixed_input_rejected(self):
        with pytest.raises(InvalidArgumentError):
            pairwise_usd_oracle(DensityOperator.maximally_mixed(2), pure(1, 0))

    def test_bad_priors(self):
        with pytest.raises(InvalidArgumentError):
            pairwise_usd_oracle(pure(1, 0), pure(0, 1), (0.7, 0.7))


# ═══════════════════════════════════════════════════════════════════
# Local search
# ═══════════════════════════════════════════════════════════════════


class TestCompassSearch:

    def test_maximises_concave_quadratic(self):
        rng = np.random.default_rng(0)
        target = np.array([0.3, -1.2, 2.0])
        best, x, used = _compass_search(lambda v: (-float(np.sum((v - target) ** 2)),),
                                        np.zeros(3), 2000, rng)
        np.testing.assert_allclose(x, target, atol=1e-6)
        assert used <= 2000

    def test_respects_budget(self):
        calls = []

        def score(v):
            calls.append(1)
            return (float(v.sum()),)

        _compass_search(score, np.zeros(4), 37, np.random.default_rng(1))
        assert len(calls) == 37


class TestAttack:

    def test_ideal_finds_nothing(self, ideal_ensemble):
        res = optimize_usd_attack(ideal_ensemble, 4, budget=1000, seed=3, workers=1)
        assert res.best_unambiguous_success == 0.0
        assert res.witnesses == []
        assert res.best_max_posterior <= 0.5 + 1e-6

    def test_depolarized_finds_nothing(self, depolarized_ensemble):
        res = optimize_usd_attack(depolarized_ensemble, 3, budget=1000, seed=4, workers=1)
        assert res.best_unambiguous_success == 0.0
        assert res.best_max_posterior <= 0.5 + 1e-6

    def test_zero_plus_pair_matches_oracle(self):
        e = pair_ensemble(1 / np.sqrt(2))
        res = optimize_usd_attack(e, 3, budget=10_000, seed=0, workers=1)
        target = pairwise_usd_oracle(pure(*KET_0), pure(*KET_PLUS))
        assert abs(res.best_unambiguous_success - target) <= 1e-3
        assert len(res.best_povm) == 3

    def test_returned_povm_is_valid(self):
        res = optimize_usd_attack(pair_ensemble(0.5), 3, budget=500, seed=1, workers=1)
        total = sum(res.best_povm.elements)
        np.testing.assert_allclose(total, np.eye(2), atol=1e-10)

    def test_evaluation_count(self, ideal_ensemble):
        res = optimize_usd_attack(ideal_ensemble, 2, budget=300, seed=0, restarts=3, workers=1)
        assert res.evaluations <= 2 * 300

    def test_deterministic_across_workers(self):
        e = pair_ensemble(0.9)
        a = optimize_usd_attack(e, 3, budget=400, seed=7, workers=1)
        b = optimize_usd_attack(e, 3, budget=400, seed=7, workers=4)
        assert a.best_unambiguous_success == b.best_unambiguous_success
        assert a.best_max_posterior == b.best_max_posterior
        for x, y in zip(a.best_povm.elements, b.best_povm.elements):
            np.testing.assert_array_equal(x, y)

    def test_seed_changes_search(self):
        e = pair_ensemble(0.5)
        a = optimize_usd_attack(e, 3, budget=200, seed=1, workers=1)
        b = optimize_usd_attack(e, 3, budget=200, seed=2, workers=1)
        assert not np.array_equal(a.best_povm[0], b.best_povm[0])

    def test_bad_arguments(self, ideal_ensemble):
        with pytest.raises(InvalidArgumentError):
            optimize_usd_attack(ideal_ensemble, 1)
        with pytest.raises(InvalidArgumentError):
            optimize_usd_attack(ideal_ensemble, 2, budget=0)

    def test_threads_env(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert default_workers() == 3
        monkeypatch.setenv(THREADS_ENV, "zero")
        assert default_workers() >= 1
