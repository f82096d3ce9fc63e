"""Tests for the conditional-probability checks, guessing bound and witness scans."""

import numpy as np
import pytest

from nosig_usd.qcore import (KET_0, KET_1, KET_MINUS, KET_PLUS, DensityOperator, InvalidArgumentError,
                             NoiseSpec, Povm, apply_noise, bell_state, computational_povm,
                             hadamard_povm, ideal_alice_povms, projector, random_povm,
                             schmidt_state)
from nosig_usd.stategen import LABELS, GeneratedEnsemble, generate_ensemble
from nosig_usd.usdcheck import (ConditionalProfile, analyze, bayes_posteriors, chefles_infeasible,
                                conditional_profile, eq10_residual, guessing_bound,
                                guessing_bound_solution, linear_independence_rank, max_posterior,
                                near_witness_scan, ratio_bounds, unambiguous_success,
                                unidentifiable_labels, uniform_present_priors, usd_witness_scan,
                                verify_eq5, witness_projectors)

from conftest import depolarized_bell
from oracles import grid_guessing_bound, vertex_guessing_bound

UNIFORM = {lab: 0.25 for lab in LABELS}


def priors_of(*values):
    return dict(zip(LABELS, values))


def orthogonal_pair():
    return GeneratedEnsemble.from_priors(
        {(0, 0): DensityOperator.from_ket(KET_0), (0, 1): DensityOperator.from_ket(KET_1)},
        {(0, 0): 0.5, (0, 1): 0.5})


def p06_ensemble(lam=0.2):
    """Partially entangled source: p = (0.6, 0.5) after depolarizing noise."""
    # Depolarizing pulls p_0 towards 1/2, so start further out.
    alpha = np.arccos(np.sqrt((0.6 - lam / 2) / (1 - lam)))
    joint = apply_noise(schmidt_state(alpha), NoiseSpec.depolarizing(lam))
    return generate_ensemble(joint, ideal_alice_povms(), (2, 2))


# ═══════════════════════════════════════════════════════════════════
# Conditional profile and the balance constraint
# ═══════════════════════════════════════════════════════════════════


class TestConditionalProfile:

    def test_ideal_computational(self, ideal_ensemble):
        prof = conditional_profile(ideal_ensemble, computational_povm())
        np.testing.assert_allclose(prof.values, [[1, 0, 0.5, 0.5], [0, 1, 0.5, 0.5]], atol=1e-15)

    def test_dimension_mismatch(self, ideal_ensemble):
        with pytest.raises(InvalidArgumentError):
            conditional_profile(ideal_ensemble, Povm((np.eye(3),)))

    def test_absent_columns_are_nan(self):
        prof = conditional_profile(orthogonal_pair(), computational_povm())
        assert np.isnan(prof.values[:, 2:]).all()
        np.testing.assert_array_equal(prof.filled()[:, 2:], 0.0)

    def test_out_of_range_rejected(self):
        with pytest.raises(Exception):
            ConditionalProfile.from_rows([[1.5, 0, 0, 0]])


class TestBalanceConstraint:

    def test_violating_profile(self):
        assert verify_eq5((0.5, 0.5), ConditionalProfile.from_rows([[1, 0, 0, 0]])) == pytest.approx(0.5)

    @pytest.mark.parametrize("lam", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    def test_noise_sweep(self, lam, rng):
        e = generate_ensemble(depolarized_bell(lam), ideal_alice_povms(), (2, 2))
        for k in (2, 5, 8):
            assert verify_eq5(e.basis_probs, conditional_profile(e, random_povm(rng, 2, k))) <= 1e-10

    def test_extreme_case(self, rng):
        never = Povm((np.zeros((2, 2)), np.eye(2)))
        e = generate_ensemble(bell_state(2), (never, hadamard_povm()), (2, 2))
        assert verify_eq5(e.basis_probs, conditional_profile(e, random_povm(rng, 2, 4))) <= 1e-10


class TestRatioBounds:

    def test_half_slacks_vanish(self, ideal_ensemble, rng):
        prof = conditional_profile(ideal_ensemble, random_povm(rng, 2, 4))
        s8, s9 = ratio_bounds((0.5, 0.5), prof)
        np.testing.assert_allclose(s8, 0, atol=1e-12)
        np.testing.assert_allclose(s9, 0, atol=1e-12)
        assert eq10_residual(prof) <= 1e-12

    def test_p0_zero_is_trivial(self):
        prof = ConditionalProfile.from_rows([[np.nan, 0.3, 0.2, 0.4]], [False, True, True, True])
        s8, _ = ratio_bounds((0.0, 0.5), prof)
        # Ratio is 0 so slack8 is the (1, .) sum itself.
        assert s8[0] == pytest.approx(0.6)

    def test_p06_random_povms(self, rng):
        e = p06_ensemble()
        assert e.basis_probs == pytest.approx((0.6, 0.5), abs=1e-12)
        for _ in range(50):
            s8, s9 = ratio_bounds(e.basis_probs, conditional_profile(e, random_povm(rng, 2, 4)))
            assert s8.min() >= -1e-10 and s9.min() >= -1e-10


# ═══════════════════════════════════════════════════════════════════
# Posteriors and the guessing bound
# ═══════════════════════════════════════════════════════════════════


class TestPosteriors:

    def test_ideal_computational(self, ideal_ensemble):
        post = bayes_posteriors(conditional_profile(ideal_ensemble, computational_povm()),
                                ideal_ensemble.priors)
        assert post.max() == pytest.approx(0.5)

    def test_orthogonal_pair(self):
        e = orthogonal_pair()
        assert max_posterior(conditional_profile(e, computational_povm()), e.priors) == pytest.approx(1)


class TestGuessingBound:

    def test_half_uniform(self):
        assert guessing_bound((0.5, 0.5), UNIFORM) == pytest.approx(0.5, abs=1e-9)

    def test_p1_generation_priors(self):
        # Vertex enumeration gives 1/2; the "1" label has no prior.
        sol = guessing_bound_solution((1.0, 0.5), priors_of(0.5, 0.0, 0.25, 0.25))
        assert sol.value == pytest.approx(0.5, abs=1e-9)
        assert sol.label != (0, 1)

    def test_p1_uniform_present(self):
        assert guessing_bound((1.0, 0.5), priors_of(1 / 3, 0, 1 / 3, 1 / 3)) == pytest.approx(2 / 3)

    def test_p06_given_priors(self):
        value = guessing_bound((0.6, 0.5), priors_of(0.3, 0.2, 0.25, 0.25))
        assert value == pytest.approx(vertex_guessing_bound((0.6, 0.5), (0.3, 0.2, 0.25, 0.25)))
        assert value == pytest.approx(0.5, abs=1e-9)

    def test_p06_uniform(self):
        assert guessing_bound((0.6, 0.5), UNIFORM) == pytest.approx(5 / 9)

    def test_p06_matches_grid(self):
        q = (0.3, 0.2, 0.25, 0.25)
        assert abs(guessing_bound((0.6, 0.5), priors_of(*q)) - grid_guessing_bound((0.6, 0.5), q)) <= 0.01

    @pytest.mark.parametrize("eps", [1e-6, 1e-9, 1e-11])
    def test_absent_labels_as_slack_near_zero_p(self, eps):
        # The absent "+" column must stay usable even with a tiny coefficient.
        q = (0.0, 0.5, 0.0, 0.5)
        assert guessing_bound((0.0, eps), priors_of(*q)) == pytest.approx(1.0, abs=1e-9)
        assert vertex_guessing_bound((0.0, eps), q) == pytest.approx(1.0)

    def test_coefficients_below_absent_threshold_are_zero(self):
        q = priors_of(0.0, 0.5, 0.0, 0.5)
        assert guessing_bound((0.0, 1e-14), q) == pytest.approx(guessing_bound((0.0, 0.0), q))

    def test_opposite_absent_labels_drop_constraint(self):
        assert guessing_bound((0.3, 0.4), priors_of(0.0, 0.5, 0.0, 0.5)) == pytest.approx(1.0)

    def test_all_zero_priors(self):
        with pytest.raises(InvalidArgumentError):
            guessing_bound((0.5, 0.5), priors_of(0, 0, 0, 0))

    def test_uniform_present_priors(self):
        e = orthogonal_pair()
        assert uniform_present_priors(e) == priors_of(0.5, 0.5, 0.0, 0.0)


# ═══════════════════════════════════════════════════════════════════
# Witness scans
# ═══════════════════════════════════════════════════════════════════


class TestWitnessScan:

    def test_ideal_random_povms(self, ideal_ensemble, rng):
        for k in range(2, 9):
            prof = conditional_profile(ideal_ensemble, random_povm(rng, 2, k))
            assert usd_witness_scan(prof, ideal_ensemble.priors, 1e-6) == []

    def test_ideal_standard_povms(self, ideal_ensemble):
        for povm in (computational_povm(), hadamard_povm()):
            prof = conditional_profile(ideal_ensemble, povm)
            assert usd_witness_scan(prof, ideal_ensemble.priors, 1e-6) == []

    def test_orthogonal_pair(self):
        e = orthogonal_pair()
        prof = conditional_profile(e, computational_povm())
        assert usd_witness_scan(prof, e.priors, 1e-6) == [(0, (0, 0)), (1, (0, 1))]
        assert unambiguous_success(prof, e.priors, 1e-6) == pytest.approx(1.0)

    def test_absent_label_never_qualifies(self):
        prof = ConditionalProfile.from_rows([[np.nan, 0.0, 0.0, 0.0], [np.nan, 1, 1, 1]],
                                            [False, True, True, True])
        assert usd_witness_scan(prof, priors_of(0, 1 / 3, 1 / 3, 1 / 3), 1e-6) == []

    def test_depolarized_absent_label(self, rng):
        # Drop the "0" state from a depolarized ensemble: the rest are full rank.
        e = generate_ensemble(depolarized_bell(0.1), ideal_alice_povms(), (2, 2))
        states = dict(e.states)
        states[(0, 0)] = None
        sub = GeneratedEnsemble.from_priors(states, priors_of(0, 1 / 3, 1 / 3, 1 / 3))
        for _ in range(20):
            prof = conditional_profile(sub, random_povm(rng, 2, 3))
            assert usd_witness_scan(prof, sub.priors, 1e-6) == []

    def test_near_witness(self):
        prof = ConditionalProfile.from_rows([[1.0, 1e-4, 0, 0], [0, 1 - 1e-4, 1, 1]])
        assert usd_witness_scan(prof, UNIFORM, 1e-6) == []
        assert near_witness_scan(prof, UNIFORM, 1e-6) == [(0, (0, 0))]


class TestLinearIndependence:

    def test_ideal_four_states(self, ideal_ensemble):
        assert linear_independence_rank(ideal_ensemble) == 2
        assert chefles_infeasible(ideal_ensemble)

    def test_orthogonal_pair(self):
        e = orthogonal_pair()
        assert linear_independence_rank(e) == 2
        assert not chefles_infeasible(e)
        assert unidentifiable_labels(e) == []

    def test_depolarized_all_unidentifiable(self, depolarized_ensemble):
        assert chefles_infeasible(depolarized_ensemble)
        assert unidentifiable_labels(depolarized_ensemble) == list(LABELS)

    def test_witness_projector_of_pair(self):
        proj = witness_projectors(orthogonal_pair())
        np.testing.assert_allclose(proj[(0, 0)], projector(KET_0), atol=1e-12)

    def test_nonorthogonal_pair_projectors(self):
        e = GeneratedEnsemble.from_priors(
            {(0, 0): DensityOperator.from_ket(KET_0), (1, 0): DensityOperator.from_ket(KET_PLUS)},
            {(0, 0): 0.5, (1, 0): 0.5})
        assert not chefles_infeasible(e)
        proj = witness_projectors(e)
        np.testing.assert_allclose(proj[(0, 0)], projector(KET_MINUS), atol=1e-12)


class TestAnalyze:

    def test_ideal_report(self, ideal_ensemble):
        rep = analyze(ideal_ensemble, hadamard_povm())
        assert rep.eq5_residual <= 1e-10
        assert rep.eq10_residual is not None and rep.eq10_residual <= 1e-10
        assert rep.guessing_bound == pytest.approx(0.5)
        assert rep.usd_witnesses == [] and rep.rank == 2

    def test_half_equality_skipped_off_half(self, rng):
        rep = analyze(p06_ensemble(), random_povm(rng, 2, 3))
        assert rep.eq10_residual is None
        assert rep.guessing_bound_uniform == pytest.approx(5 / 9)
