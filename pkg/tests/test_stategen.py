"""Tests for the steered four-state ensemble."""

import numpy as np
import pytest

from nosig_usd.blackbox import QuantumScenario, from_quantum_scenario, marginal_alice
from nosig_usd.qcore import (KET_0, KET_1, KET_MINUS, KET_PLUS, DensityOperator, InvalidArgumentError,
                             NoiseSpec, Povm, apply_noise, bell_state, computational_povm,
                             hadamard_povm, ideal_alice_povms, misaligned_alice_povms, projector)
from nosig_usd.stategen import (LABEL_NAMES, LABELS, GeneratedEnsemble, average_state,
                                generate_ensemble, steering_consistency)

from conftest import depolarized_bell, random_scenario

KETS = {(0, 0): KET_0, (0, 1): KET_1, (1, 0): KET_PLUS, (1, 1): KET_MINUS}


class TestGenerateEnsemble:

    def test_ideal_states_and_priors(self, ideal_ensemble):
        assert ideal_ensemble.basis_probs == pytest.approx((0.5, 0.5), abs=1e-15)
        for lab in LABELS:
            assert ideal_ensemble.priors[lab] == pytest.approx(0.25, abs=1e-15)
            assert ideal_ensemble.states[lab].fidelity_to_pure(KETS[lab]) == pytest.approx(1, abs=1e-12)

    @pytest.mark.parametrize("lam", [0.1, 0.3])
    def test_depolarized_states(self, lam):
        e = generate_ensemble(depolarized_bell(lam), ideal_alice_povms(), (2, 2))
        for lab in LABELS:
            expected = (1 - lam) * projector(KETS[lab]) + lam * np.eye(2) / 2
            np.testing.assert_allclose(e.states[lab].matrix, expected, atol=1e-14)
        assert e.basis_probs == pytest.approx((0.5, 0.5), abs=1e-14)

    def test_label_names(self):
        assert [LABEL_NAMES[lab] for lab in LABELS] == ["0", "1", "+", "-"]

    def test_extreme_case_marks_absent(self):
        never = Povm((np.zeros((2, 2)), np.eye(2)))
        e = generate_ensemble(bell_state(2), (never, hadamard_povm()), (2, 2))
        assert e.basis_probs[0] == 0.0
        assert e.states[(0, 0)] is None
        assert e.present_labels() == [(0, 1), (1, 0), (1, 1)]

    def test_priors_match_table(self, rng):
        s = random_scenario(rng)
        e = generate_ensemble(s.joint_state, s.alice_povms, s.dims)
        t = from_quantum_scenario(s)
        assert sum(e.priors.values()) == pytest.approx(1.0, abs=1e-12)
        for (l, m), q in e.priors.items():
            assert q == pytest.approx(0.5 * marginal_alice(t, l)[m], abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            generate_ensemble(bell_state(2), ideal_alice_povms(), (2, 3))

    def test_needs_binary_povms(self):
        three = Povm((np.diag([1.0, 0]), np.diag([0, 0.5]), np.diag([0, 0.5])))
        with pytest.raises(InvalidArgumentError):
            generate_ensemble(bell_state(2), (three, hadamard_povm()), (2, 2))

    def test_misaligned_povms_keep_half(self):
        e = generate_ensemble(bell_state(2), misaligned_alice_povms(0.3, -0.2), (2, 2))
        assert e.basis_probs == pytest.approx((0.5, 0.5), abs=1e-14)


class TestGeneratedEnsemble:

    def test_inconsistent_presence_rejected(self):
        rho = DensityOperator.from_ket(KET_0)
        with pytest.raises(InvalidArgumentError):
            GeneratedEnsemble({lab: rho for lab in LABELS}, (1.0, 0.5))

    def test_from_priors_derives_p(self):
        rho = DensityOperator.from_ket(KET_0)
        e = GeneratedEnsemble.from_priors({(0, 0): rho, (1, 0): rho, (1, 1): rho},
                                          {(0, 0): 0.5, (1, 0): 0.3, (1, 1): 0.2})
        assert e.basis_probs == pytest.approx((1.0, 0.6))

    def test_from_priors_empty_basis(self):
        rho = DensityOperator.from_ket(KET_0)
        e = GeneratedEnsemble.from_priors({(0, 0): rho, (0, 1): rho}, {(0, 0): 0.5, (0, 1): 0.5})
        assert e.basis_probs == (0.5, 0.5)
        assert e.basis_weights == (1.0, 0.0)


class TestAverageState:

    @pytest.mark.parametrize("basis", [0, 1])
    def test_ideal(self, ideal_ensemble, basis):
        np.testing.assert_allclose(average_state(ideal_ensemble, basis), np.eye(2) / 2, atol=1e-15)

    def test_both_absent(self):
        rho = DensityOperator.from_ket(KET_0)
        e = GeneratedEnsemble.from_priors({(0, 0): rho}, {(0, 0): 1.0})
        with pytest.raises(InvalidArgumentError):
            average_state(e, 1)


class TestSteeringConsistency:

    def test_ideal(self, ideal_ensemble):
        assert steering_consistency(ideal_ensemble) <= 1e-12

    @pytest.mark.parametrize("spec", [
        NoiseSpec.depolarizing(0.25),
        NoiseSpec.dephasing(0.4),
        NoiseSpec.misalignment(0.3, side=0),
        NoiseSpec.misalignment(-1.1, side=1),
    ])
    def test_noisy(self, spec):
        e = generate_ensemble(apply_noise(bell_state(2), spec), ideal_alice_povms(), (2, 2))
        assert steering_consistency(e) <= 1e-10

    def test_inconsistent_ensemble(self):
        r0, r1 = DensityOperator.from_ket(KET_0), DensityOperator.from_ket(KET_1)
        e = GeneratedEnsemble({(0, 0): r0, (0, 1): r1, (1, 0): r0, (1, 1): r0}, (0.5, 0.5))
        assert steering_consistency(e) == pytest.approx(0.5)

    def test_random_scenario(self, rng):
        s = random_scenario(rng, outcomes=2)
        e = generate_ensemble(s.joint_state, s.alice_povms, s.dims)
        assert steering_consistency(e) <= 1e-10
