"""Four-state ensemble prepared by measuring half of an entangled pair.

Alice picks basis ``l`` and measures ``M_l`` on A1; outcome ``m`` labels the
state left on A2 as ``(l, m)``:

    (0, 0) -> "0"   (0, 1) -> "1"   (1, 0) -> "+"   (1, 1) -> "-"

``p_l`` is the probability of outcome 0 under ``M_l``. With basis weights
``w_l`` (uniform by default) the label priors are ``w_l p_l`` and
``w_l (1 - p_l)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .qcore import ABSENT_PROB, DensityOperator, InvalidArgumentError, Povm, conditional_state

Label = Tuple[int, int]
LABELS: Tuple[Label, ...] = ((0, 0), (0, 1), (1, 0), (1, 1))
LABEL_NAMES: Dict[Label, str] = {(0, 0): "0", (0, 1): "1", (1, 0): "+", (1, 1): "-"}


@dataclass(frozen=True)
class GeneratedEnsemble:
    states: Mapping[Label, Optional[DensityOperator]]
    basis_probs: Tuple[float, float]
    basis_weights: Tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        states = {lab: self.states.get(lab) for lab in LABELS}
        present = [s for s in states.values() if s is not None]
        if not present:
            raise InvalidArgumentError("ensemble has no present state")
        if len({s.dim for s in present}) != 1:
            raise InvalidArgumentError("ensemble states have different dimensions")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "basis_probs", tuple(float(p) for p in self.basis_probs))
        object.__setattr__(self, "basis_weights", tuple(float(w) for w in self.basis_weights))
        if abs(sum(self.basis_weights) - 1.0) > 1e-12:
            raise InvalidArgumentError("basis weights must sum to 1")
        for lab, q in self.priors.items():
            if (q < ABSENT_PROB) != (states[lab] is None):
                raise InvalidArgumentError(
                    f"label {lab}: prior {q:.3e} inconsistent with state presence")

    @classmethod
    def from_priors(cls, states: Mapping[Label, Optional[DensityOperator]],
                    priors: Mapping[Label, float]) -> "GeneratedEnsemble":
        """Hand-built ensemble from explicit label priors.

        Basis weights and ``p_l`` are derived from the priors; a basis with
        zero weight gets ``p_l = 1/2``.
        """
        q = np.array([priors.get(lab, 0.0) for lab in LABELS], dtype=float)
        if q.min() < 0 or abs(q.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("priors must be nonnegative and sum to 1")
        weights = (q[0] + q[1], q[2] + q[3])
        probs = tuple(q[2 * l] / weights[l] if weights[l] > 0 else 0.5 for l in (0, 1))
        kept = {lab: (states.get(lab) if q[n] >= ABSENT_PROB else None)
                for n, lab in enumerate(LABELS)}
        return cls(kept, probs, weights)

    @property
    def dim(self) -> int:
        return next(s.dim for s in self.states.values() if s is not None)

    @staticmethod
    def _priors(basis_probs, basis_weights) -> Dict[Label, float]:
        out = {}
        for l in (0, 1):
            w, p = basis_weights[l], basis_probs[l]
            out[(l, 0)] = w * p
            out[(l, 1)] = w * (1 - p)
        return out

    @property
    def priors(self) -> Dict[Label, float]:
        return self._priors(self.basis_probs, self.basis_weights)

    def present_labels(self):
        return [lab for lab in LABELS if self.states[lab] is not None]


def generate_ensemble(joint_state: DensityOperator, alice_povms: Tuple[Povm, Povm],
                      dims: Tuple[int, int],
                      basis_weights: Tuple[float, float] = (0.5, 0.5)) -> GeneratedEnsemble:
    d1, d2 = dims
    if d1 * d2 != joint_state.dim:
        raise InvalidArgumentError(f"dims {dims} do not match joint dimension {joint_state.dim}")
    if len(alice_povms) != 2:
        raise InvalidArgumentError("exactly two Alice measurements are required")
    states = {}
    probs = []
    for l, povm in enumerate(alice_povms):
        if povm.outcome_count != 2:
            raise InvalidArgumentError(f"Alice measurement {l} must be binary")
        if povm.dim != d1:
            raise InvalidArgumentError(f"Alice measurement {l} acts on dim {povm.dim}, expected {d1}")
        p0, rho0 = conditional_state(joint_state, povm[0], dims)
        p1, rho1 = conditional_state(joint_state, povm[1], dims)
        states[(l, 0)], states[(l, 1)] = rho0, rho1
        # p0 + p1 == 1 up to rounding; pin the degenerate branches exactly.
        probs.append(1.0 if rho1 is None else p0)
    priors = GeneratedEnsemble._priors(tuple(probs), basis_weights)
    for lab, q in priors.items():
        if q < ABSENT_PROB:
            states[lab] = None
    return GeneratedEnsemble(states, tuple(probs), basis_weights)


def average_state(e: GeneratedEnsemble, basis: int) -> np.ndarray:
    """p_l rho_(l,0) + (1 - p_l) rho_(l,1), skipping absent states."""
    p = e.basis_probs[basis]
    pair = ((p, e.states[(basis, 0)]), (1 - p, e.states[(basis, 1)]))
    if all(s is None for _, s in pair):
        raise InvalidArgumentError(f"basis {basis} has no present state")
    return sum(w * s.matrix for w, s in pair if s is not None)


def steering_consistency(e: GeneratedEnsemble) -> float:
    """Max-norm distance between the two basis-averaged states."""
    return float(np.max(np.abs(average_state(e, 0) - average_state(e, 1))))
