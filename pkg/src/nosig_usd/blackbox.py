"""Two-knob black box: joint outcome tables for Alice and Eve.

A ``JointTable`` holds ``P_i(j, k)`` for knob ``i`` in {0, 1}, Alice outcome
``j`` in {0, 1} and Eve outcome ``k`` in ``range(K)``, stored as an array of
shape ``(2, 2, K)``. Tables come either from the Born rule applied to a
``QuantumScenario`` or from relative frequencies of sampled outcomes.

Sampling uses ``numpy.random.default_rng`` (PCG64), so a seed fully fixes
the output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .qcore import (ABSENT_PROB, ATOL, DensityOperator, InvalidArgumentError, Povm,
                    born_probability)

DEFAULT_MAX_EVE_OUTCOMES = 16


@dataclass(frozen=True)
class JointTable:
    """Probabilities ``P_i(j, k)`` indexed ``probs[i, j, k]``.

    Entries within 1e-12 below zero are clamped. Pass ``validate=False`` to
    hold deliberately inconsistent tables (e.g. in diagnostics).
    """

    probs: np.ndarray
    validate: bool = True

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 3 or p.shape[:2] != (2, 2) or p.shape[2] < 1:
            raise InvalidArgumentError(f"joint table must have shape (2, 2, K), got {p.shape}")
        if self.validate:
            if p.min() < -1e-12:
                raise InvalidArgumentError(f"negative table entry {p.min():.3e}")
            p = np.clip(p, 0.0, None)
            totals = p.sum(axis=(1, 2))
            if np.max(np.abs(totals - 1.0)) > ATOL:
                raise InvalidArgumentError(f"table does not normalise per knob: {totals}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def eve_outcomes(self) -> int:
        return self.probs.shape[2]


@dataclass(frozen=True)
class QuantumScenario:
    """Joint state on A1 ⊗ A2, Alice's two binary POVMs on A1, Eve's POVM on A2."""

    joint_state: DensityOperator
    alice_povms: Tuple[Povm, Povm]
    eve_povm: Povm

    def __post_init__(self):
        if len(self.alice_povms) != 2:
            raise InvalidArgumentError("exactly two Alice measurements are required")
        d1 = self.alice_povms[0].dim
        for i, m in enumerate(self.alice_povms):
            if m.outcome_count != 2:
                raise InvalidArgumentError(f"Alice measurement {i} must have 2 outcomes")
            if m.dim != d1:
                raise InvalidArgumentError("Alice measurements act on different dimensions")
        if d1 * self.eve_povm.dim != self.joint_state.dim:
            raise InvalidArgumentError(
                f"joint state dimension {self.joint_state.dim} != {d1} x {self.eve_povm.dim}")

    @property
    def dims(self) -> Tuple[int, int]:
        return self.alice_povms[0].dim, self.eve_povm.dim


def from_quantum_scenario(s: QuantumScenario,
                          max_eve_outcomes: int = DEFAULT_MAX_EVE_OUTCOMES) -> JointTable:
    """Born-rule table ``P_i(j,k) = Tr[(A_i^j ⊗ E_k) rho]``."""
    if s.eve_povm.outcome_count > max_eve_outcomes:
        raise InvalidArgumentError(
            f"Eve POVM has {s.eve_povm.outcome_count} outcomes, limit is {max_eve_outcomes}")
    k_count = s.eve_povm.outcome_count
    probs = np.empty((2, 2, k_count))
    for i, povm in enumerate(s.alice_povms):
        for j, a in enumerate(povm.elements):
            for k, e in enumerate(s.eve_povm.elements):
                probs[i, j, k] = born_probability(s.joint_state, np.kron(a, e))
    return JointTable(probs)


def marginal_alice(t: JointTable, i: int) -> Tuple[float, float]:
    """``(P_i(0, △), P_i(1, △))``."""
    row = t.probs[i].sum(axis=1)
    return float(row[0]), float(row[1])


def marginal_eve(t: JointTable, i: int) -> np.ndarray:
    """``P_i(△, k)`` over k."""
    return t.probs[i].sum(axis=0)


def conditional_eve_given_alice(t: JointTable, i: int, j: int) -> Optional[np.ndarray]:
    """``P_i(k | j)`` over k, or ``None`` when Alice's outcome ``j`` never occurs."""
    row = t.probs[i, j]
    total = row.sum()
    if total <= ABSENT_PROB:
        return None
    return row / total


def nosignaling_residual(t: JointTable) -> float:
    """max_k |P_0(△,k) - P_1(△,k)|."""
    return float(np.max(np.abs(marginal_eve(t, 0) - marginal_eve(t, 1))))


def verify_total_probability(t: JointTable, i: int) -> float:
    """Residual of P_i(△,k) = sum_j P_i(k|j) P_i(j,△).

    Eve's marginal is read off the raw column sums while Alice's marginal is
    the normalised row weight, the quantity a frequency estimate reports. For
    a normalised table the two sides agree to rounding; a table whose entries
    do not sum to one shows up as a nonzero residual.
    """
    raw = t.probs[i]
    total = raw.sum()
    if total <= 0:
        raise InvalidArgumentError(f"knob {i} has no probability mass")
    rhs = np.zeros(t.eve_outcomes)
    for j in (0, 1):
        cond = conditional_eve_given_alice(t, i, j)
        if cond is None:
            continue
        rhs += cond * (raw[j].sum() / total)
    return float(np.max(np.abs(marginal_eve(t, i) - rhs)))


def sample(t: JointTable, knob_sequence: Sequence[int], seed: int) -> np.ndarray:
    """Draw ``(j, k)`` for each knob setting; returns an int array of shape (N, 2)."""
    knobs = np.asarray(knob_sequence, dtype=int)
    if knobs.size and not np.isin(knobs, (0, 1)).all():
        raise InvalidArgumentError("knob settings must be 0 or 1")
    rng = np.random.default_rng(seed)
    k_count = t.eve_outcomes
    flat = np.empty(knobs.size, dtype=int)
    for i in (0, 1):
        mask = knobs == i
        n = int(mask.sum())
        if n:
            p = t.probs[i].ravel()
            flat[mask] = rng.choice(p.size, size=n, p=p / p.sum())
    return np.stack([flat // k_count, flat % k_count], axis=1)


def estimate_table(samples, eve_outcomes: int) -> JointTable:
    """Relative-frequency table from ``(i, j, k)`` triples, normalised per knob."""
    arr = np.asarray(samples, dtype=int).reshape(-1, 3)
    if eve_outcomes < 1:
        raise InvalidArgumentError("eve_outcomes must be positive")
    if arr.size and (arr[:, :2].max() > 1 or arr.min() < 0 or arr[:, 2].max() >= eve_outcomes):
        raise InvalidArgumentError("sample index out of range")
    counts = np.zeros((2, 2, eve_outcomes))
    np.add.at(counts, (arr[:, 0], arr[:, 1], arr[:, 2]), 1.0)
    per_knob = counts.sum(axis=(1, 2))
    for i in (0, 1):
        if per_knob[i] == 0:
            raise InvalidArgumentError(f"no samples recorded for knob {i}")
    return JointTable(counts / per_knob[:, None, None])
