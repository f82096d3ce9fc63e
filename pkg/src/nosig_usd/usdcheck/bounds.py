"""Constraint checks and bounds on Eve's outcome statistics.

Everything here works on the conditional table ``c[k, L] = P[k | L]`` for
the four labels ``L = (l, m)`` in the order (0,0), (0,1), (1,0), (1,1).
Absent labels carry NaN in ``values`` and are masked out by ``present``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from ..qcore import ABSENT_PROB, CLAMP_WINDOW, InvalidArgumentError, NumericalIntegrityError, Povm
from ..stategen import LABELS, GeneratedEnsemble, Label

DEFAULT_ZERO_TOL = 1e-6
NEAR_WITNESS_TOL = 1e-3
RANK_REL_TOL = 1e-8


@dataclass(frozen=True)
class ConditionalProfile:
    values: np.ndarray
    present: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        mask = np.array(self.present, dtype=bool)
        if v.ndim != 2 or v.shape[1] != 4 or mask.shape != (4,):
            raise InvalidArgumentError(f"profile must have shape (K, 4), got {v.shape}")
        live = v[:, mask]
        if live.size and (live.min() < -CLAMP_WINDOW or live.max() > 1 + CLAMP_WINDOW):
            raise NumericalIntegrityError("conditional probability outside [0, 1]")
        v[:, mask] = np.clip(live, 0.0, 1.0)
        v[:, ~mask] = np.nan
        v.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "present", mask)

    @classmethod
    def from_rows(cls, rows, present: Sequence[bool] = (True,) * 4) -> "ConditionalProfile":
        return cls(np.atleast_2d(np.asarray(rows, dtype=float)), np.asarray(present))

    @property
    def eve_outcomes(self) -> int:
        return self.values.shape[0]

    def filled(self) -> np.ndarray:
        """Values with absent labels replaced by 0."""
        return np.where(self.present, self.values, 0.0)


def conditional_profile(e: GeneratedEnsemble, eve: Povm) -> ConditionalProfile:
    if eve.dim != e.dim:
        raise InvalidArgumentError(f"Eve POVM dim {eve.dim} != ensemble dim {e.dim}")
    values = np.full((eve.outcome_count, 4), np.nan)
    present = np.zeros(4, dtype=bool)
    for n, lab in enumerate(LABELS):
        rho = e.states[lab]
        if rho is None:
            continue
        present[n] = True
        values[:, n] = [np.real(np.trace(el @ rho.matrix)) for el in eve.elements]
    return ConditionalProfile(values, present)


def _eq5_sides(p: Tuple[float, float], c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    p0, p1 = p
    lhs = p0 * c[:, 0] + (1 - p0) * c[:, 1]
    rhs = p1 * c[:, 2] + (1 - p1) * c[:, 3]
    return lhs, rhs


def verify_eq5(p: Tuple[float, float], profile: ConditionalProfile) -> float:
    """max_k |p0 c00 + (1-p0) c01 - p1 c10 - (1-p1) c11|."""
    lhs, rhs = _eq5_sides(p, profile.filled())
    return float(np.max(np.abs(lhs - rhs)))


def ratio_bounds(p: Tuple[float, float],
                 profile: ConditionalProfile) -> Tuple[np.ndarray, np.ndarray]:
    """Per-outcome slacks of the two basis-sum ratio inequalities.

    slack8[k] = (c10 + c11) - min(p0, 1-p0) / max(p1, 1-p1) * (c00 + c01)
    slack9[k] = (c00 + c01) - min(p1, 1-p1) / max(p0, 1-p0) * (c10 + c11)
    """
    p0, p1 = p
    c = profile.filled()
    sum0 = c[:, 0] + c[:, 1]
    sum1 = c[:, 2] + c[:, 3]
    slack8 = sum1 - min(p0, 1 - p0) / max(p1, 1 - p1) * sum0
    slack9 = sum0 - min(p1, 1 - p1) / max(p0, 1 - p0) * sum1
    return slack8, slack9


def eq10_residual(profile: ConditionalProfile) -> float:
    """max_k |(c00 + c01) - (c10 + c11)|; meaningful when p0 = p1 = 1/2."""
    c = profile.filled()
    return float(np.max(np.abs(c[:, 0] + c[:, 1] - c[:, 2] - c[:, 3])))


def _prior_vector(priors: Mapping[Label, float]) -> np.ndarray:
    return np.array([float(priors.get(lab, 0.0)) for lab in LABELS])


def bayes_posteriors(profile: ConditionalProfile, priors: Mapping[Label, float]) -> np.ndarray:
    """Posterior P(L | k) per outcome; rows for zero-probability outcomes are 0."""
    joint = profile.filled() * _prior_vector(priors)
    totals = joint.sum(axis=1, keepdims=True)
    out = np.zeros_like(joint)
    live = totals[:, 0] > ABSENT_PROB
    out[live] = joint[live] / totals[live]
    return out


def max_posterior(profile: ConditionalProfile, priors: Mapping[Label, float]) -> float:
    return float(bayes_posteriors(profile, priors).max())


@dataclass(frozen=True)
class GuessingSolution:
    value: float
    label: Optional[Label]
    conditionals: np.ndarray = field(repr=False)


def _refine_vertex(y: np.ndarray, row: np.ndarray, sense: float, j: int) -> np.ndarray:
    """Re-solve the LP vertex exactly on its support.

    The optimum has at most two nonzero weights. HiGHS may stop at a single
    weight whose constraint residual is below its feasibility tolerance but
    far from zero when a coefficient is tiny; the exact vertex then pairs it
    with the opposite-sign weight that keeps most mass on ``j``.
    """
    residual = float(row @ y)
    if (sense * residual <= 0) if sense else residual == 0:
        return y
    support = np.flatnonzero(y > 1e-12)
    if support.size == 2:
        a, b = support
    elif support.size == 1 and (partners := np.flatnonzero(np.sign(row) == -np.sign(row[j]))).size:
        a, b = j, max(partners, key=lambda k: row[k] / (row[k] - row[j]))
    else:
        return y
    if row[a] == row[b]:
        return y
    out = np.zeros_like(y)
    out[a] = row[b] / (row[b] - row[a])
    out[b] = 1.0 - out[a]
    return out if out.min() >= 0 else y


def guessing_bound_solution(p: Tuple[float, float],
                            priors: Mapping[Label, float]) -> GuessingSolution:
    """Largest posterior any outcome row can reach under the no-signaling row constraint.

    Maximises prior_L c_L / sum prior c over c >= 0 with
    p0 c00 + (1-p0) c01 = p1 c10 + (1-p1) c11. The ratio is scale free, so
    the [0, 1] box adds nothing. In joint weights y = prior * c normalised to
    sum 1, each label is a linear program whose objective is y_L itself; this
    keeps the solver well scaled when a coefficient is tiny. Ties go to the
    earliest label.

    Absent labels carry no weight in the ratio, so their columns only act as
    nonnegative slack in the constraint and are eliminated up front.
    Constraint coefficients below ``ABSENT_PROB`` count as zero, like priors.
    """
    q = _prior_vector(priors)
    if q.min() < 0 or q.sum() <= 0:
        raise InvalidArgumentError("priors must be nonnegative and not all zero")
    p0, p1 = p
    coef = np.array([p0, 1 - p0, -p1, -(1 - p1)])
    coef[np.abs(coef) < ABSENT_PROB] = 0.0
    live = np.flatnonzero(q >= ABSENT_PROB)
    slack = {float(np.sign(a)) for a in np.delete(coef, live) if a != 0}
    row = coef[live] / q[live]
    if np.abs(row).max() > 0:
        row = row / np.abs(row).max()
    a_eq, b_eq = [np.ones(live.size)], [1.0]
    a_ub = b_ub = None
    sense = None  # None: no constraint, 0: equality, +-1: one-sided
    if not slack:
        a_eq.append(row)
        b_eq.append(0.0)
        sense = 0.0
    elif len(slack) == 1:
        # live part plus a * c_absent = 0 with c_absent >= 0: live part has the opposite sign
        sense = slack.pop()
        a_ub, b_ub = [sense * row], [0.0]
    best = GuessingSolution(0.0, None, np.zeros(4))
    for j, n in enumerate(live):
        obj = np.zeros(live.size)
        obj[j] = -1.0
        res = linprog(obj, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                      bounds=[(0, None)] * live.size, method="highs")
        if res.status != 0:
            continue
        y = res.x if sense is None else _refine_vertex(res.x, row, sense, j)
        value = float(min(max(y[j], 0.0), 1.0))
        if value > best.value + 1e-12:
            c = np.zeros(4)
            c[live] = y / q[live]
            best = GuessingSolution(value, LABELS[n], c / c.max())
    return best


def guessing_bound(p: Tuple[float, float], priors: Mapping[Label, float]) -> float:
    return guessing_bound_solution(p, priors).value


def uniform_present_priors(e: GeneratedEnsemble) -> Dict[Label, float]:
    present = e.present_labels()
    return {lab: (1.0 / len(present) if lab in present else 0.0) for lab in LABELS}


def _leakage(profile: ConditionalProfile) -> np.ndarray:
    """leak[k, L] = sum of c[k, L'] over present L' != L."""
    c = profile.filled()
    return c.sum(axis=1, keepdims=True) - c


def _scan(profile: ConditionalProfile, priors: Mapping[Label, float],
          signal_tol: float, leak_tol: float) -> List[Tuple[int, Label]]:
    q = _prior_vector(priors)
    c = profile.filled()
    found = []
    for k in range(profile.eve_outcomes):
        for n, lab in enumerate(LABELS):
            if not profile.present[n] or q[n] <= ABSENT_PROB or c[k, n] <= signal_tol:
                continue
            if all(c[k, m] <= leak_tol for m in range(4) if m != n and profile.present[m]):
                found.append((k, lab))
    return found


def usd_witness_scan(profile: ConditionalProfile, priors: Mapping[Label, float],
                     zero_tol: float = DEFAULT_ZERO_TOL) -> List[Tuple[int, Label]]:
    """Outcomes that name exactly one generated label.

    ``(k, L)`` qualifies when c[k, L] > zero_tol, every other present label
    has c[k, .] <= zero_tol, and L has positive prior.
    """
    return _scan(profile, priors, zero_tol, zero_tol)


def near_witness_scan(profile: ConditionalProfile, priors: Mapping[Label, float],
                      zero_tol: float = DEFAULT_ZERO_TOL,
                      near_tol: float = NEAR_WITNESS_TOL) -> List[Tuple[int, Label]]:
    """Outcomes with cross-leakage below ``near_tol`` that are not true witnesses."""
    strict = set(usd_witness_scan(profile, priors, zero_tol))
    return [w for w in _scan(profile, priors, zero_tol, near_tol) if w not in strict]


def unambiguous_success(profile: ConditionalProfile, priors: Mapping[Label, float],
                        zero_tol: float = DEFAULT_ZERO_TOL) -> float:
    """sum over witnessed (k, L) of prior_L c[k, L]."""
    q = _prior_vector(priors)
    c = profile.filled()
    return float(sum(q[LABELS.index(lab)] * c[k, LABELS.index(lab)]
                     for k, lab in usd_witness_scan(profile, priors, zero_tol)))


def min_leakage_ratio(profile: ConditionalProfile, priors: Mapping[Label, float]) -> float:
    """Smallest leak[k, L] / c[k, L] over labels with positive prior; 0 means an exact witness."""
    q = _prior_vector(priors)
    c = profile.filled()
    leak = _leakage(profile)
    mask = (q > ABSENT_PROB) & profile.present
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(c > 0, leak / c, np.inf)
    ratio = ratio[:, mask]
    return float(ratio.min()) if ratio.size else float("inf")


# --- linear independence ----------------------------------------------------

def _stacked_supports(states) -> np.ndarray:
    cols = [s.support(RANK_REL_TOL) for s in states]
    return np.concatenate(cols, axis=1) if cols else np.zeros((0, 0))


def _rank(m: np.ndarray) -> int:
    if m.size == 0:
        return 0
    sv = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(sv > RANK_REL_TOL * sv[0])) if sv.size and sv[0] > 0 else 0


def linear_independence_rank(e: GeneratedEnsemble) -> int:
    """Dimension of the sum of the supports of the present states."""
    return _rank(_stacked_supports([e.states[lab] for lab in e.present_labels()]))


def chefles_infeasible(e: GeneratedEnsemble) -> bool:
    """True when the present states cannot all be linearly independent."""
    return linear_independence_rank(e) < len(e.present_labels())


def unidentifiable_labels(e: GeneratedEnsemble) -> List[Label]:
    """Present labels whose support lies inside the span of the other supports.

    No measurement outcome can then confirm that label with certainty.
    """
    present = e.present_labels()
    total = linear_independence_rank(e)
    out = []
    for lab in present:
        others = [e.states[o] for o in present if o != lab]
        if _rank(_stacked_supports(others)) == total:
            out.append(lab)
    return out


def witness_projectors(e: GeneratedEnsemble) -> Dict[Label, np.ndarray]:
    """Projector onto the orthogonal complement of the other present supports.

    An effect can only ever fire for label L alone if it lives inside the
    range of this projector. Zero matrix when no such room exists.
    """
    present = e.present_labels()
    d = e.dim
    out = {}
    for lab in present:
        others = [e.states[o] for o in present if o != lab]
        span = _stacked_supports(others)
        proj = np.eye(d, dtype=np.complex128)
        if span.size:
            u, sv, _ = np.linalg.svd(span, full_matrices=False)
            basis = u[:, sv > RANK_REL_TOL * sv[0]] if sv[0] > 0 else u[:, :0]
            proj = proj - basis @ basis.conj().T
        out[lab] = proj
    return out


# --- combined report --------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    eq5_residual: float
    ratio_slack8: float
    ratio_slack9: float
    eq10_residual: Optional[float]
    guessing_bound: float
    guessing_bound_uniform: float
    max_posterior: float
    usd_witnesses: List[Tuple[int, Label]]
    near_witnesses: List[Tuple[int, Label]]
    rank: int
    chefles_infeasible: bool
    unidentifiable: List[Label]


def analyze(e: GeneratedEnsemble, eve: Povm, half_tol: float = 1e-9,
            zero_tol: float = DEFAULT_ZERO_TOL) -> BoundReport:
    """Run every check on one (ensemble, Eve POVM) pair.

    ``eq10_residual`` is only filled in when both ``p_l`` are within
    ``half_tol`` of 1/2.
    """
    profile = conditional_profile(e, eve)
    p = e.basis_probs
    priors = e.priors
    slack8, slack9 = ratio_bounds(p, profile)
    at_half = all(abs(x - 0.5) <= half_tol for x in p)
    return BoundReport(
        eq5_residual=verify_eq5(p, profile),
        ratio_slack8=float(slack8.min()),
        ratio_slack9=float(slack9.min()),
        eq10_residual=eq10_residual(profile) if at_half else None,
        guessing_bound=guessing_bound(p, priors),
        guessing_bound_uniform=guessing_bound(p, uniform_present_priors(e)),
        max_posterior=max_posterior(profile, priors),
        usd_witnesses=usd_witness_scan(profile, priors, zero_tol),
        near_witnesses=near_witness_scan(profile, priors, zero_tol),
        rank=linear_independence_rank(e),
        chefles_infeasible=chefles_infeasible(e),
        unidentifiable=unidentifiable_labels(e),
    )
