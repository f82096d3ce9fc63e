"""Derivative-free search over Eve's POVMs for an unambiguous attack.

POVMs are parametrised by unconstrained complex factors ``B_k`` (shape
``factor_rows x d``, square by default) mapped to ``E_k = S^-1/2 B_k^† B_k S^-1/2`` with
``S = sum_k B_k^† B_k``, so every parameter vector is a valid measurement.

Two objectives are searched separately:

* unambiguous success. A raw POVM essentially never has exact zeros, so
  each candidate is first projected onto the witness structure: for every
  label L, ``F = short(E_k, Q_L)`` is the largest operator below ``E_k``
  with range inside the witness subspace ``Q_L`` (complement of the other
  supports); outcome k keeps the label with the most prior-weighted
  signal and ``E_k - F`` (PSD) is pooled into one inconclusive outcome.
  The projected POVM is valid and its conclusive outcomes have exactly
  zero leakage, so the score is an achievable unambiguous success
  probability. When no label has room (``Q_L = 0`` for all L) the score is
  identically 0 and the search falls back to minimising the raw leakage
  ratio, reported alongside.
* the largest Bayes posterior over outcomes and labels.

Local search is an adaptive compass search: coordinates visited in a
seeded random order, each with its own step that doubles on success and
reverses and halves on failure. The budget counts objective evaluations
per objective and is split across restarts, each with its own generator
seeded from ``(seed, restart)``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..qcore import ABSENT_PROB, InvalidArgumentError, NumericalIntegrityError, Povm, povm_from_factors
from ..stategen import LABELS, GeneratedEnsemble, Label
from .bounds import (DEFAULT_ZERO_TOL, conditional_profile, max_posterior, min_leakage_ratio,
                     unambiguous_success, usd_witness_scan, witness_projectors)

THREADS_ENV = "NOSIG_USD_THREADS"


@dataclass(frozen=True)
class AttackResult:
    best_unambiguous_success: float
    best_povm: Povm
    best_max_posterior: float
    posterior_povm: Povm
    best_leakage_ratio: float
    witnesses: List[Tuple[int, Label]]
    evaluations: int
    seed: int
    restarts: int
    zero_tol: float = DEFAULT_ZERO_TOL
    history: dict = field(default_factory=dict, repr=False, compare=False)


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


class _Problem:
    """Precomputed ensemble data shared by both objectives."""

    def __init__(self, e: GeneratedEnsemble, outcomes: int, factor_rows: int):
        self.dim = e.dim
        self.outcomes = outcomes
        self.shape = (outcomes, factor_rows, self.dim)
        self.n_params = 2 * outcomes * factor_rows * self.dim
        priors = e.priors
        present = [lab for lab in LABELS if e.states[lab] is not None
                   and priors[lab] > ABSENT_PROB]
        self.labels = present
        self.prior = np.array([priors[lab] for lab in present])
        self.rho = np.array([e.states[lab].matrix for lab in present])
        proj = witness_projectors(e)
        self.bases = []
        for lab in present:
            w, v = np.linalg.eigh(proj[lab])
            keep = w > 0.5
            self.bases.append((v[:, keep], v[:, ~keep]))
        self.room = np.array([b[0].shape[1] > 0 for b in self.bases])

    def elements(self, x: np.ndarray) -> np.ndarray:
        half = self.n_params // 2
        b = (x[:half] + 1j * x[half:]).reshape(self.shape)
        return povm_from_factors(b)

    def conditionals(self, elems: np.ndarray) -> np.ndarray:
        return np.real(np.einsum("kij,lji->kl", elems, self.rho))

    def shorted(self, elems: np.ndarray, n: int) -> np.ndarray:
        """Largest 0 <= F <= E_k with range in label n's witness subspace."""
        uq, up = self.bases[n]
        a = np.conj(uq.T) @ elems @ uq
        if up.shape[1]:
            b = np.conj(uq.T) @ elems @ up
            c = np.conj(up.T) @ elems @ up
            w, v = np.linalg.eigh(c)
            cutoff = 1e-12 * np.maximum(w.max(axis=-1, keepdims=True), 1e-300)
            inv_w = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
            c_pinv = (v * inv_w[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
            a = a - b @ c_pinv @ np.conj(np.swapaxes(b, -1, -2))
        f = uq @ a @ np.conj(uq.T)
        return 0.5 * (f + np.conj(np.swapaxes(f, -1, -2)))

    def project(self, elems: np.ndarray) -> Tuple[float, np.ndarray]:
        """Witness-projected POVM and its unambiguous success."""
        if not self.room.any():
            return 0.0, elems
        gains = np.zeros((self.outcomes, len(self.labels)))
        parts = {}
        for n in np.flatnonzero(self.room):
            parts[n] = self.shorted(elems, n)
            gains[:, n] = self.prior[n] * np.real(np.einsum("kij,ji->k", parts[n], self.rho[n]))
        best_label = np.argmax(gains, axis=1)
        value = gains[np.arange(self.outcomes), best_label]
        conclusive = value > 0
        if not conclusive.any():
            return 0.0, elems
        out = elems.copy()
        for k in np.flatnonzero(conclusive):
            out[k] = parts[best_label[k]][k]
        if np.max(np.abs((elems - out).sum(axis=0))) > 1e-14:
            if conclusive.all():
                sink = int(np.argmin(value))
                conclusive[sink] = False
                out[sink] = elems[sink]
            else:
                sink = int(np.flatnonzero(~conclusive)[0])
            out[sink] = out[sink] + (elems - out).sum(axis=0)
        return float(value[conclusive].sum()), out

    def leakage_ratio(self, elems: np.ndarray) -> float:
        c = self.conditionals(elems)
        leak = c.sum(axis=1, keepdims=True) - c
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(c > 0, leak / c, np.inf)
        return float(ratio.min()) if ratio.size else float("inf")

    def max_posterior(self, elems: np.ndarray) -> float:
        joint = self.conditionals(elems) * self.prior
        totals = joint.sum(axis=1)
        live = totals > ABSENT_PROB
        if not live.any():
            return 0.0
        return float((joint[live].max(axis=1) / totals[live]).max())


def _compass_search(score: Callable[[np.ndarray], tuple], x0: np.ndarray, budget: int,
                    rng: np.random.Generator, step: float = 0.5,
                    min_step: float = 1e-10) -> Tuple[tuple, np.ndarray, int]:
    """Maximise a lexicographically ordered score tuple.

    Each coordinate keeps its own signed step: doubled after a successful
    move, reversed and halved after a failed one.
    """
    x = x0.copy()
    best = score(x)
    used = 1
    steps = np.full(x.size, step)
    while used < budget and np.abs(steps).max() >= min_step:
        for i in rng.permutation(x.size):
            if used >= budget:
                break
            trial = x.copy()
            trial[i] += steps[i]
            s = score(trial)
            used += 1
            if s > best:
                best, x = s, trial
                steps[i] = np.clip(2.0 * steps[i], -4.0, 4.0)
            else:
                steps[i] *= -0.5
    return best, x, used


def _safe(fn):
    def wrapped(x):
        try:
            return fn(x)
        except (NumericalIntegrityError, np.linalg.LinAlgError):
            return (-np.inf, -np.inf)
    return wrapped


def _run_restart(problem: _Problem, seed: int, restart: int, budget: int):
    rng = np.random.default_rng([seed, restart])
    x0 = rng.normal(size=problem.n_params)

    @_safe
    def usd_score(x):
        elems = problem.elements(x)
        value, _ = problem.project(elems)
        return (value, -problem.leakage_ratio(elems))

    @_safe
    def posterior_score(x):
        return (problem.max_posterior(problem.elements(x)),)

    half = max(budget // 2, 1)
    usd_best, usd_x, used_a = _compass_search(usd_score, x0, half, rng)
    post_best, post_x, used_b = _compass_search(posterior_score, x0, budget - half, rng)
    return usd_best, usd_x, post_best, post_x, used_a + used_b


def optimize_usd_attack(e: GeneratedEnsemble, eve_outcomes: int, budget: int = 10_000,
                        seed: int = 0, restarts: int = 4, factor_rows: Optional[int] = None,
                        zero_tol: float = DEFAULT_ZERO_TOL,
                        workers: Optional[int] = None) -> AttackResult:
    """Search Eve's K-outcome POVMs for unambiguous identification of a label.

    ``budget`` is the number of objective evaluations spent on each of the
    two objectives. The returned success is re-measured on the best POVM
    with ``usd_witness_scan`` at ``zero_tol``; results do not depend on
    ``workers``.
    """
    if eve_outcomes < 2:
        raise InvalidArgumentError("eve_outcomes must be at least 2")
    if budget < 1:
        raise InvalidArgumentError("budget must be at least 1")
    restarts = max(1, min(restarts, budget))
    problem = _Problem(e, eve_outcomes, factor_rows or e.dim)
    shares = [2 * budget // restarts] * restarts
    shares[0] += 2 * budget - sum(shares)
    workers = workers or default_workers()
    jobs = [(problem, seed, r, shares[r]) for r in range(restarts)]
    if workers > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=min(workers, restarts)) as pool:
            runs = list(pool.map(lambda job: _run_restart(*job), jobs))
    else:
        runs = [_run_restart(*job) for job in jobs]

    # Ties go to the lowest restart index.
    usd_idx = max(range(restarts), key=lambda r: (runs[r][0], -r))
    post_idx = max(range(restarts), key=lambda r: (runs[r][2], -r))
    raw = problem.elements(runs[usd_idx][1])
    _, projected = problem.project(raw)
    best_povm = Povm(tuple(projected))
    posterior_povm = Povm(tuple(problem.elements(runs[post_idx][3])))

    profile = conditional_profile(e, best_povm)
    priors = e.priors
    return AttackResult(
        best_unambiguous_success=unambiguous_success(profile, priors, zero_tol),
        best_povm=best_povm,
        best_max_posterior=max_posterior(conditional_profile(e, posterior_povm), priors),
        posterior_povm=posterior_povm,
        best_leakage_ratio=min_leakage_ratio(conditional_profile(e, Povm(tuple(raw))), priors),
        witnesses=usd_witness_scan(profile, priors, zero_tol),
        evaluations=sum(run[4] for run in runs),
        seed=seed,
        restarts=restarts,
        zero_tol=zero_tol,
        history={"usd_restart": usd_idx, "posterior_restart": post_idx,
                 "search_score": float(runs[usd_idx][0][0])},
    )
