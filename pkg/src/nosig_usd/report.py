"""Scenario runs and their JSON reports.

A report is a flat mapping from dotted keys to JSON scalars or lists, plus
a ``config`` echo of the scenario. Everything the human-readable table
shows is read back from that mapping, so the two never disagree. Reports
are deterministic: rerunning a scenario gives a byte-identical document
(wall-clock time is only included on request).
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .blackbox import (JointTable, QuantumScenario, conditional_eve_given_alice, estimate_table,
                       from_quantum_scenario, marginal_alice, nosignaling_residual, sample,
                       verify_total_probability)
from .qcore import KET_0, KET_1, KET_MINUS, KET_PLUS, InvalidArgumentError, NumericalIntegrityError, Povm
from .scenario import ScenarioConfig, ScenarioError, encode_matrix
from .stategen import LABEL_NAMES, LABELS, GeneratedEnsemble, generate_ensemble, steering_consistency
from .usdcheck import (ConditionalProfile, analyze, eq10_residual, optimize_usd_attack, ratio_bounds,
                       verify_eq5)

REPORT_VERSION = 1

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INVARIANT = 3
EXIT_NUMERICAL = 4

_IDEAL_KETS = {(0, 0): KET_0, (0, 1): KET_1, (1, 0): KET_PLUS, (1, 1): KET_MINUS}


@dataclass
class Overrides:
    """Command-line settings that take precedence over the scenario file."""

    tolerance_eq5: Optional[float] = None
    zero_tol: Optional[float] = None
    half_stderr: Optional[float] = None
    sample_n: Optional[int] = None
    sample_seed: Optional[int] = None
    attack_budget: Optional[int] = None
    attack_seed: Optional[int] = None
    attack_outcomes: Optional[int] = None
    attack_restarts: Optional[int] = None
    force_attack: bool = False
    timing: bool = False


@dataclass
class RunReport:
    data: Dict[str, Any]
    violations: List[str] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return EXIT_INVARIANT if self.violations else EXIT_OK

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _num(x) -> Optional[float]:
    """JSON-safe float; non-finite values become null."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _labels(pairs) -> List[List[Any]]:
    return [[int(k), LABEL_NAMES[lab]] for k, lab in pairs]


def _table_profile(t: JointTable) -> ConditionalProfile:
    rows = np.full((t.eve_outcomes, 4), np.nan)
    present = []
    for n, (l, m) in enumerate(LABELS):
        cond = conditional_eve_given_alice(t, l, m)
        present.append(cond is not None)
        if cond is not None:
            rows[:, n] = cond
    return ConditionalProfile(rows, np.array(present))


def _ensemble_section(e: GeneratedEnsemble) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    priors = e.priors
    for lab in LABELS:
        key = f"state.{LABEL_NAMES[lab]}"
        rho = e.states[lab]
        out[f"{key}.prior"] = priors[lab]
        out[f"{key}.present"] = rho is not None
        out[f"{key}.eigenvalues"] = (None if rho is None
                                     else [float(w) for w in np.sort(rho.eigenvalues())[::-1]])
        out[f"{key}.fidelity_to_ideal"] = (
            rho.fidelity_to_pure(_IDEAL_KETS[lab]) if rho is not None and rho.dim == 2 else None)
    out["steering_consistency"] = steering_consistency(e)
    return out


def _sampling_section(t: JointTable, n: int, seed: int, tol: Dict[str, float]) -> Dict[str, Any]:
    knob_seq, draw_seq = np.random.SeedSequence(seed).spawn(2)
    knobs = np.random.default_rng(knob_seq).integers(0, 2, size=n)
    draws = sample(t, knobs, draw_seq)
    est = estimate_table(np.column_stack([knobs, draws]), t.eve_outcomes)
    out: Dict[str, Any] = {"sampling.n": n, "sampling.seed": seed}
    p_hat, within, at_half = [], [], []
    for i in (0, 1):
        n_i = int((knobs == i).sum())
        ph = marginal_alice(est, i)[0]
        exact = marginal_alice(t, i)[0]
        bound = math.sqrt(0.25 / n_i)
        p_hat.append(ph)
        within.append(abs(ph - exact) <= 3.0 * bound)
        at_half.append(abs(ph - 0.5) <= tol["half_stderr"] * bound)
        out[f"sampling.n{i}"] = n_i
        out[f"sampling.p{i}_hat"] = ph
        out[f"sampling.p{i}_stderr"] = math.sqrt(ph * (1 - ph) / n_i)
        out[f"sampling.p{i}_within_3se"] = within[-1]
    profile = _table_profile(est)
    slack8, slack9 = ratio_bounds(tuple(p_hat), profile)
    out["sampling.max_table_error"] = float(np.max(np.abs(est.probs - t.probs)))
    out["sampling.nosignaling_residual"] = nosignaling_residual(est)
    out["sampling.eq5_residual"] = verify_eq5(tuple(p_hat), profile)
    out["sampling.ratio_slack8"] = float(slack8.min())
    out["sampling.ratio_slack9"] = float(slack9.min())
    out["sampling.p_half"] = all(at_half)
    out["sampling.eq10_residual"] = eq10_residual(profile) if all(at_half) else None
    return out


def _attack_section(e: GeneratedEnsemble, outcomes: int, budget: int, seed: int,
                    restarts: int, zero_tol: float):
    res = optimize_usd_attack(e, outcomes, budget=budget, seed=seed, restarts=restarts,
                              zero_tol=zero_tol)
    out = {
        "attack.outcomes": outcomes,
        "attack.budget": budget,
        "attack.seed": seed,
        "attack.restarts": res.restarts,
        "attack.evaluations": res.evaluations,
        "attack.unambiguous_success": res.best_unambiguous_success,
        "attack.max_posterior": res.best_max_posterior,
        "attack.leakage_ratio": _num(res.best_leakage_ratio),
        "attack.witnesses": _labels(res.witnesses),
        "attack.best_povm": [encode_matrix(m) for m in res.best_povm.elements],
    }
    return out, res


def run_scenario(config: ScenarioConfig, overrides: Optional[Overrides] = None) -> RunReport:
    """Build the ensemble, Eve's table and every check for one scenario."""
    ov = overrides or Overrides()
    start = time.perf_counter()
    tol = dict(config.tolerances)
    if ov.tolerance_eq5 is not None:
        tol["eq5"] = ov.tolerance_eq5
    if ov.zero_tol is not None:
        tol["zero_tol"] = ov.zero_tol
    if ov.half_stderr is not None:
        tol["half_stderr"] = ov.half_stderr

    joint = config.joint_state()
    alice = config.alice_povms()
    e = generate_ensemble(joint, alice, config.dims)

    data: Dict[str, Any] = {
        "report_version": REPORT_VERSION,
        "scenario": config.name,
        "config": config.raw,
        "config_sha256": config.content_hash(),
        "dims": list(config.dims),
        "p0": e.basis_probs[0],
        "p1": e.basis_probs[1],
    }
    data.update({f"tolerances.{k}": v for k, v in sorted(tol.items())})
    data.update(_ensemble_section(e))

    spec = config.eve_spec
    eve = config.eve_povm()
    seeds: Dict[str, int] = {}
    if eve is None or ov.force_attack:
        search = spec if spec["kind"] == "search" else {}
        outcomes = ov.attack_outcomes or search.get("outcomes", 4)
        budget = ov.attack_budget or search.get("budget", 10_000)
        seed = ov.attack_seed if ov.attack_seed is not None else search.get("seed", 0)
        restarts = ov.attack_restarts or search.get("restarts", 4)
        section, res = _attack_section(e, outcomes, budget, seed, restarts, tol["zero_tol"])
        data.update(section)
        seeds["attack"] = seed
        if eve is None:
            eve = res.best_povm
    data["eve.source"] = spec["kind"]
    data["eve.outcomes"] = eve.outcome_count

    table = from_quantum_scenario(QuantumScenario(joint, alice, eve))
    data["table"] = table.probs.tolist()
    data["nosignaling_residual"] = nosignaling_residual(table)
    data["total_probability_residual"] = max(verify_total_probability(table, i) for i in (0, 1))

    b = analyze(e, eve, half_tol=tol["half"], zero_tol=tol["zero_tol"])
    data.update({
        "bounds.eq5_residual": b.eq5_residual,
        "bounds.ratio_slack8": b.ratio_slack8,
        "bounds.ratio_slack9": b.ratio_slack9,
        "bounds.eq10_residual": b.eq10_residual,
        "bounds.guessing_bound": b.guessing_bound,
        "bounds.guessing_bound_uniform": b.guessing_bound_uniform,
        "bounds.max_posterior": b.max_posterior,
        "bounds.usd_witnesses": _labels(b.usd_witnesses),
        "bounds.near_witnesses": _labels(b.near_witnesses),
        "bounds.rank": b.rank,
        "bounds.chefles_infeasible": b.chefles_infeasible,
        "bounds.unidentifiable": [LABEL_NAMES[lab] for lab in b.unidentifiable],
    })

    sampling = dict(config.sampling or {})
    if ov.sample_n is not None:
        sampling["n"] = ov.sample_n
    if ov.sample_seed is not None:
        sampling["seed"] = ov.sample_seed
    if sampling:
        if "n" not in sampling:
            raise ScenarioError("sampling needs a sample count (--n)")
        sampling.setdefault("seed", 0)
        data.update(_sampling_section(table, sampling["n"], sampling["seed"], tol))
        seeds["sampling"] = sampling["seed"]
    data["seeds"] = seeds

    violations = _violations(data, tol)
    data["checks.passed"] = not violations
    data["checks.violations"] = violations
    if ov.timing:
        data["timing.seconds"] = round(time.perf_counter() - start, 3)
    return RunReport(data, violations)


def _violations(d: Dict[str, Any], tol: Dict[str, float]) -> List[str]:
    out = []
    if d["nosignaling_residual"] > tol["nosignaling"]:
        out.append(f"nosignaling residual {d['nosignaling_residual']:.3e} > {tol['nosignaling']:.1e}")
    if d["total_probability_residual"] > tol["nosignaling"]:
        out.append(f"total probability residual {d['total_probability_residual']:.3e}")
    if d["bounds.eq5_residual"] > tol["eq5"]:
        out.append(f"eq5 residual {d['bounds.eq5_residual']:.3e} > {tol['eq5']:.1e}")
    for key in ("bounds.ratio_slack8", "bounds.ratio_slack9"):
        if d[key] < -tol["slack"]:
            out.append(f"{key.split('.')[1]} {d[key]:.3e} < -{tol['slack']:.1e}")
    if d["bounds.eq10_residual"] is not None and d["bounds.eq10_residual"] > tol["eq5"]:
        out.append(f"eq10 residual {d['bounds.eq10_residual']:.3e}")
    if d["bounds.usd_witnesses"]:
        out.append(f"unambiguous witnesses {d['bounds.usd_witnesses']}")
    return out


# --- human-readable output ----------------------------------------------------

_SUMMARY_KEYS = (
    "p0", "p1", "eve.source", "eve.outcomes", "nosignaling_residual", "bounds.eq5_residual",
    "bounds.ratio_slack8", "bounds.ratio_slack9", "bounds.eq10_residual",
    "bounds.guessing_bound", "bounds.guessing_bound_uniform", "bounds.max_posterior",
    "bounds.usd_witnesses", "bounds.near_witnesses", "bounds.rank",
    "bounds.chefles_infeasible", "bounds.unidentifiable", "attack.unambiguous_success",
    "attack.max_posterior", "attack.leakage_ratio", "attack.evaluations",
    "sampling.n", "sampling.p0_hat", "sampling.p0_stderr", "sampling.p1_hat",
    "sampling.p1_stderr", "sampling.max_table_error", "sampling.eq5_residual",
    "checks.passed", "timing.seconds",
)


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v).lower() if v is not None else "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def format_report(data: Dict[str, Any]) -> str:
    lines = [f"scenario {data['scenario']}  (sha256 {data['config_sha256'][:12]})"]
    width = max(len(k) for k in _SUMMARY_KEYS)
    for key in _SUMMARY_KEYS:
        if key in data:
            lines.append(f"  {key:<{width}}  {_fmt(data[key])}")
    for v in data["checks.violations"]:
        lines.append(f"  VIOLATION: {v}")
    return "\n".join(lines) + "\n"


_COMPARE_COLUMNS = (
    ("p0", "p0"), ("p1", "p1"), ("eq5", "bounds.eq5_residual"), ("nosig", "nosignaling_residual"),
    ("slack8", "bounds.ratio_slack8"), ("slack9", "bounds.ratio_slack9"),
    ("guess", "bounds.guessing_bound"), ("guess_u", "bounds.guessing_bound_uniform"),
    ("maxpost", "bounds.max_posterior"), ("usd", "attack.unambiguous_success"),
    ("rank", "bounds.rank"),
)


@dataclass
class CompareRow:
    source: str
    exit_code: int
    data: Optional[Dict[str, Any]] = None
    error: Optional[str] = None


def format_compare(rows: Sequence[CompareRow]) -> str:
    header = ["scenario"] + [c for c, _ in _COMPARE_COLUMNS] + ["status"]
    table = [header]
    for row in rows:
        if row.data is None:
            table.append([row.source] + ["-"] * len(_COMPARE_COLUMNS) + [f"error: {row.error}"])
            continue
        status = "ok" if row.exit_code == EXIT_OK else "FAIL: " + "; ".join(
            row.data["checks.violations"])
        table.append([row.data["scenario"]]
                     + [_fmt(row.data.get(key)) for _, key in _COMPARE_COLUMNS] + [status])
    widths = [max(len(r[i]) for r in table) for i in range(len(header) - 1)]
    return "".join("  ".join(cell.ljust(w) for cell, w in zip(r, widths)) + "  " + r[-1] + "\n"
                   for r in table)


def run_guarded(load, source: str, overrides: Optional[Overrides] = None) -> CompareRow:
    """Load and run one scenario, mapping failures onto exit codes."""
    try:
        rep = run_scenario(load(source), overrides)
    except ScenarioError as exc:
        return CompareRow(source, EXIT_INPUT, error=str(exc))
    except NumericalIntegrityError as exc:
        return CompareRow(source, EXIT_NUMERICAL, error=f"numerical: {exc}")
    except InvalidArgumentError as exc:
        return CompareRow(source, EXIT_INPUT, error=str(exc))
    return CompareRow(source, rep.exit_code, data=rep.data)


def compare_scenarios(load, sources: Sequence[str], overrides: Optional[Overrides] = None,
                      workers: int = 1) -> Tuple[List[CompareRow], int]:
    """Run several scenarios; rows keep input order and the worst exit code wins."""
    if len(sources) < 2:
        raise InvalidArgumentError("compare needs at least two scenarios")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda s: run_guarded(load, s, overrides), sources))
    else:
        rows = [run_guarded(load, s, overrides) for s in sources]
    return rows, max(r.exit_code for r in rows)
