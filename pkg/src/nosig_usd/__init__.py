"""No-signaling black boxes and unambiguous discrimination of steered ensembles."""

from .blackbox import (JointTable, QuantumScenario, conditional_eve_given_alice, estimate_table,
                       from_quantum_scenario, marginal_alice, marginal_eve, nosignaling_residual,
                       sample, verify_total_probability)
from .qcore import (DensityOperator, InvalidArgumentError, NoiseSpec, NumericalIntegrityError, Povm,
                    apply_noise, bell_state, born_probability, conditional_state, partial_trace)
from .report import RunReport, compare_scenarios, run_scenario
from .scenario import ScenarioConfig, ScenarioError
from .stategen import LABEL_NAMES, LABELS, GeneratedEnsemble, generate_ensemble
from .usdcheck import (AttackResult, BoundReport, analyze, guessing_bound, optimize_usd_attack,
                       pairwise_usd_oracle, ratio_bounds, usd_witness_scan, verify_eq5)

__version__ = "0.1.0"

__all__ = [
    "AttackResult", "BoundReport", "DensityOperator", "GeneratedEnsemble", "InvalidArgumentError",
    "JointTable", "LABELS", "LABEL_NAMES", "NoiseSpec", "NumericalIntegrityError", "Povm",
    "QuantumScenario", "RunReport", "ScenarioConfig", "ScenarioError", "analyze", "apply_noise",
    "bell_state", "born_probability", "compare_scenarios", "conditional_eve_given_alice",
    "conditional_state", "estimate_table", "from_quantum_scenario", "generate_ensemble",
    "guessing_bound", "marginal_alice", "marginal_eve", "nosignaling_residual",
    "optimize_usd_attack", "pairwise_usd_oracle", "partial_trace", "ratio_bounds", "run_scenario",
    "sample", "usd_witness_scan", "verify_eq5", "verify_total_probability",
]
