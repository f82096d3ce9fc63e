from .attack import AttackResult, optimize_usd_attack
from .bounds import (BoundReport, ConditionalProfile, analyze, bayes_posteriors, chefles_infeasible,
                     conditional_profile, eq10_residual, guessing_bound, guessing_bound_solution,
                     linear_independence_rank, max_posterior, near_witness_scan, ratio_bounds,
                     unambiguous_success, unidentifiable_labels, uniform_present_priors,
                     usd_witness_scan, verify_eq5, witness_projectors)
from .oracle import pairwise_usd_oracle
