"""Reference optimum for unambiguously discriminating two pure states.

Works in the two-dimensional span of the states, where any conclusive
outcome for one state must be proportional to the projector orthogonal to
the other. That leaves two weights ``(a, b)`` subject to
``I - a P_a - b P_b >= 0``. For each ``a`` the best ``b`` sits on the
boundary of that constraint, so the search is a dense grid over ``a``
refined by re-gridding a window around the incumbent, halving the window
whenever a re-grid brings no improvement.

This is deliberately a separate code path from the POVM search in
``attack`` so the two can be checked against each other.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from ..qcore import ATOL, DensityOperator, InvalidArgumentError


def _pure_vector(rho: DensityOperator) -> np.ndarray:
    if not rho.is_pure(ATOL):
        raise InvalidArgumentError(f"state is not pure (purity {rho.purity:.12f})")
    w, v = np.linalg.eigh(rho.matrix)
    return v[:, np.argmax(w)]


def _boundary_success(a: np.ndarray, s: float, gain_a: float, gain_b: float) -> np.ndarray:
    """Success with the second weight pushed to the edge of I - E_a - E_b >= 0.

    In the basis (v1, v1perp) with v2perp = (sqrt(1-s^2), -s):
    I - a|v2perp><v2perp| = [[1 - a c2, a s sqrt(c2)], [., 1 - a s^2]], and the
    largest b keeping it PSD after subtracting b|v1perp><v1perp| zeroes the
    determinant.
    """
    c2 = 1.0 - s * s
    m00 = 1.0 - a * c2
    with np.errstate(divide="ignore", invalid="ignore"):
        coupling = np.where(m00 > 0, (a * s) ** 2 * c2 / m00, 0.0 if s == 0 else np.inf)
    b = np.clip(1.0 - a * s * s - coupling, 0.0, 1.0)
    return gain_a * a + gain_b * b


def pairwise_usd_oracle(psi: DensityOperator, phi: DensityOperator,
                        priors: Tuple[float, float] = (0.5, 0.5),
                        grid: int = 4001, refinements: int = 60,
                        max_rounds: int = 10_000) -> float:
    """Optimal unambiguous success probability for two pure states."""
    q = float(priors[0])
    if not 0.0 <= q <= 1.0 or abs(priors[0] + priors[1] - 1.0) > 1e-12:
        raise InvalidArgumentError("priors must be (q, 1 - q) with q in [0, 1]")
    if psi.dim != phi.dim:
        raise InvalidArgumentError("states have different dimensions")
    v1, v2 = _pure_vector(psi), _pure_vector(phi)
    s = min(float(abs(np.vdot(v1, v2))), 1.0)
    if 1.0 - s < 1e-14:
        return 0.0
    c2 = 1.0 - s * s
    # Conclusive weights a (for psi) and b (for phi) both see overlap c2.
    gain_a, gain_b = q * c2, (1 - q) * c2
    a_grid = np.linspace(0.0, 1.0, grid)
    values = _boundary_success(a_grid, s, gain_a, gain_b)
    i = int(np.argmax(values))
    best, a = float(values[i]), float(a_grid[i])
    half = 1.0 / (grid - 1)
    shrinks = 0
    for _ in range(max_rounds):
        local = np.linspace(max(a - half, 0.0), min(a + half, 1.0), 21)
        vals = _boundary_success(local, s, gain_a, gain_b)
        j = int(np.argmax(vals))
        if vals[j] > best + 1e-16:
            best, a = float(vals[j]), float(local[j])
            continue
        shrinks += 1
        if shrinks >= refinements:
            break
        half *= 0.5
    return float(min(max(best, 0.0), 1.0))
