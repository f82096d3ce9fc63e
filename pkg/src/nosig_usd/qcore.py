"""Dense finite-dimensional quantum mechanics on small Hilbert spaces.

Matrices are plain ``numpy`` complex128 arrays. ``DensityOperator`` and
``Povm`` wrap them with validation and are immutable after construction.
Dimensions are expected to stay at desk scale (at most ~16).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

# Absolute tolerances for Hermiticity, trace, PSD and completeness checks.
ATOL = 1e-10
# Window around [0, 1] inside which Born probabilities are clamped.
CLAMP_WINDOW = 1e-10
# Below this an Alice outcome is treated as never happening.
ABSENT_PROB = 1e-12


class InvalidArgumentError(ValueError):
    """Raised for inputs that violate an operation's preconditions."""


class NumericalIntegrityError(ArithmeticError):
    """Raised when a computed quantity leaves its admissible range."""


def as_matrix(a) -> np.ndarray:
    m = np.array(a, dtype=np.complex128)
    if m.ndim != 2:
        raise InvalidArgumentError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


def allclose(a, b, atol: float = ATOL) -> bool:
    """Entry-wise equality within an absolute tolerance."""
    a, b = np.asarray(a), np.asarray(b)
    return a.shape == b.shape and bool(np.max(np.abs(a - b), initial=0.0) <= atol)


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def is_psd(a: np.ndarray, atol: float = ATOL) -> bool:
    if not allclose(a, a.conj().T, atol):
        return False
    return bool(np.linalg.eigvalsh(hermitian_part(a)).min() >= -atol)


def ket(*amplitudes) -> np.ndarray:
    v = np.array(amplitudes, dtype=np.complex128)
    return v / np.linalg.norm(v)


def basis_ket(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return v


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=np.complex128)
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, positive semidefinite, unit-trace matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise InvalidArgumentError(f"density operator must be square, got {m.shape}")
        if not allclose(m, m.conj().T):
            raise InvalidArgumentError("density operator is not Hermitian")
        if abs(np.trace(m) - 1.0) > ATOL:
            raise InvalidArgumentError(f"density operator trace {np.trace(m).real:.3e} != 1")
        if np.linalg.eigvalsh(hermitian_part(m)).min() < -ATOL:
            raise InvalidArgumentError("density operator is not positive semidefinite")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def from_ket(cls, vec) -> "DensityOperator":
        v = np.asarray(vec, dtype=np.complex128)
        return cls(projector(v / np.linalg.norm(v)))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim, dtype=np.complex128) / dim)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(hermitian_part(self.matrix))

    def is_pure(self, atol: float = ATOL) -> bool:
        return abs(self.purity - 1.0) <= atol

    def fidelity_to_pure(self, vec) -> float:
        """<v|rho|v> for a normalised target ket ``v``."""
        v = np.asarray(vec, dtype=np.complex128)
        v = v / np.linalg.norm(v)
        return float(np.real(v.conj() @ self.matrix @ v))

    def support(self, rel_tol: float = 1e-8) -> np.ndarray:
        """Orthonormal columns spanning the range of the operator."""
        w, v = np.linalg.eigh(hermitian_part(self.matrix))
        return v[:, w > rel_tol * max(w.max(), 0.0)]


@dataclass(frozen=True)
class Povm:
    """Positive operator-valued measure: PSD elements summing to identity."""

    elements: Tuple[np.ndarray, ...]

    def __post_init__(self):
        elems = tuple(as_matrix(e) for e in self.elements)
        if not elems:
            raise InvalidArgumentError("a POVM needs at least one element")
        dim = elems[0].shape[0]
        for k, e in enumerate(elems):
            if e.shape != (dim, dim):
                raise InvalidArgumentError(f"POVM element {k} has shape {e.shape}, expected {(dim, dim)}")
            if not is_psd(e):
                raise InvalidArgumentError(f"POVM element {k} is not Hermitian PSD")
        if not allclose(sum(elems), np.eye(dim)):
            raise InvalidArgumentError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", tuple(_frozen(e) for e in elems))

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def outcome_count(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, k: int) -> np.ndarray:
        return self.elements[k]

    def probabilities(self, state: DensityOperator) -> np.ndarray:
        return np.array([born_probability(state, e) for e in self.elements])


NOISE_KINDS = ("depolarizing", "dephasing", "unitary_misalignment", "explicit")


@dataclass(frozen=True)
class NoiseSpec:
    """Parametric imperfection applied to a (joint) state.

    ``strength`` is used by depolarizing/dephasing, ``angle`` and ``side``
    (0 = first subsystem, 1 = second) by unitary misalignment, and
    ``override`` by the explicit kind.
    """

    kind: str
    strength: float = 0.0
    angle: float = 0.0
    side: int = 0
    override: Optional[DensityOperator] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidArgumentError(f"unknown noise kind {self.kind!r}")
        if self.kind in ("depolarizing", "dephasing") and not 0.0 <= self.strength <= 1.0:
            raise InvalidArgumentError(f"{self.kind} strength must lie in [0, 1], got {self.strength}")
        if self.kind == "unitary_misalignment":
            if self.side not in (0, 1):
                raise InvalidArgumentError("misalignment side must be 0 or 1")
            if not np.isfinite(self.angle):
                raise InvalidArgumentError("misalignment angle must be finite")
        if self.kind == "explicit" and self.override is None:
            raise InvalidArgumentError("explicit noise needs an override state")

    @classmethod
    def depolarizing(cls, strength: float) -> "NoiseSpec":
        return cls("depolarizing", strength=strength)

    @classmethod
    def dephasing(cls, strength: float) -> "NoiseSpec":
        return cls("dephasing", strength=strength)

    @classmethod
    def misalignment(cls, angle: float, side: int = 0) -> "NoiseSpec":
        return cls("unitary_misalignment", angle=angle, side=side)

    @classmethod
    def explicit(cls, state: DensityOperator) -> "NoiseSpec":
        return cls("explicit", override=state)


def tensor(a, b) -> np.ndarray:
    """Kronecker product ``a ⊗ b``."""
    return np.kron(as_matrix(a), as_matrix(b))


def bell_state(dim_per_side: int = 2) -> DensityOperator:
    """Maximally entangled state (1/sqrt(d)) sum_n |n>|n> as a density operator."""
    if dim_per_side < 2:
        raise InvalidArgumentError("bell_state needs dim_per_side >= 2")
    d = dim_per_side
    v = np.zeros(d * d, dtype=np.complex128)
    v[[n * d + n for n in range(d)]] = 1.0 / np.sqrt(d)
    return DensityOperator.from_ket(v)


def schmidt_state(angle: float) -> DensityOperator:
    """Two-qubit state cos(angle)|00> + sin(angle)|11>."""
    return DensityOperator.from_ket([np.cos(angle), 0.0, 0.0, np.sin(angle)])


def rotation(angle: float, dim: int = 2) -> np.ndarray:
    """exp(-i angle sigma_y / 2) acting on levels 0 and 1, identity elsewhere.

    Rotates the Bloch vector by ``angle`` about the y axis.
    """
    u = np.eye(dim, dtype=np.complex128)
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    u[:2, :2] = [[c, -s], [s, c]]
    return u


def _split_dims(dim: int, dims: Optional[Tuple[int, int]]) -> Tuple[int, int]:
    if dims is None:
        root = int(round(np.sqrt(dim)))
        if root * root != dim:
            raise InvalidArgumentError(f"cannot infer subsystem dims for dimension {dim}")
        return root, root
    d1, d2 = dims
    if d1 * d2 != dim:
        raise InvalidArgumentError(f"subsystem dims {dims} do not match state dimension {dim}")
    return d1, d2


def apply_noise(state: DensityOperator, spec: NoiseSpec,
                dims: Optional[Tuple[int, int]] = None) -> DensityOperator:
    """Apply one of the imperfection models to ``state``.

    Dephasing acts in the computational basis of the full space:
    rho -> (1 - s) rho + s diag(rho). Misalignment applies ``rotation`` to
    one subsystem and needs ``dims`` unless the state is square-composite.
    """
    rho = state.matrix
    d = state.dim
    if spec.kind == "depolarizing":
        out = (1 - spec.strength) * rho + spec.strength * np.eye(d) / d
    elif spec.kind == "dephasing":
        out = (1 - spec.strength) * rho + spec.strength * np.diag(np.diag(rho))
    elif spec.kind == "unitary_misalignment":
        d1, d2 = _split_dims(d, dims)
        if spec.side == 0:
            u = np.kron(rotation(spec.angle, d1), np.eye(d2))
        else:
            u = np.kron(np.eye(d1), rotation(spec.angle, d2))
        out = u @ rho @ u.conj().T
    else:
        if spec.override.dim != d:
            raise InvalidArgumentError(
                f"override dimension {spec.override.dim} != state dimension {d}")
        return spec.override
    return DensityOperator(hermitian_part(out))


def partial_trace(state: DensityOperator, dims: Tuple[int, int],
                  traced_side: str = "first") -> DensityOperator:
    d1, d2 = dims
    if d1 * d2 != state.dim:
        raise InvalidArgumentError(f"dims {dims} do not match state dimension {state.dim}")
    r = state.matrix.reshape(d1, d2, d1, d2)
    if traced_side == "first":
        out = np.einsum("aiaj->ij", r)
    elif traced_side == "second":
        out = np.einsum("iaja->ij", r)
    else:
        raise InvalidArgumentError(f"traced_side must be 'first' or 'second', got {traced_side!r}")
    return DensityOperator(hermitian_part(out))


def _clamp_probability(p: float) -> float:
    if p < -CLAMP_WINDOW or p > 1 + CLAMP_WINDOW:
        raise NumericalIntegrityError(f"probability {p!r} outside [0, 1]")
    return min(max(p, 0.0), 1.0)


def born_probability(state: DensityOperator, effect) -> float:
    """Tr(E rho), clamped onto [0, 1] within ``CLAMP_WINDOW``."""
    e = as_matrix(effect)
    if e.shape != state.matrix.shape:
        raise InvalidArgumentError(f"effect shape {e.shape} does not match state {state.matrix.shape}")
    return _clamp_probability(float(np.real(np.trace(e @ state.matrix))))


def conditional_state(joint: DensityOperator, alice_effect,
                      dims: Tuple[int, int]) -> Tuple[float, Optional[DensityOperator]]:
    """State left on the second subsystem after Alice's effect clicks.

    Returns ``(p, rho)`` with ``p = Tr[(E ⊗ I) joint]``. When ``p`` is below
    ``ABSENT_PROB`` the outcome never happens and ``rho`` is ``None``.
    """
    d1, d2 = dims
    e = as_matrix(alice_effect)
    if e.shape != (d1, d1):
        raise InvalidArgumentError(f"Alice effect shape {e.shape} does not match d1={d1}")
    if d1 * d2 != joint.dim:
        raise InvalidArgumentError(f"dims {dims} do not match joint dimension {joint.dim}")
    weighted = np.kron(e, np.eye(d2)) @ joint.matrix
    reduced = np.einsum("aiaj->ij", weighted.reshape(d1, d2, d1, d2))
    p = _clamp_probability(float(np.real(np.trace(reduced))))
    if p < ABSENT_PROB:
        return 0.0, None
    return p, DensityOperator(hermitian_part(reduced / np.trace(reduced).real))


# --- standard measurements -------------------------------------------------

KET_0 = basis_ket(2, 0)
KET_1 = basis_ket(2, 1)
KET_PLUS = ket(1, 1)
KET_MINUS = ket(1, -1)


def projective_povm(vectors: Sequence) -> Povm:
    return Povm(tuple(projector(v) for v in vectors))


def computational_povm() -> Povm:
    return projective_povm([KET_0, KET_1])


def hadamard_povm() -> Povm:
    return projective_povm([KET_PLUS, KET_MINUS])


def ideal_alice_povms() -> Tuple[Povm, Povm]:
    """M_0 = {|0><0|, |1><1|}, M_1 = {|+><+|, |-><-|}."""
    return computational_povm(), hadamard_povm()


def misaligned_alice_povms(angle0: float, angle1: float) -> Tuple[Povm, Povm]:
    """Ideal qubit bases each rotated about the Bloch y axis."""
    r0, r1 = rotation(angle0), rotation(angle1)
    return (projective_povm([r0 @ KET_0, r0 @ KET_1]),
            projective_povm([r1 @ KET_PLUS, r1 @ KET_MINUS]))


def povm_from_factors(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Map arbitrary factors B_k to POVM elements S^-1/2 B_k^† B_k S^-1/2.

    Returns a stacked ``(K, d, d)`` array; S = sum_k B_k^† B_k must be
    invertible.
    """
    b = np.asarray(factors, dtype=np.complex128)
    g = np.conj(np.swapaxes(b, -1, -2)) @ b
    s = g.sum(axis=0)
    elems = g
    # A second pass absorbs the rounding left by an ill-conditioned S.
    for _ in range(2):
        w, v = np.linalg.eigh(hermitian_part(s))
        if w.min() <= 1e-14 * max(w.max(), 1e-300):
            raise NumericalIntegrityError("POVM factor sum is singular")
        inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
        elems = inv_sqrt @ elems @ inv_sqrt
        elems = 0.5 * (elems + np.conj(np.swapaxes(elems, -1, -2)))
        s = elems.sum(axis=0)
    return elems


def random_density(rng: np.random.Generator, dim: int, rank: Optional[int] = None) -> DensityOperator:
    """Ginibre-distributed density operator of the given rank (full by default)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return DensityOperator(hermitian_part(m / np.trace(m).real))


def random_povm(rng: np.random.Generator, dim: int, outcomes: int) -> Povm:
    g = rng.normal(size=(outcomes, dim, dim)) + 1j * rng.normal(size=(outcomes, dim, dim))
    return Povm(tuple(povm_from_factors(g)))
