"""Exact complex linear algebra and state evolution for small qubit registers.

Everything here is dense double-precision numpy. States live on ``n`` qubits
with little-endian bit order: bit ``j`` of a computational-basis index is
variable ``x_{j+1}``. Pure states are kept as :class:`StateVector` for speed
and are promoted to a :class:`DensityMatrix` only when a measurement
super-operator first touches them (see :mod:`zenopt.zeno`).

Generators come in four flavours. The structured ones (diagonal operators,
the transverse field, the rank-one uniform projector) are never materialized
during evolution; a dense Hermitian generator is exponentiated through its
eigendecomposition, which is exact for Hermitian input and reusable across
angles.
"""

from __future__ import annotations

import numbers
import os

import numpy as np

#: Hard cap on register size. Density matrices above this exceed desk-scale
#: memory (a 14-qubit density matrix is already 4 GiB).
HARD_MAX_QUBITS = 14

_NORM_TOL = 1e-9
_HERM_TOL = 1e-9
#: Number of super-operator applications between drift-control passes
#: (re-symmetrize and renormalize the density matrix).
_RESYM_INTERVAL = 100


class DimensionMismatchError(ValueError):
    """Operands act on registers of different sizes."""


def max_qubits() -> int:
    """Current register-size cap.

    ``ZENO_MAX_QUBITS`` can lower (never raise) the built-in cap, which is
    handy for keeping CI memory bounded.
    """
    cap = HARD_MAX_QUBITS
    env = os.environ.get("ZENO_MAX_QUBITS")
    if env is not None:
        cap = min(cap, int(env))
    return cap


def check_num_qubits(n: int) -> int:
    if n < 1:
        raise ValueError(f"register needs at least one qubit, got {n}")
    cap = max_qubits()
    if n > cap:
        raise ValueError(f"register size {n} exceeds the cap of {cap} qubits")
    return int(n)


def num_qubits_for_dim(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim <= 0 or (1 << n) != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def is_hermitian(mat: np.ndarray, tol: float = 1e-9) -> bool:
    mat = np.asarray(mat)
    return mat.ndim == 2 and mat.shape[0] == mat.shape[1] and np.max(np.abs(mat - mat.conj().T)) <= tol


def is_unitary(mat: np.ndarray, tol: float = 1e-9) -> bool:
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        return False
    eye = np.eye(mat.shape[0])
    return np.max(np.abs(mat.conj().T @ mat - eye)) <= tol


class StateVector:
    """Pure state of an ``n``-qubit register, normalized to 1e-9."""

    __slots__ = ("n", "amps")

    def __init__(self, amps: np.ndarray, *, copy: bool = True, validate: bool = True):
        amps = np.array(amps, dtype=np.complex128, copy=copy).reshape(-1)
        self.n = check_num_qubits(num_qubits_for_dim(amps.size))
        self.amps = amps
        if validate:
            nrm = np.linalg.norm(amps)
            if abs(nrm - 1.0) > _NORM_TOL:
                raise ValueError(f"state vector norm {nrm} is not 1 within {_NORM_TOL}")

    @property
    def dim(self) -> int:
        return self.amps.size

    @classmethod
    def basis(cls, n: int, index: int) -> "StateVector":
        amps = np.zeros(1 << n, dtype=np.complex128)
        amps[index] = 1.0
        return cls(amps, copy=False, validate=False)

    @classmethod
    def uniform(cls, n: int) -> "StateVector":
        dim = 1 << n
        return cls(np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128), copy=False, validate=False)

    def copy(self) -> "StateVector":
        return StateVector(self.amps, copy=True, validate=False)

    def renormalize(self) -> None:
        self.amps /= np.linalg.norm(self.amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amps, self.amps.conj()), copy=False, validate=False)

    def fidelity(self, other: "StateVector") -> float:
        return float(abs(np.vdot(self.amps, other.amps)) ** 2)


class DensityMatrix:
    """Exact mixed state of an ``n``-qubit register.

    Mutated in place by evolution and measurement; single-owner semantics.
    Long Zeno chains re-symmetrize and renormalize every
    ``_RESYM_INTERVAL`` super-operator applications to keep floating-point
    drift out of the Hermiticity/trace invariants.
    """

    __slots__ = ("n", "mat", "_superops")

    def __init__(self, mat: np.ndarray, *, copy: bool = True, validate: bool = True):
        mat = np.array(mat, dtype=np.complex128, copy=copy)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("density matrix must be square")
        self.n = check_num_qubits(num_qubits_for_dim(mat.shape[0]))
        self.mat = mat
        self._superops = 0
        if validate:
            if not is_hermitian(mat, _HERM_TOL):
                raise ValueError("density matrix is not Hermitian within 1e-9")
            tr = np.trace(mat).real
            if abs(tr - 1.0) > _NORM_TOL:
                raise ValueError(f"density matrix trace {tr} is not 1 within {_NORM_TOL}")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def from_pure(cls, state: StateVector) -> "DensityMatrix":
        return state.to_density()

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.mat, copy=True, validate=False)

    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def probabilities(self) -> np.ndarray:
        return np.real(np.diag(self.mat)).copy()

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh((self.mat + self.mat.conj().T) / 2.0)[0])

    def note_superop(self) -> None:
        """Drift control hook, called by each measurement super-operator."""
        self._superops += 1
        if self._superops % _RESYM_INTERVAL == 0:
            self.mat += self.mat.conj().T
            self.mat *= 0.5
            self.mat /= np.trace(self.mat).real

    def validate(self, tol: float = _NORM_TOL) -> None:
        if not is_hermitian(self.mat, tol):
            raise ValueError("density matrix drifted off Hermitian")
        if abs(self.trace() - 1.0) > tol:
            raise ValueError("density matrix trace drifted off 1")
        if self.min_eigenvalue() < -tol:
            raise ValueError("density matrix has a negative eigenvalue")


State = StateVector | DensityMatrix


def as_density(state: State) -> DensityMatrix:
    return state.to_density() if isinstance(state, StateVector) else state


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


class Generator:
    """Hermitian generator of a one-parameter unitary family exp(-i*a*G)."""

    n: int

    @property
    def dim(self) -> int:
        return 1 << self.n

    def materialize(self) -> np.ndarray:
        raise NotImplementedError


class Diagonal(Generator):
    """Cost-style operator, diagonal in the computational basis."""

    __slots__ = ("n", "values")

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        self.n = check_num_qubits(num_qubits_for_dim(values.size))
        self.values = values

    def materialize(self) -> np.ndarray:
        return np.diag(self.values.astype(np.complex128))


class TransverseField(Generator):
    """Sum of single-qubit Pauli-X terms; never materialized during evolution."""

    __slots__ = ("n",)

    def __init__(self, n: int):
        self.n = check_num_qubits(n)

    def materialize(self) -> np.ndarray:
        dim = self.dim
        mat = np.zeros((dim, dim), dtype=np.complex128)
        idx = np.arange(dim)
        for k in range(self.n):
            mat[idx ^ (1 << k), idx] += 1.0
        return mat


class RankOneUniform(Generator):
    """Rank-one projector onto the uniform superposition (complete-graph mixer)."""

    __slots__ = ("n",)

    def __init__(self, n: int):
        self.n = check_num_qubits(n)

    def materialize(self) -> np.ndarray:
        dim = self.dim
        return np.full((dim, dim), 1.0 / dim, dtype=np.complex128)


class DenseHermitian(Generator):
    """Arbitrary Hermitian generator, exponentiated via eigendecomposition.

    If the matrix squares to the identity (Pauli strings, folded two-local
    gates), the propagator collapses to the closed form
    cos(a)*I - i*sin(a)*H and the eigendecomposition is skipped.
    """

    __slots__ = ("n", "mat", "_eig", "_involution")

    def __init__(self, mat: np.ndarray, *, herm_tol: float = 1e-9):
        mat = np.array(mat, dtype=np.complex128)
        if not is_hermitian(mat, herm_tol):
            raise ValueError("generator matrix is not Hermitian")
        self.n = check_num_qubits(num_qubits_for_dim(mat.shape[0]))
        self.mat = (mat + mat.conj().T) / 2.0
        self.mat.setflags(write=False)
        self._eig: tuple[np.ndarray, np.ndarray] | None = None
        sq = self.mat @ self.mat
        self._involution = bool(np.max(np.abs(sq - np.eye(self.dim))) < 1e-12)

    def materialize(self) -> np.ndarray:
        return np.array(self.mat)

    @property
    def is_involution(self) -> bool:
        return self._involution

    def eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        if self._eig is None:
            w, v = np.linalg.eigh(self.mat)
            self._eig = (w, v)
        return self._eig

    def propagator(self, angle: float) -> np.ndarray:
        if self._involution:
            return np.cos(angle) * np.eye(self.dim) - 1j * np.sin(angle) * self.mat
        w, v = self.eigensystem()
        return (v * np.exp(-1j * angle * w)) @ v.conj().T


# ---------------------------------------------------------------------------
# Evolution and expectation
# ---------------------------------------------------------------------------


def _check_angle(angle: float) -> float:
    if not isinstance(angle, numbers.Real) or not np.isfinite(angle):
        raise ValueError(f"evolution angle must be a finite real, got {angle!r}")
    return float(angle)


def _check_dims(state: State, g: Generator) -> None:
    if state.dim != g.dim:
        raise DimensionMismatchError(f"state dim {state.dim} != generator dim {g.dim}")


def _sv_apply_1q(amps: np.ndarray, u: np.ndarray, qubit: int, n: int) -> np.ndarray:
    view = amps.reshape(1 << (n - 1 - qubit), 2, 1 << qubit)
    return np.einsum("ab,xby->xay", u, view).reshape(-1)


def _dm_apply_1q(mat: np.ndarray, u: np.ndarray, qubit: int, n: int) -> np.ndarray:
    dim = 1 << n
    rows = mat.reshape(1 << (n - 1 - qubit), 2, (1 << qubit) * dim)
    mat = np.einsum("ab,xby->xay", u, rows).reshape(dim, dim)
    cols = mat.reshape(dim, 1 << (n - 1 - qubit), 2, 1 << qubit)
    return np.einsum("ab,xzby->xzay", u.conj(), cols).reshape(dim, dim)


def _x_rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -1j * s], [-1j * s, c]])


def apply_evolution(state: State, g: Generator, angle: float) -> State:
    """Conjugate ``state`` by exp(-i*angle*g), in place, and return it.

    Structured generators use their closed forms: a diagonal operator is a
    phase mask, the transverse field factors into single-qubit X rotations,
    and the rank-one uniform projector P gives I + (exp(-i*angle)-1)*P.
    """
    angle = _check_angle(angle)
    _check_dims(state, g)

    if isinstance(g, Diagonal):
        phases = np.exp(-1j * angle * g.values)
        if isinstance(state, StateVector):
            state.amps *= phases
        else:
            state.mat *= phases[:, None]
            state.mat *= phases.conj()[None, :]
        return state

    if isinstance(g, TransverseField):
        u = _x_rotation(angle)
        if isinstance(state, StateVector):
            amps = state.amps
            for k in range(g.n):
                amps = _sv_apply_1q(amps, u, k, g.n)
            state.amps = amps
        else:
            mat = state.mat
            for k in range(g.n):
                mat = _dm_apply_1q(mat, u, k, g.n)
            state.mat = mat
        return state

    if isinstance(g, RankOneUniform):
        dim = g.dim
        c = np.exp(-1j * angle) - 1.0
        root = np.sqrt(dim)
        if isinstance(state, StateVector):
            overlap = state.amps.sum() / root
            state.amps += (c * overlap / root)
        else:
            v = state.mat.sum(axis=1) / root          # rho |+>
            s = v.sum().real / root                   # <+|rho|+>
            state.mat += (c / root) * v.conj()[None, :]
            state.mat += (np.conj(c) / root) * v[:, None]
            state.mat += (abs(c) ** 2 * s / dim)
        return state

    if isinstance(g, DenseHermitian):
        u = g.propagator(angle)
        if isinstance(state, StateVector):
            state.amps = u @ state.amps
        else:
            state.mat = u @ state.mat @ u.conj().T
        return state

    raise TypeError(f"unknown generator type {type(g).__name__}")


def expectation(state: State, obs: Generator) -> float:
    """Tr[obs * rho] (or the pure-state expectation), as a real number.

    The imaginary residue is asserted below 1e-9 and discarded.
    """
    _check_dims(state, obs)

    if isinstance(obs, Diagonal):
        return float(np.dot(obs.values, state.probabilities()))

    if isinstance(obs, TransverseField):
        total = 0.0 + 0.0j
        if isinstance(state, StateVector):
            amps = state.amps
            idx = np.arange(amps.size)
            for k in range(obs.n):
                total += np.vdot(amps, amps[idx ^ (1 << k)])
        else:
            idx = np.arange(state.dim)
            for k in range(obs.n):
                total += state.mat[idx ^ (1 << k), idx].sum()
        return _real_part(total)

    if isinstance(obs, RankOneUniform):
        dim = obs.dim
        if isinstance(state, StateVector):
            return float(abs(state.amps.sum()) ** 2 / dim)
        return _real_part(state.mat.sum() / dim)

    if isinstance(obs, DenseHermitian):
        if isinstance(state, StateVector):
            return _real_part(np.vdot(state.amps, obs.mat @ state.amps))
        return _real_part(np.sum(obs.mat * state.mat.T))

    raise TypeError(f"unknown generator type {type(obs).__name__}")


def _real_part(value: complex) -> float:
    if abs(value.imag) >= 1e-9:
        raise ValueError(f"expectation has non-negligible imaginary part {value.imag}")
    return float(value.real)
