"""Dense complex linear algebra over small named-register systems.

States and operators are immutable: amplitude and matrix arrays are copied on
construction and flagged read-only, so every value is safe to share across
threads. Register index 0 is the slowest-varying tensor factor (row-major
Kronecker convention), and global phases are never stripped automatically;
comparisons up to phase go through :func:`equal_up_to_global_phase`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from . import config
from ._kernels import apply_matrix, marginal_probabilities
from .errors import DimensionCapError, RegisterNameError

__all__ = [
    "RegisterLayout",
    "StateVector",
    "Operator",
    "layout",
    "ket",
    "basis_state",
    "named_state",
    "identity",
    "pauli",
    "make_spin_observable",
    "rotation",
    "hadamard",
    "projector_onto",
    "tensor",
    "apply_operator",
    "project",
    "condition_on",
    "partial_trace",
    "bell_basis",
    "bell_state",
    "singlet",
    "eigen_projectors",
    "integer_eigen_projectors",
    "equal_up_to_global_phase",
]

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_PAULI = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}

_SQ2 = 1.0 / math.sqrt(2.0)
_NAMED_KETS = {
    "+z": (1.0, 0.0),
    "-z": (0.0, 1.0),
    "+x": (_SQ2, _SQ2),
    "-x": (_SQ2, -_SQ2),
    "+y": (_SQ2, _SQ2 * 1j),
    "-y": (_SQ2, -_SQ2 * 1j),
}


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered named registers; register 0 is the slowest-varying factor."""

    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        regs = tuple((str(n), int(d)) for n, d in self.registers)
        object.__setattr__(self, "registers", regs)
        names = [n for n, _ in regs]
        if len(set(names)) != len(names):
            raise RegisterNameError(f"duplicate register names in {names}")
        if not regs:
            raise ValueError("layout needs at least one register")
        for n, d in regs:
            if d < 2:
                raise ValueError(f"register {n!r} has dimension {d} < 2")
        total = math.prod(d for _, d in regs)
        if total > config.DIMENSION_CAP:
            raise DimensionCapError(total, config.DIMENSION_CAP)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.registers)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def axis(self, name: str) -> int:
        for i, (n, _) in enumerate(self.registers):
            if n == name:
                return i
        raise RegisterNameError(f"unknown register {name!r}")

    def dim_of(self, name: str) -> int:
        return self.registers[self.axis(name)][1]

    def axes(self, names: Sequence[str]) -> tuple[int, ...]:
        return tuple(self.axis(n) for n in names)

    def merge(self, other: "RegisterLayout") -> "RegisterLayout":
        clash = set(self.names) & set(other.names)
        if clash:
            raise RegisterNameError(f"register name collision: {sorted(clash)}")
        return RegisterLayout(self.registers + other.registers)


def layout(*registers) -> RegisterLayout:
    """Build a layout from names (qubits) and/or ``(name, dim)`` pairs."""
    regs = []
    for r in registers:
        if isinstance(r, str):
            regs.append((r, 2))
        else:
            name, dim = r
            regs.append((name, int(dim)))
    return RegisterLayout(tuple(regs))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes over a register layout; immutable after creation."""

    layout: RegisterLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _readonly(np.asarray(self.amplitudes).reshape(-1))
        if amps.size != self.layout.dim:
            raise ValueError(
                f"amplitude count {amps.size} != layout dimension {self.layout.dim}"
            )
        if not np.all(np.isfinite(amps.view(np.float64))):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.layout.dim

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float | None = None) -> bool:
        tol = config.NORM_TOL if tol is None else tol
        return abs(self.norm() - 1.0) <= tol

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.layout, self.amplitudes / n)

    def inner(self, other: "StateVector") -> complex:
        """<self|other>; layouts must match exactly."""
        if self.layout != other.layout:
            raise ValueError("layout mismatch in inner product")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def probability_of(self, other: "StateVector") -> float:
        return abs(self.inner(other)) ** 2

    def permuted(self, names: Sequence[str]) -> "StateVector":
        """Same state with registers reordered to the given name order."""
        if sorted(names) != sorted(self.layout.names):
            raise RegisterNameError("permutation must mention every register once")
        axes = self.layout.axes(names)
        amps = self.amplitudes.reshape(self.layout.dims).transpose(axes).reshape(-1)
        new_layout = RegisterLayout(tuple(self.layout.registers[a] for a in axes))
        return StateVector(new_layout, amps)

    def __repr__(self):
        return f"StateVector({self.layout.names}, dim={self.dim})"


@dataclass(frozen=True, eq=False)
class Operator:
    """Square matrix over a register layout (row-major over register digits).

    Structural flags are promises validated at construction time against the
    configured tolerances; the ``is_*`` methods recompute them on demand.
    """

    layout: RegisterLayout
    matrix: np.ndarray
    unitary: bool = field(default=False)
    hermitian: bool = field(default=False)
    projector: bool = field(default=False)

    def __post_init__(self):
        m = _readonly(np.asarray(self.matrix))
        d = self.layout.dim
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} != ({d}, {d})")
        if not np.all(np.isfinite(m.view(np.float64))):
            raise ValueError("matrix entries must be finite")
        object.__setattr__(self, "matrix", m)
        tol = config.STRUCTURAL_TOL
        if self.unitary and not self.is_unitary(tol):
            raise ValueError("matrix is not unitary within tolerance")
        if self.hermitian and not self.is_hermitian(tol):
            raise ValueError("matrix is not hermitian within tolerance")
        if self.projector and not self.is_projector(tol):
            raise ValueError("matrix is not a projector within tolerance")

    @property
    def dim(self) -> int:
        return self.layout.dim

    def is_unitary(self, tol: float | None = None) -> bool:
        tol = config.STRUCTURAL_TOL if tol is None else tol
        m = self.matrix
        return bool(np.max(np.abs(m.conj().T @ m - np.eye(self.dim))) <= tol)

    def is_hermitian(self, tol: float | None = None) -> bool:
        tol = config.STRUCTURAL_TOL if tol is None else tol
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)

    def is_projector(self, tol: float | None = None) -> bool:
        tol = config.STRUCTURAL_TOL if tol is None else tol
        m = self.matrix
        return self.is_hermitian(tol) and bool(np.max(np.abs(m @ m - m)) <= tol)

    def dagger(self) -> "Operator":
        return Operator(self.layout, self.matrix.conj().T)

    def renamed(self, *names: str) -> "Operator":
        if len(names) != len(self.layout.registers):
            raise RegisterNameError("need one name per register")
        regs = tuple((n, d) for n, (_, d) in zip(names, self.layout.registers))
        return Operator(
            RegisterLayout(regs), self.matrix,
            unitary=self.unitary, hermitian=self.hermitian, projector=self.projector,
        )

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.layout != other.layout:
            raise ValueError("layout mismatch in operator product")
        return Operator(self.layout, self.matrix @ other.matrix)

    def __repr__(self):
        return f"Operator({self.layout.names}, dim={self.dim})"


# ---------------------------------------------------------------------------
# Constructors


def ket(amplitudes: Iterable[complex], name: str = "q") -> StateVector:
    amps = np.asarray(list(amplitudes), dtype=np.complex128)
    return StateVector(layout((name, amps.size)), amps)


def basis_state(lay: RegisterLayout, digits) -> StateVector:
    """Computational basis state; digits given per register (dict or sequence)."""
    if isinstance(digits, dict):
        digits = [digits.get(n, 0) for n in lay.names]
    digits = list(digits)
    idx = 0
    for d, (name, dim) in zip(digits, lay.registers):
        if not 0 <= d < dim:
            raise ValueError(f"digit {d} out of range for register {name!r}")
        idx = idx * dim + d
    amps = np.zeros(lay.dim, dtype=np.complex128)
    amps[idx] = 1.0
    return StateVector(lay, amps)


def named_state(tag: str, name: str = "q") -> StateVector:
    """Qubit eigenstates '+x', '-x', '+y', '-y', '+z', '-z'."""
    if tag not in _NAMED_KETS:
        raise ValueError(f"unknown named state {tag!r}")
    return ket(_NAMED_KETS[tag], name=name)


def identity(lay: RegisterLayout) -> Operator:
    return Operator(lay, np.eye(lay.dim), unitary=True, hermitian=True, projector=True)


def pauli(axis: str, name: str = "q") -> Operator:
    if axis not in _PAULI:
        raise ValueError(f"unknown Pauli axis {axis!r}")
    return Operator(layout(name), _PAULI[axis], unitary=True, hermitian=True)


def make_spin_observable(theta: float, phi: float, name: str = "q") -> Operator:
    """Spin component along the (theta, phi) direction; eigenvalues are +/-1."""
    m = (
        math.sin(theta) * math.cos(phi) * PAULI_X
        + math.sin(theta) * math.sin(phi) * PAULI_Y
        + math.cos(theta) * PAULI_Z
    )
    return Operator(layout(name), m, unitary=True, hermitian=True)


def rotation(axis: str, angle: float, name: str = "q") -> Operator:
    """Qubit rotation exp(-i * angle/2 * sigma_axis)."""
    if axis not in _PAULI:
        raise ValueError(f"unknown rotation axis {axis!r}")
    m = math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * _PAULI[axis]
    return Operator(layout(name), m, unitary=True)


def hadamard(name: str = "q") -> Operator:
    m = np.array([[1, 1], [1, -1]], dtype=np.complex128) * _SQ2
    return Operator(layout(name), m, unitary=True, hermitian=True)


def projector_onto(state: StateVector) -> Operator:
    amps = state.amplitudes
    n2 = float(np.vdot(amps, amps).real)
    if abs(n2 - 1.0) > config.NORM_TOL * 10:
        raise ValueError("projector target must be normalized")
    return Operator(state.layout, np.outer(amps, amps.conj()), hermitian=True, projector=True)


# ---------------------------------------------------------------------------
# Combinators


def tensor(*objs):
    """Kronecker product of states or of operators, in argument order.

    Register names must be disjoint across the arguments.
    """
    if not objs:
        raise ValueError("tensor() needs at least one argument")
    if all(isinstance(o, StateVector) for o in objs):
        lay = reduce(lambda a, b: a.merge(b), (o.layout for o in objs))
        amps = reduce(np.kron, (o.amplitudes for o in objs))
        return StateVector(lay, amps)
    if all(isinstance(o, Operator) for o in objs):
        lay = reduce(lambda a, b: a.merge(b), (o.layout for o in objs))
        m = reduce(np.kron, (o.matrix for o in objs))
        return Operator(
            lay, m,
            unitary=all(o.unitary for o in objs),
            hermitian=all(o.hermitian for o in objs),
            projector=all(o.projector for o in objs),
        )
    raise TypeError("tensor() arguments must be all states or all operators")


def apply_operator(
    state: StateVector, op: Operator, targets: Sequence[str] | None = None
) -> StateVector:
    """Apply an operator to the named target registers (default: name match)."""
    names = tuple(targets) if targets is not None else op.layout.names
    axes = state.layout.axes(names)
    dims = state.layout.dims
    for ax, (_, d) in zip(axes, op.layout.registers):
        if dims[ax] != d:
            raise ValueError("operator register dimensions do not match targets")
    amps = apply_matrix(state.amplitudes, op.matrix, dims, axes)
    return StateVector(state.layout, amps)


def project(
    state: StateVector, registers: str | Sequence[str], outcome_projector: Operator
) -> tuple[StateVector, float]:
    """Apply a projector to the named registers.

    Returns the sub-normalized state P|s> and its squared norm (the Born
    probability of the outcome).
    """
    if isinstance(registers, str):
        registers = (registers,)
    if not (outcome_projector.projector or outcome_projector.is_projector()):
        raise ValueError("operator is not a projector")
    projected = apply_operator(state, outcome_projector, registers)
    prob = float(np.vdot(projected.amplitudes, projected.amplitudes).real)
    return projected, min(max(prob, 0.0), 1.0 + 1e-9)


def condition_on(
    state: StateVector, registers: str | Sequence[str], bra: StateVector
) -> tuple[StateVector, float]:
    """Contract <bra| onto the named registers and drop them.

    Returns the remaining-register state (sub-normalized) and the probability
    of the conditioning outcome. At least one register must remain.
    """
    if isinstance(registers, str):
        registers = (registers,)
    registers = tuple(registers)
    rest = tuple(n for n in state.layout.names if n not in registers)
    if not rest:
        raise ValueError("conditioning would consume every register; use inner()")
    if tuple(bra.layout.dims) != tuple(state.layout.dim_of(n) for n in registers):
        raise ValueError("bra dimensions do not match the conditioned registers")
    axes = state.layout.axes(registers)
    rest_axes = state.layout.axes(rest)
    arr = state.amplitudes.reshape(state.layout.dims).transpose(axes + rest_axes)
    arr = arr.reshape(bra.dim, -1)
    vec = bra.amplitudes.conj() @ arr
    prob = float(np.vdot(vec, vec).real)
    rest_layout = RegisterLayout(tuple(state.layout.registers[a] for a in rest_axes))
    return StateVector(rest_layout, vec), prob


def partial_trace(state: StateVector, keep: Sequence[str]) -> np.ndarray:
    """Reduced density matrix over the kept registers (in the order given)."""
    keep = tuple(keep)
    axes = state.layout.axes(keep)
    rest = tuple(i for i in range(len(state.layout.dims)) if i not in axes)
    arr = state.amplitudes.reshape(state.layout.dims).transpose(axes + rest)
    dk = math.prod(state.layout.dims[a] for a in axes)
    arr = arr.reshape(dk, -1)
    return arr @ arr.conj().T


def register_probabilities(state: StateVector, registers: Sequence[str]) -> np.ndarray:
    """Born probabilities of joint computational outcomes on the registers."""
    axes = state.layout.axes(tuple(registers))
    return marginal_probabilities(state.amplitudes, state.layout.dims, axes)


# ---------------------------------------------------------------------------
# Standard two-qubit constructions


def bell_state(which: str, names: tuple[str, str] = ("a", "b")) -> StateVector:
    """One of 'phi+', 'phi-', 'psi+', 'psi-' on two qubits."""
    table = {
        "phi+": (_SQ2, 0, 0, _SQ2),
        "phi-": (_SQ2, 0, 0, -_SQ2),
        "psi+": (0, _SQ2, _SQ2, 0),
        "psi-": (0, _SQ2, -_SQ2, 0),
    }
    if which not in table:
        raise ValueError(f"unknown Bell state {which!r}")
    return StateVector(layout(names[0], names[1]), np.array(table[which]))


def bell_basis(names: tuple[str, str] = ("a", "b")) -> list[StateVector]:
    """The orthonormal basis [phi+, phi-, psi+, psi-] on two qubits."""
    return [bell_state(w, names) for w in ("phi+", "phi-", "psi+", "psi-")]


def singlet(names: tuple[str, str] = ("a", "b")) -> StateVector:
    """(|+x,-x> - |-x,+x>)/sqrt(2); anti-correlated along every axis."""
    up = np.array(_NAMED_KETS["+x"])
    down = np.array(_NAMED_KETS["-x"])
    amps = _SQ2 * (np.kron(up, down) - np.kron(down, up))
    return StateVector(layout(names[0], names[1]), amps)


# ---------------------------------------------------------------------------
# Spectral helpers


def eigen_projectors(
    op: Operator | np.ndarray, group_tol: float = 1e-10
) -> list[tuple[float, np.ndarray]]:
    """Distinct eigenvalues (descending) with their eigenprojectors.

    Eigenvalues closer than ``group_tol`` are merged into one projector, so
    outcome labeling is deterministic.
    """
    m = op.matrix if isinstance(op, Operator) else np.asarray(op)
    vals, vecs = np.linalg.eigh(m)
    order = np.argsort(-vals)
    vals, vecs = vals[order], vecs[:, order]
    out: list[tuple[float, np.ndarray]] = []
    i = 0
    while i < len(vals):
        j = i
        while j + 1 < len(vals) and abs(vals[j + 1] - vals[i]) <= group_tol:
            j += 1
        block = vecs[:, i : j + 1]
        out.append((float(np.mean(vals[i : j + 1])), block @ block.conj().T))
        i = j + 1
    return out


def integer_eigen_projectors(
    op: Operator | np.ndarray, tol: float = 1e-9
) -> list[tuple[int, np.ndarray]]:
    """Eigenprojectors for an observable promised to have integer spectrum."""
    out = []
    for val, proj in eigen_projectors(op):
        r = round(val)
        if abs(val - r) > tol:
            raise ValueError(f"eigenvalue {val} is not an integer within {tol}")
        out.append((int(r), proj))
    return out


def equal_up_to_global_phase(a: StateVector, b: StateVector, tol: float = 1e-10) -> bool:
    if a.layout != b.layout:
        return False
    ov = np.vdot(a.amplitudes, b.amplitudes)
    return abs(abs(ov) - a.norm() * b.norm()) <= tol and a.norm() > 0
