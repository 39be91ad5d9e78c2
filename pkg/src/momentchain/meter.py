"""Von Neumann measuring devices with finite cyclic pointer registers.

An impulsive coupling to an integer-spectrum observable shifts the pointer by
exactly the observed eigenvalue, so a finite cyclic register reproduces the
continuum pointer predictions as long as the total reachable shift stays
inside the register's signed window. Operations compute the minimal safe
dimension for the declared spectrum and refuse couplings that could wrap.

A two-time difference meter couples the same pointer with sign -1 at the
first moment and +1 at the second, so its final reading reveals only the
difference of the observable's values, never the values separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import ApplyStep, Readout, assemble, final_state, run_exact
from .errors import WraparoundError
from .history import HistoryChain, Link
from .qcore import (
    Operator,
    RegisterLayout,
    StateVector,
    apply_operator,
    condition_on,
    integer_eigen_projectors,
    layout as make_layout,
    named_state,
    pauli,
)

__all__ = [
    "PointerRegister",
    "CouplingEvent",
    "coupling_matrix",
    "apply_coupling",
    "two_time_difference",
    "partial_measurement",
    "partial_kraus_pair",
    "difference_variance_sweep",
]

DEFAULT_POINTER_DIM = 7


@dataclass(frozen=True)
class PointerRegister:
    """Cyclic position register; basis index i encodes the signed position
    i (for i <= half) or i - dimension (for i > half), starting at |q=0>."""

    name: str = "ptr"
    dimension: int = DEFAULT_POINTER_DIM

    def __post_init__(self):
        if self.dimension < 5 or self.dimension % 2 == 0:
            raise ValueError("pointer dimension must be an odd integer >= 5")

    @property
    def half(self) -> int:
        return (self.dimension - 1) // 2

    def shift_matrix(self, power: int = 1) -> np.ndarray:
        """S^power with S|q> = |q+1 mod d>."""
        return np.roll(np.eye(self.dimension), power, axis=0)

    def initial_state(self) -> StateVector:
        amps = np.zeros(self.dimension, dtype=np.complex128)
        amps[0] = 1.0
        return StateVector(make_layout((self.name, self.dimension)), amps)

    def reading(self, index: int) -> int:
        return index if index <= self.half else index - self.dimension

    @staticmethod
    def required_dimension(max_total_shift: int) -> int:
        return 2 * max_total_shift + 1


@dataclass(frozen=True, eq=False)
class CouplingEvent:
    """Impulsive coupling of an integer-spectrum observable to a pointer."""

    time: int
    observable: Operator
    sign: int = 1
    pointer: str = "ptr"

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError("coupling sign must be +1 or -1")
        if not self.observable.is_hermitian():
            raise ValueError("coupled observable must be hermitian")


def coupling_matrix(observable: Operator, pointer_dim: int, sign: int) -> np.ndarray:
    """Controlled shift sum_a P_a (x) S^(sign*a) over (observable regs, pointer)."""
    spectrum = integer_eigen_projectors(observable)
    max_a = max(abs(a) for a, _ in spectrum)
    half = (pointer_dim - 1) // 2
    if max_a > half:
        raise WraparoundError(pointer_dim, PointerRegister.required_dimension(max_a))
    shift = np.roll(np.eye(pointer_dim), 1, axis=0)
    total = np.zeros((observable.dim * pointer_dim,) * 2, dtype=np.complex128)
    for a, proj in spectrum:
        total += np.kron(proj, np.linalg.matrix_power(shift, (sign * a) % pointer_dim))
    return total


def apply_coupling(joint: StateVector, event: CouplingEvent) -> StateVector:
    """Apply one impulsive coupling to a joint system (x) pointer state."""
    d_ptr = joint.layout.dim_of(event.pointer)
    m = coupling_matrix(event.observable, d_ptr, event.sign)
    targets = event.observable.layout.names + (event.pointer,)
    lay = RegisterLayout(
        tuple((n, joint.layout.dim_of(n)) for n in targets)
    )
    return apply_operator(joint, Operator(lay, m, unitary=True), targets)


def _difference_program(chain: HistoryChain, observable, t1: int, t2: int,
                        pointer_dim: int | None):
    if isinstance(observable, Operator):
        obs = observable
    else:
        obs = Operator(chain.system, np.asarray(observable), hermitian=True)
    spectrum = integer_eigen_projectors(obs)
    max_a = max(abs(a) for a, _ in spectrum)
    d_min = PointerRegister.required_dimension(2 * max_a)
    d = max(DEFAULT_POINTER_DIM, d_min) if pointer_dim is None else int(pointer_dim)
    if d < d_min:
        raise WraparoundError(d, d_min)
    moments = chain.moments
    if t1 not in moments or t2 not in moments or not t1 < t2:
        raise ValueError(f"need chain moments t1 < t2; have {moments}")

    ptr = "_ptr"
    while ptr in chain.system.names:
        ptr += "_"
    lay = RegisterLayout(chain.system.registers + ((ptr, d),))
    initial = np.kron(chain.pre.amplitudes, np.eye(d, dtype=np.complex128)[0])

    steps = []
    for ln in chain.links:
        if ln.kind == "identity":
            continue
        steps.append(ApplyStep((ln.t_to, 0), chain.system.names, ln.matrix,
                               conditioning=ln.is_conditioning))
    for t, sign in ((t1, -1), (t2, +1)):
        steps.append(
            ApplyStep((t, 1), obs.layout.names + (ptr,), coupling_matrix(obs, d, sign))
        )
    if chain.post is not None:
        proj = np.outer(chain.post.amplitudes, chain.post.amplitudes.conj())
        steps.append(ApplyStep((chain.last_time, 3), chain.system.names, proj,
                               conditioning=True))
    label = f"diff@{t2}-@{t1}"
    readout = Readout(label, ptr, (d - 1) // 2)
    return assemble(lay, initial, steps, (readout,))


def two_time_difference(
    chain: HistoryChain,
    observable,
    t1: int,
    t2: int,
    pointer_dim: int | None = None,
    return_final_state: bool = False,
):
    """Exact distribution of the pointer reading for the (t2 - t1) difference.

    The reading equals value(t2) - value(t1) of the observable along the
    chain, conditioned on any collapse/partial link outcomes and the post
    boundary when present. With ``return_final_state`` the normalized final
    joint (system (x) pointer) state is returned alongside the distribution.
    """
    program = _difference_program(chain, observable, t1, t2, pointer_dim)
    stats = run_exact(program)
    if not return_final_state:
        return stats
    return stats, final_state(program)


# ---------------------------------------------------------------------------
# Partial (weak-strength) measurement


def _basis_pair(basis, name: str) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(basis, str):
        plus = named_state(f"+{basis}", name)
        minus = named_state(f"-{basis}", name)
    else:
        plus, minus = basis
    p, m = np.asarray(plus.amplitudes), np.asarray(minus.amplitudes)
    if abs(np.vdot(p, m)) > 1e-9:
        raise ValueError("partial-measurement basis states must be orthogonal")
    return p, m


def partial_kraus_pair(alpha: float, beta: float, basis, name: str = "q"):
    """Outcome maps (K_+, K_-) = (a P_+ + b P_-, b P_+ + a P_-)."""
    p, m = _basis_pair(basis, name)
    pp, pm = np.outer(p, p.conj()), np.outer(m, m.conj())
    return alpha * pp + beta * pm, beta * pp + alpha * pm


def _complete_to_unitary(col: np.ndarray) -> np.ndarray:
    """Unitary whose first column is ``col`` (Gram-Schmidt completion)."""
    d = col.size
    q, _ = np.linalg.qr(np.column_stack([col, np.eye(d)]))
    q = q[:, :d]
    phase = np.vdot(q[:, 0], col)
    if phase != 0:
        q[:, 0] = q[:, 0] * (phase / abs(phase))
    # make sure column 0 is exactly the requested one
    q[:, 0] = col
    return q


def _meter_unitary(alpha: float, beta: float, p: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Joint (system, 3-level meter) unitary with meter basis order (0, +1, -1).

    Sends |phi+>|0> to |phi+>(a|+1> + b|-1>) and |phi->|0> to
    |phi->(a|-1> + b|+1>); the completion on meter inputs |+1>, |-1| is
    arbitrary and never populated.
    """
    u = np.zeros((6, 6), dtype=np.complex128)
    for spin_vec, meter_col in (
        (p, np.array([0.0, alpha, beta], dtype=np.complex128)),
        (m, np.array([0.0, beta, alpha], dtype=np.complex128)),
    ):
        u += np.kron(np.outer(spin_vec, spin_vec.conj()), _complete_to_unitary(meter_col))
    return u


def partial_measurement(
    joint: StateVector,
    system: str,
    basis,
    alpha: float,
    beta: float,
    outcome: int = +1,
) -> tuple[int, StateVector, float]:
    """Partial measurement of a qubit register at strength (alpha, beta).

    Couples a fresh 3-level meter (states 0, +1, -1) to the named register
    through the minimal-disturbance unitary, reads the meter projectively,
    and conditions on the requested reading. Returns the outcome, the
    normalized conditioned state on the original layout, and the outcome's
    probability. alpha = correct-answer amplitude; alpha = beta gives no
    information and no disturbance, beta = 0 a full collapse.
    """
    if abs(alpha**2 + beta**2 - 1.0) > 1e-12:
        raise ValueError("alpha^2 + beta^2 must equal 1")
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    if outcome not in (+1, -1):
        raise ValueError("outcome must be +1 or -1")
    if joint.layout.dim_of(system) != 2:
        raise ValueError("partial measurement is defined for qubit registers")
    p, m = _basis_pair(basis, system)

    meter = "_meter"
    while meter in joint.layout.names:
        meter += "_"
    meter_zero = np.zeros(3, dtype=np.complex128)
    meter_zero[0] = 1.0
    big = StateVector(
        joint.layout.merge(RegisterLayout(((meter, 3),))),
        np.kron(joint.amplitudes, meter_zero),
    )
    u = _meter_unitary(alpha, beta, p, m)
    lay = RegisterLayout(((system, 2), (meter, 3)))
    big = apply_operator(big, Operator(lay, u, unitary=True), (system, meter))

    meter_index = 1 if outcome == +1 else 2
    bra_amps = np.zeros(3, dtype=np.complex128)
    bra_amps[meter_index] = 1.0
    bra = StateVector(RegisterLayout(((meter, 3),)), bra_amps)
    conditioned, prob = condition_on(big, meter, bra)
    if prob <= 0.0:
        raise ValueError(f"outcome {outcome:+d} has zero probability")
    # conditioned keeps the original register order minus the meter
    result = StateVector(joint.layout, conditioned.amplitudes / math.sqrt(prob))
    return outcome, result, prob


def difference_variance_sweep(
    alphas,
    psi: StateVector | None = None,
    observable: Operator | None = None,
    basis: str = "x",
) -> list[tuple[float, float]]:
    """Variance of a two-time difference reading across partial-link strengths.

    For each alpha, a chain pre-selected in ``psi`` crosses one partial link
    (outcome +1 map at strength alpha in the given basis) between the two
    metered moments. alpha = beta leaves the correlation complete (variance
    0); alpha -> 1 approaches a full collapse.
    """
    psi = psi if psi is not None else named_state("+z")
    obs = observable if observable is not None else pauli("z", psi.layout.names[0])
    name = psi.layout.names[0]
    out = []
    for alpha in alphas:
        beta = math.sqrt(max(0.0, 1.0 - alpha * alpha))
        k_plus, _ = partial_kraus_pair(alpha, beta, basis, name)
        chain = HistoryChain.from_states(psi, (Link.partial(k_plus, 0),))
        stats = two_time_difference(chain, obs, 0, 1)
        out.append((float(alpha), stats.variance()))
    return out
