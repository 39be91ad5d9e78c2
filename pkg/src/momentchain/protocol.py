"""Mapping N time moments of one spin onto 2N-1 spins at a single time.

The instance prepares spin S0 in the test state and each ancilla A_k
maximally entangled with spin S_k; measurements "at tau" act on the spins,
and the run is kept only when every pair (S_{k-1}, A_k) is afterwards found
in the maximally entangled pair state. Conditioned on that post-selection,
measurements on spin S_k reproduce measurements on the original single spin
at moment k of a zero-Hamiltonian evolution, including shared-pointer
difference measurements across two moments.

:func:`single_spin_oracle` is the reference: it realizes the same plan on one
spin at N successive moments with von Neumann pointer couplings, and
:func:`product_state_baseline` is the negative control that evaluates the
plan on N independent copies of the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import ApplyStep, MeasureStep, Readout, assemble, run_exact
from .errors import ConditioningImpossibleError
from .meter import DEFAULT_POINTER_DIM, PointerRegister, coupling_matrix
from .qcore import (
    Operator,
    RegisterLayout,
    StateVector,
    bell_state,
    condition_on,
    eigen_projectors,
    integer_eigen_projectors,
    make_spin_observable,
    tensor,
)
from .stats import OutcomeStats

__all__ = [
    "ProtocolInstance",
    "MeasurementPlan",
    "build_initial_state",
    "post_select_bells",
    "protocol_statistics",
    "single_spin_oracle",
    "product_state_baseline",
    "plan_statistics_on_state",
    "random_plan",
    "equivalence_report",
]


@dataclass(frozen=True, eq=False)
class ProtocolInstance:
    """N moments mapped to spins S0..S(N-1) plus ancillas A1..A(N-1)."""

    n_moments: int
    psi: StateVector

    def __post_init__(self):
        if self.n_moments < 2:
            raise ValueError("need at least two moments")
        if self.psi.layout.dim != 2:
            raise ValueError("the prepared state must be a single qubit")
        if not self.psi.is_normalized():
            raise ValueError("the prepared state must be normalized")

    @property
    def spins(self) -> tuple[str, ...]:
        return tuple(f"S{k}" for k in range(self.n_moments))

    @property
    def ancillas(self) -> tuple[str, ...]:
        return tuple(f"A{k}" for k in range(1, self.n_moments))

    def layout(self) -> RegisterLayout:
        """Interleaved order S0, A1, S1, A2, S2, ... (2N-1 qubits)."""
        regs = [("S0", 2)]
        for k in range(1, self.n_moments):
            regs.append((f"A{k}", 2))
            regs.append((f"S{k}", 2))
        return RegisterLayout(tuple(regs))


@dataclass(frozen=True)
class MeasurementPlan:
    """Single-time measurements (moment, observable) and difference pairs
    (earlier moment, later moment, observable) sharing one pointer each.

    Every moment index may appear at most once across the whole plan, so the
    realization order is unambiguous.
    """

    single_time: tuple = ()
    difference_pairs: tuple = ()

    def __post_init__(self):
        singles = tuple(sorted(((int(k), obs) for k, obs in self.single_time),
                               key=lambda e: e[0]))
        pairs = tuple(sorted(((int(k), int(l), obs) for k, l, obs in self.difference_pairs),
                             key=lambda e: (e[0], e[1])))
        object.__setattr__(self, "single_time", singles)
        object.__setattr__(self, "difference_pairs", pairs)
        used = [k for k, _ in singles]
        for k, l, _ in pairs:
            if not k < l:
                raise ValueError("difference pairs must be (earlier, later)")
            used.extend((k, l))
        if len(set(used)) != len(used):
            raise ValueError("each moment may appear at most once in a plan")
        for obs in [o for _, o in singles] + [o for _, _, o in pairs]:
            if isinstance(obs, Operator) and not obs.is_hermitian():
                raise ValueError("plan observables must be hermitian")

    def used_moments(self) -> tuple[int, ...]:
        used = [k for k, _ in self.single_time]
        for k, l, _ in self.difference_pairs:
            used.extend((k, l))
        return tuple(sorted(used))

    def validate_for(self, n_moments: int) -> None:
        for k in self.used_moments():
            if not 0 <= k < n_moments:
                raise ValueError(f"plan moment {k} outside range 0..{n_moments - 1}")


def _obs_matrix(obs) -> np.ndarray:
    return obs.matrix if isinstance(obs, Operator) else np.asarray(obs, dtype=np.complex128)


def build_initial_state(instance: ProtocolInstance) -> StateVector:
    """|psi> on S0 times one maximally entangled pair state per (A_k, S_k)."""
    parts = [StateVector(RegisterLayout((("S0", 2),)), instance.psi.amplitudes)]
    for k in range(1, instance.n_moments):
        parts.append(bell_state("phi+", (f"A{k}", f"S{k}")))
    return tensor(*parts)


def post_select_bells(
    state: StateVector, instance: ProtocolInstance
) -> tuple[StateVector, float]:
    """Condition every (S_{k-1}, A_k) pair on the pair state and drop it.

    Each successful pair outcome hands the chain's preparation one spin
    further down, so what survives is the final spin carrying |psi| (the
    N = 2 case is plain teleportation). Returns that normalized state and
    the joint success probability of all pair outcomes.
    """
    current = state
    for k in range(1, instance.n_moments):
        pair = (f"S{k-1}", f"A{k}")
        bra = bell_state("phi+", pair)
        current, _ = condition_on(current, pair, bra)
    # condition_on leaves states sub-normalized, so the joint success
    # probability is the squared norm after the last pair
    success = float(np.vdot(current.amplitudes, current.amplitudes).real)
    if success <= 1e-24:
        raise ConditioningImpossibleError("all-pairs post-selection has zero probability")
    assert current.layout.names == (f"S{instance.n_moments - 1}",)
    normalized = StateVector(current.layout, current.amplitudes / math.sqrt(success))
    return normalized, success


def _plan_program(
    base_registers,
    initial: np.ndarray,
    spin_register,
    plan: MeasurementPlan,
    bell_pairs=(),
):
    """Shared lowering of a measurement plan onto an engine program.

    ``spin_register(k)`` names the register that realizes moment k; the sort
    key reuses k itself, which is the genuine time order for the single-spin
    oracle and a harmless ordering of commuting operations when every moment
    has its own register.
    """
    registers = list(base_registers)
    steps = []
    readouts = []
    for i, (k, l, obs) in enumerate(plan.difference_pairs):
        m = _obs_matrix(obs)
        spectrum = integer_eigen_projectors(m)
        max_a = max(abs(a) for a, _ in spectrum)
        d = max(DEFAULT_POINTER_DIM, PointerRegister.required_dimension(2 * max_a))
        ptr = f"_d{i}"
        registers.append((ptr, d))
        initial = np.kron(initial, np.eye(d, dtype=np.complex128)[0])
        obs_op = Operator(RegisterLayout(((spin_register(k), 2),)), m, hermitian=True)
        steps.append(ApplyStep((k, 1), (spin_register(k), ptr), coupling_matrix(obs_op, d, -1)))
        obs_op2 = Operator(RegisterLayout(((spin_register(l), 2),)), m, hermitian=True)
        steps.append(ApplyStep((l, 1), (spin_register(l), ptr), coupling_matrix(obs_op2, d, +1)))
        readouts.append(Readout(f"d{k}-{l}", ptr, (d - 1) // 2))
    for k, obs in plan.single_time:
        branches = tuple(eigen_projectors(_obs_matrix(obs)))
        steps.append(MeasureStep((k, 2), f"s{k}", (spin_register(k),), branches))
    max_moment = max(list(plan.used_moments()) + [0])
    for idx, (pair, bra_amps) in enumerate(bell_pairs):
        proj = np.outer(bra_amps, bra_amps.conj())
        steps.append(ApplyStep((max_moment + 1, 3), pair, proj, conditioning=True))
    layout = RegisterLayout(tuple(registers))
    return assemble(layout, initial, steps, tuple(readouts))


def protocol_statistics(instance: ProtocolInstance, plan: MeasurementPlan) -> OutcomeStats:
    """Joint plan statistics at tau, conditioned on all pair post-selections."""
    plan.validate_for(instance.n_moments)
    init = build_initial_state(instance)
    bells = []
    for k in range(1, instance.n_moments):
        bra = bell_state("phi+", (f"S{k-1}", f"A{k}"))
        bells.append(((f"S{k-1}", f"A{k}"), bra.amplitudes))
    program = _plan_program(
        init.layout.registers, init.amplitudes, lambda k: f"S{k}", plan, bells
    )
    return run_exact(program)


def single_spin_oracle(
    psi: StateVector, plan: MeasurementPlan, n_moments: int
) -> OutcomeStats:
    """Reference statistics: one spin, zero Hamiltonian, measured at moments.

    Single-time entries become projective measurements at their moment;
    difference pairs couple a shared pointer with sign -1 at the earlier
    moment and +1 at the later one, exactly as the meter module does.
    """
    plan.validate_for(n_moments)
    if psi.layout.dim != 2:
        raise ValueError("the oracle works on a single qubit")
    program = _plan_program(
        (("q", 2),), psi.amplitudes, lambda k: "q", plan, ()
    )
    return run_exact(program)


def plan_statistics_on_state(state: StateVector, plan: MeasurementPlan) -> OutcomeStats:
    """Evaluate a plan on explicit per-moment particle registers P0..P(N-1)."""
    program = _plan_program(
        state.layout.registers, state.amplitudes,
        lambda k: state.layout.names[k], plan, ()
    )
    return run_exact(program)


def product_state_baseline(
    psi: StateVector, plan: MeasurementPlan, n_moments: int
) -> OutcomeStats:
    """Negative control: the plan on N independent copies of |psi>."""
    plan.validate_for(n_moments)
    parts = [
        StateVector(RegisterLayout(((f"P{k}", 2),)), psi.amplitudes)
        for k in range(n_moments)
    ]
    return plan_statistics_on_state(tensor(*parts), plan)


# ---------------------------------------------------------------------------
# Randomized equivalence checking


def _haar_qubit(rng: np.random.Generator) -> StateVector:
    z = rng.normal(size=2) + 1j * rng.normal(size=2)
    z /= np.linalg.norm(z)
    return StateVector(RegisterLayout((("q", 2),)), z)


def _random_direction(rng: np.random.Generator) -> Operator:
    theta = math.acos(2 * rng.random() - 1)
    phi = 2 * math.pi * rng.random()
    return make_spin_observable(theta, phi)


def random_plan(rng: np.random.Generator, n_moments: int, force_pair: bool = False) -> MeasurementPlan:
    """Random plan over distinct moments with random spin directions."""
    moments = list(rng.permutation(n_moments))
    singles = []
    pairs = []
    if force_pair or rng.random() < 0.6:
        k, l = sorted((int(moments.pop()), int(moments.pop())))
        pairs.append((k, l, _random_direction(rng)))
    lowest = 0 if pairs else 1
    n_single = int(rng.integers(lowest, len(moments) + 1))
    for _ in range(n_single):
        singles.append((int(moments.pop()), _random_direction(rng)))
    return MeasurementPlan(tuple(singles), tuple(pairs))


def equivalence_report(
    n_moments: int, n_plans: int = 50, seed: int = 0, psi: StateVector | None = None
) -> dict:
    """Compare protocol statistics against the single-spin oracle.

    Returns per-plan total-variation distances plus the post-selection
    success probability measured with an empty plan.
    """
    rng = np.random.default_rng(seed)
    tvs = []
    for i in range(n_plans):
        state = psi if psi is not None else _haar_qubit(rng)
        plan = random_plan(rng, n_moments, force_pair=(i % 2 == 0))
        instance = ProtocolInstance(n_moments, state)
        got = protocol_statistics(instance, plan)
        want = single_spin_oracle(state, plan, n_moments)
        tvs.append(got.total_variation(want))
    instance = ProtocolInstance(n_moments, psi if psi is not None else _haar_qubit(rng))
    empty = protocol_statistics(instance, MeasurementPlan())
    expected_success = 0.25 ** (n_moments - 1)
    return {
        "n_moments": n_moments,
        "n_plans": n_plans,
        "seed": seed,
        "max_total_variation": max(tvs),
        "mean_total_variation": sum(tvs) / len(tvs),
        "success_probability": empty.success_probability,
        "expected_success_probability": expected_success,
        "success_error": abs(empty.success_probability - expected_success),
    }
