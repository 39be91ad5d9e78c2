import math

import numpy as np
import pytest

from momentchain import (
    CouplingEvent,
    HistoryChain,
    Link,
    PointerRegister,
    StateVector,
    WraparoundError,
    apply_coupling,
    difference_variance_sweep,
    ket,
    make_spin_observable,
    named_state,
    partial_kraus_pair,
    partial_measurement,
    partial_trace,
    pauli,
    tensor,
    two_time_difference,
)

from util import qubit_chain, random_direction, random_state

SQ2 = 1 / math.sqrt(2)


def spin_with_pointer(spin: StateVector, d: int = 7) -> StateVector:
    ptr = PointerRegister("ptr", d)
    return tensor(spin, ptr.initial_state())


class TestPointerRegister:
    def test_shift_is_cyclic_unitary(self):
        ptr = PointerRegister("ptr", 7)
        s = ptr.shift_matrix(1)
        assert np.allclose(s @ s.conj().T, np.eye(7))
        assert np.allclose(np.linalg.matrix_power(s, 7), np.eye(7))

    def test_reading_decode(self):
        ptr = PointerRegister("ptr", 7)
        assert [ptr.reading(i) for i in range(7)] == [0, 1, 2, 3, -3, -2, -1]

    def test_dimension_guard(self):
        with pytest.raises(ValueError):
            PointerRegister("ptr", 6)
        with pytest.raises(ValueError):
            PointerRegister("ptr", 3)


class TestApplyCoupling:
    def test_eigenstate_shifts_by_eigenvalue(self):
        joint = spin_with_pointer(named_state("+x"))
        out = apply_coupling(joint, CouplingEvent(0, pauli("x"), +1))
        # |+x>|q=0> -> |+x>|q=+1>  (basis index 1)
        want = tensor(named_state("+x"), ket([0, 1, 0, 0, 0, 0, 0], "ptr"))
        assert np.allclose(out.amplitudes, want.amplitudes, atol=1e-12)

    def test_superposition_splits_pointer(self):
        alpha, beta = 0.6, 0.8
        spin = StateVector(
            named_state("+x").layout,
            alpha * named_state("+x").amplitudes + beta * named_state("-x").amplitudes,
        )
        out = apply_coupling(spin_with_pointer(spin), CouplingEvent(0, pauli("x"), -1))
        minus_one = np.zeros(7)
        minus_one[6] = 1  # q = -1
        plus_one = np.zeros(7)
        plus_one[1] = 1
        want = alpha * np.kron(named_state("+x").amplitudes, minus_one) + beta * np.kron(
            named_state("-x").amplitudes, plus_one
        )
        assert np.allclose(out.amplitudes, want, atol=1e-12)

    def test_opposite_couplings_restore_exactly(self):
        rng = np.random.default_rng(31)
        for _ in range(5):
            spin = random_state(rng, 2)
            obs = make_spin_observable(*random_direction(rng))
            joint = spin_with_pointer(spin)
            stepped = apply_coupling(joint, CouplingEvent(0, obs, -1))
            back = apply_coupling(stepped, CouplingEvent(1, obs, +1))
            assert np.max(np.abs(back.amplitudes - joint.amplitudes)) < 1e-12

    def test_unitary(self):
        rng = np.random.default_rng(32)
        joint = spin_with_pointer(random_state(rng, 2))
        out = apply_coupling(joint, CouplingEvent(0, pauli("y"), +1))
        assert out.norm() == pytest.approx(1.0, abs=1e-12)

    def test_wraparound_rejected_with_required_dimension(self):
        from momentchain import Operator, layout

        wide = Operator(layout("q"), 3 * pauli("z").matrix, hermitian=True)
        joint = spin_with_pointer(named_state("+z"), d=5)
        with pytest.raises(WraparoundError) as err:
            apply_coupling(joint, CouplingEvent(0, wide, +1))
        assert err.value.required_dimension == 7


class TestTwoTimeDifference:
    def test_trivial_evolution_reads_zero_any_direction(self):
        rng = np.random.default_rng(33)
        for _ in range(8):
            psi = random_state(rng, 2)
            obs = make_spin_observable(*random_direction(rng))
            stats = two_time_difference(qubit_chain(psi, 2), obs, 0, 2)
            assert stats.outcomes == {(0,): pytest.approx(1.0, abs=1e-12)}

    def test_no_disturbance_from_difference_meter(self):
        # the meter reads 0 yet the spin is left exactly in psi
        psi = named_state("+z")
        stats, final = two_time_difference(
            qubit_chain(psi, 2), pauli("x"), 0, 2, return_final_state=True
        )
        assert stats.outcomes == {(0,): pytest.approx(1.0, abs=1e-12)}
        rho = partial_trace(final, ["q"])
        fidelity = float(
            np.real(np.vdot(psi.amplitudes, rho @ psi.amplitudes))
        )
        assert fidelity == pytest.approx(1.0, abs=1e-12)

    def test_single_time_coupling_does_disturb(self):
        # contrast case: one x coupling dephases an up spin to fidelity 1/2
        psi = named_state("+z")
        joint = spin_with_pointer(psi)
        out = apply_coupling(joint, CouplingEvent(0, pauli("x"), +1))
        rho = partial_trace(out, ["q"])
        fidelity = float(np.real(np.vdot(psi.amplitudes, rho @ psi.amplitudes)))
        assert fidelity == pytest.approx(0.5, abs=1e-12)

    def test_collapse_between_z_difference(self):
        # full spin (x) pointer state-vector oracle, worked by hand:
        # |+z>|q0> --(-z)--> |+z>|q=-1>; collapse +x keeps amplitude 1/sqrt2;
        # (+z coupling) splits |+x> into |0>|q=0> and |1>|q=-2> equally,
        # so conditioned on the +x outcome the reading is 0 or -2, half each.
        chain = HistoryChain.from_states(
            named_state("+z"), (Link.collapse(named_state("+x"), 0),)
        )
        stats = two_time_difference(chain, pauli("z"), 0, 1)
        assert stats.probability((0,)) == pytest.approx(0.5, abs=1e-12)
        assert stats.probability((-2,)) == pytest.approx(0.5, abs=1e-12)
        assert stats.success_probability == pytest.approx(0.5, abs=1e-12)

    def test_collapse_between_z_difference_unbiased_state(self):
        # same oracle with pre |+x>: the first z value is now uniform, giving
        # the convolution {-2: 1/4, 0: 1/2, +2: 1/4}
        chain = HistoryChain.from_states(
            named_state("+x"), (Link.collapse(named_state("+x"), 0),)
        )
        stats = two_time_difference(chain, pauli("z"), 0, 1)
        assert stats.probability((0,)) == pytest.approx(0.5, abs=1e-12)
        assert stats.probability((2,)) == pytest.approx(0.25, abs=1e-12)
        assert stats.probability((-2,)) == pytest.approx(0.25, abs=1e-12)

    def test_collapse_commutes_with_x_difference(self):
        chain = HistoryChain.from_states(
            named_state("+z"), (Link.collapse(named_state("+x"), 0),)
        )
        stats = two_time_difference(chain, pauli("x"), 0, 1)
        assert stats.outcomes == {(0,): pytest.approx(1.0, abs=1e-12)}

    def test_post_selected_chain(self):
        chain = qubit_chain(named_state("+z"), 2, post=named_state("+z"))
        stats = two_time_difference(chain, pauli("z"), 0, 2)
        assert stats.outcomes == {(0,): pytest.approx(1.0, abs=1e-12)}

    def test_time_validation(self):
        with pytest.raises(ValueError):
            two_time_difference(qubit_chain(named_state("+z"), 1), pauli("z"), 1, 0)

    def test_small_pointer_rejected(self):
        with pytest.raises(WraparoundError):
            two_time_difference(
                qubit_chain(named_state("+z"), 1), pauli("z"), 0, 1, pointer_dim=3
            )


class TestPartialMeasurement:
    def test_strong_limit_on_eigenstate(self):
        out, state, prob = partial_measurement(named_state("+x"), "q", "x", 1.0, 0.0)
        assert out == 1
        assert prob == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(state.amplitudes, named_state("+x").amplitudes, atol=1e-12)

    def test_no_information_limit(self):
        rng = np.random.default_rng(34)
        psi = random_state(rng, 2)
        for outcome in (+1, -1):
            got, state, prob = partial_measurement(psi, "q", "x", SQ2, SQ2, outcome)
            assert got == outcome
            assert prob == pytest.approx(0.5, abs=1e-12)
            overlap = abs(np.vdot(state.amplitudes, psi.amplitudes))
            assert overlap == pytest.approx(1.0, abs=1e-12)

    def test_partial_kraus_oracle(self):
        # direct Kraus oracle: K+|+z> = (0.8|+x> + 0.6|-x>)/sqrt(2)
        out, state, prob = partial_measurement(named_state("+z"), "q", "x", 0.8, 0.6)
        assert out == 1
        assert prob == pytest.approx(0.5, abs=1e-12)
        want = 0.8 * named_state("+x").amplitudes + 0.6 * named_state("-x").amplitudes
        assert np.allclose(state.amplitudes, want, atol=1e-12)

    def test_outcome_probabilities_sum_to_one(self):
        rng = np.random.default_rng(35)
        psi = random_state(rng, 2)
        _, _, p_plus = partial_measurement(psi, "q", "z", 0.8, 0.6, +1)
        _, _, p_minus = partial_measurement(psi, "q", "z", 0.8, 0.6, -1)
        assert p_plus + p_minus == pytest.approx(1.0, abs=1e-12)

    def test_kraus_pair_resolves_identity(self):
        for alpha in (1.0, 0.9, SQ2):
            beta = math.sqrt(1 - alpha**2)
            kp, km = partial_kraus_pair(alpha, beta, "x")
            total = kp.conj().T @ kp + km.conj().T @ km
            assert np.max(np.abs(total - np.eye(2))) < 1e-12

    def test_unread_channel_preserves_diagonal_and_trace(self):
        rng = np.random.default_rng(36)
        psi = random_state(rng, 2)
        rho = np.outer(psi.amplitudes, psi.amplitudes.conj())
        kp, km = partial_kraus_pair(0.8, 0.6, "x")
        rho_out = kp @ rho @ kp.conj().T + km @ rho @ km.conj().T
        assert np.trace(rho_out) == pytest.approx(1.0, abs=1e-12)
        plus = named_state("+x").amplitudes
        p_before = float(np.real(np.vdot(plus, rho @ plus)))
        p_after = float(np.real(np.vdot(plus, rho_out @ plus)))
        assert p_after == pytest.approx(p_before, abs=1e-12)

    def test_no_information_channel_is_identity(self):
        rng = np.random.default_rng(37)
        psi = random_state(rng, 2)
        rho = np.outer(psi.amplitudes, psi.amplitudes.conj())
        kp, km = partial_kraus_pair(SQ2, SQ2, "x")
        rho_out = kp @ rho @ kp.conj().T + km @ rho @ km.conj().T
        assert np.max(np.abs(rho_out - rho)) < 1e-12

    def test_rejects_unnormalized_strengths(self):
        with pytest.raises(ValueError, match="alpha"):
            partial_measurement(named_state("+z"), "q", "x", 0.9, 0.6)


class TestVarianceSweep:
    def test_zero_variance_at_balanced_strength(self):
        [(_, var)] = difference_variance_sweep([SQ2])
        assert var == pytest.approx(0.0, abs=1e-12)

    def test_monotone_on_grid(self):
        alphas = [0.71, 0.75, 0.79, 0.83, 0.87, 0.91, 0.95, 0.99, 1.0]
        sweep = difference_variance_sweep(alphas)
        variances = [v for _, v in sweep]
        assert all(b >= a - 1e-12 for a, b in zip(variances, variances[1:]))
        assert variances[-1] > variances[0]

    def test_matches_closed_form(self):
        # hand-derived: with pre |+z>, basis x, observable z, outcome +1,
        # P(0) = (a+b)^2/2 and P(-2) = (a-b)^2/2, so var = u(2-u), u = (a-b)^2
        for alpha in (0.75, 0.9, 1.0):
            beta = math.sqrt(1 - alpha**2)
            [(_, var)] = difference_variance_sweep([alpha])
            u = (alpha - beta) ** 2
            assert var == pytest.approx(u * (2 - u), abs=1e-10)

    def test_full_strength_partial_equals_collapse_link(self):
        kp, _ = partial_kraus_pair(1.0, 0.0, "x")
        partial_chain = HistoryChain.from_states(named_state("+z"), (Link.partial(kp, 0),))
        collapse_chain = HistoryChain.from_states(
            named_state("+z"), (Link.collapse(named_state("+x"), 0),)
        )
        a = two_time_difference(partial_chain, pauli("z"), 0, 1)
        b = two_time_difference(collapse_chain, pauli("z"), 0, 1)
        assert a.total_variation(b) < 1e-12

    def test_balanced_partial_equals_identity_link(self):
        kp, _ = partial_kraus_pair(SQ2, SQ2, "x")
        # rescaled by sqrt(2), the balanced outcome map is the unit operator
        assert np.max(np.abs(math.sqrt(2) * kp - np.eye(2))) < 1e-12
        partial_chain = HistoryChain.from_states(named_state("+z"), (Link.partial(kp, 0),))
        identity_chain = qubit_chain(named_state("+z"), 1)
        a = two_time_difference(partial_chain, pauli("z"), 0, 1)
        b = two_time_difference(identity_chain, pauli("z"), 0, 1)
        assert a.total_variation(b) < 1e-12
