"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
complete. Criterion 8 draws 10^5 Monte Carlo samples per built-in scenario,
so this module dominates the suite's runtime.
"""

import math
from pathlib import Path

import numpy as np
import pytest

from momentchain import (
    HistoryChain,
    Link,
    MeasurementPlan,
    ProtocolInstance,
    contract,
    decompose_collapse,
    difference_variance_sweep,
    equivalence_report,
    make_spin_observable,
    named_state,
    partial_kraus_pair,
    partial_trace,
    pauli,
    product_state_baseline,
    protocol_statistics,
    singlet,
    two_time_difference,
)
from momentchain.experiments import builtin_scenarios, epr_single_time_scenario, run_epr
from momentchain.scenario import parse_scenario, render_scenario, run_scenario
from momentchain.stats import report

from util import haar_unitary, qubit_chain, random_direction, random_state

FIXTURES = Path(__file__).parent / "fixtures"
SQ2 = 1 / math.sqrt(2)


def _report(number: int, ok: bool, detail: str):
    print(f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def test_criterion_1_contraction_correctness():
    rng = np.random.default_rng(1001)
    worst = 0.0
    for i in range(100):
        d = 2 if i < 50 else 3
        n = int(rng.integers(1, 7))
        mats = [haar_unitary(rng, d) for _ in range(n)]
        pre, post = random_state(rng, d), random_state(rng, d)
        chain = HistoryChain.from_states(
            pre, tuple(Link.unitary(m, t) for t, m in enumerate(mats)), post=post
        )
        # independent oracle: full matrix product, then the sandwich
        total = np.eye(d)
        for m in mats:
            total = m @ total
        want = abs(np.vdot(post.amplitudes, total @ pre.amplitudes)) ** 2
        got = abs(contract(chain)) ** 2
        worst = max(worst, abs(got - want))
    _report(1, worst < 1e-10, f"100 random chains, worst |p - oracle| = {worst:.3e}")


def test_criterion_2_multi_time_constancy():
    rng = np.random.default_rng(1002)
    ok = True
    worst_fidelity_gap = 0.0
    for _ in range(20):
        psi = random_state(rng, 2)
        obs = make_spin_observable(*random_direction(rng))
        chain = qubit_chain(psi, 2)
        stats, final = two_time_difference(chain, obs, 0, 2, return_final_state=True)
        ok = ok and set(stats.outcomes) == {(0,)}
        ok = ok and abs(stats.probability((0,)) - 1.0) < 1e-12
        rho = partial_trace(final, ["q"])
        fidelity = float(np.real(np.vdot(psi.amplitudes, rho @ psi.amplitudes)))
        worst_fidelity_gap = max(worst_fidelity_gap, abs(fidelity - 1.0))
    ok = ok and worst_fidelity_gap < 1e-12
    _report(2, ok, f"20 runs read 0 surely; worst fidelity gap {worst_fidelity_gap:.3e}")


def test_criterion_3_protocol_equivalence():
    ok = True
    details = []
    for n in (2, 3, 4):
        rep = equivalence_report(n, n_plans=50, seed=3000 + n)
        ok = ok and rep["max_total_variation"] < 1e-10
        ok = ok and rep["success_error"] < 1e-12
        details.append(f"N={n}: maxTV {rep['max_total_variation']:.2e}")
    _report(3, ok, "; ".join(details))


def test_criterion_4_negative_control():
    plan = MeasurementPlan(difference_pairs=((0, 1, pauli("x")),))
    base = product_state_baseline(named_state("+z"), plan, 2)
    proto = protocol_statistics(ProtocolInstance(2, named_state("+z")), plan)
    ok = (
        abs(base.probability((0,)) - 0.5) < 1e-12
        and abs(base.probability((2,)) - 0.25) < 1e-12
        and abs(base.probability((-2,)) - 0.25) < 1e-12
        and proto.outcomes == {(0,): pytest.approx(1.0, abs=1e-10)}
        and base.total_variation(proto) > 0.4
    )
    _report(4, ok, "product copies spread the difference, the protocol pins it at 0")


def test_criterion_5_epr_asymmetry():
    bob = run_epr("bob")
    alice = run_epr("alice")
    ok = bob.outcomes == {(0,): pytest.approx(1.0, abs=1e-12)}
    ok = ok and abs(alice.probability((0,)) - 0.5) < 1e-12
    ok = ok and abs(alice.probability((2,)) - 0.25) < 1e-12
    ok = ok and abs(alice.probability((-2,)) - 0.25) < 1e-12
    ok = ok and set(alice.outcomes) == {(-2,), (0,), (2,)}

    # single-time marginals against a conventional collapse description
    plus_x = named_state("+x").amplitudes
    s = singlet(("A", "B")).amplitudes.reshape(2, 2)
    worst = 0.0
    for moment in (1, 3):
        for axis in "xyz":
            stats = run_scenario(parse_scenario(epr_single_time_scenario("alice", moment, axis)))
            vals, vecs = np.linalg.eigh(pauli(axis).matrix)
            for val, vec in zip(vals, vecs.T):
                if moment < 2:
                    after = np.outer(vec, vec.conj()) @ s
                    want = 2 * float(np.sum(np.abs(plus_x.conj() @ after) ** 2))
                else:
                    want = abs(np.vdot(vec, plus_x)) ** 2
                worst = max(worst, abs(stats.probability((round(val),)) - want))
    ok = ok and worst < 1e-12
    _report(5, ok, f"Bob certain 0, Alice -2/0/+2, marginals off by {worst:.3e}")


def test_criterion_6_collapse_decomposition():
    rng = np.random.default_rng(1006)
    worst = 0.0
    for _ in range(50):
        phi = random_state(rng, 2)
        link = Link.collapse(phi, 0)
        (c1, c2), (u1, u2) = decompose_collapse(link)
        recon = c1 * u1.matrix + c2 * u2.matrix
        worst = max(worst, float(np.max(np.abs(recon - link.matrix))))
    _report(6, worst < 1e-12, f"50 random collapses, worst reconstruction {worst:.3e}")


def test_criterion_7_partial_measurement_sweep():
    balanced = difference_variance_sweep([SQ2])[0][1]
    grid = [0.71, 0.75, 0.79, 0.83, 0.87, 0.91, 0.95, 0.99, 1.0]
    variances = [v for _, v in difference_variance_sweep(grid)]
    monotone = all(b >= a - 1e-12 for a, b in zip(variances, variances[1:]))
    worst_kraus = 0.0
    for alpha in grid:
        beta = math.sqrt(1 - alpha * alpha)
        kp, km = partial_kraus_pair(alpha, beta, "x")
        gap = np.max(np.abs(kp.conj().T @ kp + km.conj().T @ km - np.eye(2)))
        worst_kraus = max(worst_kraus, float(gap))
    ok = balanced < 1e-12 and monotone and worst_kraus < 1e-12
    _report(
        7, ok,
        f"variance 0 at balance ({balanced:.1e}), rises to {variances[-1]:.3f}, "
        f"Kraus completeness off by {worst_kraus:.1e}",
    )


def test_criterion_8_sampling_consistency():
    n = 100_000
    ok = True
    details = []
    for name, text in sorted(builtin_scenarios().items()):
        s = parse_scenario(text)
        exact = run_scenario(s)
        sampled = run_scenario(s, samples=n, seed=8080)
        worst_sigmas = 0.0
        for key, p in exact.outcomes.items():
            sigma = math.sqrt(p * (1 - p) / n)
            gap = abs(sampled.probability(key) - p)
            if sigma == 0.0:
                ok = ok and gap == 0.0
            else:
                worst_sigmas = max(worst_sigmas, gap / sigma)
        ok = ok and worst_sigmas <= 3.0
        ok = ok and set(sampled.outcomes) <= set(exact.outcomes)
        details.append(f"{name} {worst_sigmas:.2f}s")
    rerun_a = run_scenario(parse_scenario(builtin_scenarios()["epr-alice"]),
                           samples=n, seed=8080)
    rerun_b = run_scenario(parse_scenario(builtin_scenarios()["epr-alice"]),
                           samples=n, seed=8080)
    ok = ok and rerun_a.outcomes == rerun_b.outcomes
    _report(8, ok, "max |phat-p|/sigma per builtin: " + ", ".join(details))


def test_criterion_9_parser_corpus():
    fixtures = sorted(FIXTURES.glob("*.scn"))
    errors = sorted((FIXTURES / "errors").glob("*.scn"))
    ok = len(fixtures) >= 12 and len(errors) >= 5

    corpus = "\n".join(p.read_text() for p in fixtures)
    for directive in ("system", "prepare", "link", "collapse", "partial",
                      "measure", "meter-diff", "postselect", "bellpost"):
        ok = ok and directive in corpus

    byte_exact = 0
    for path in fixtures:
        scenario = parse_scenario(path.read_text())
        ok = ok and parse_scenario(render_scenario(scenario)) == scenario
        pinned = (FIXTURES / "expected" / f"{path.stem}.json").read_text()
        if report(run_scenario(scenario), "json") == pinned:
            byte_exact += 1
    ok = ok and byte_exact == len(fixtures)

    from momentchain import ScenarioParseError

    for path in errors:
        try:
            parse_scenario(path.read_text())
            ok = False
        except ScenarioParseError as e:
            ok = ok and e.line > 0 and e.col > 0
    _report(
        9, ok,
        f"{len(fixtures)} fixtures round-trip, {byte_exact} byte-exact pins, "
        f"{len(errors)} error fixtures rejected with positions",
    )
