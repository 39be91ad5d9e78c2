"""Built-in experiments expressed as scenario text.

Each builder returns plain scenario source (so the files double as parser
fixtures), and the ``run_*`` helpers parse and execute it. The built-in set
covers: trivial repeated measurement on one spin, the entangled-pair
experiment where only the measuring party's two-time difference becomes
uncertain, the stride-2 "two interleaved lives" chain, a partial-strength
link, and teleportation-style pair post-selection.
"""

from __future__ import annotations

import numpy as np

from .qcore import StateVector
from .scenario import _render_complex, parse_scenario, run_scenario
from .stats import OutcomeStats

__all__ = [
    "epr_scenario",
    "run_epr",
    "epr_single_time_scenario",
    "double_life_scenario",
    "run_double_life",
    "builtin_scenarios",
]


def _state_tokens(psi) -> str:
    """State argument -> 'state TAG' or 'ket ...' directive tail."""
    if isinstance(psi, str):
        return f"state {psi}"
    if isinstance(psi, StateVector):
        amps = psi.amplitudes
    else:
        amps = np.asarray(psi, dtype=np.complex128)
    n = np.linalg.norm(amps)
    if abs(n - 1.0) > 1e-9:
        raise ValueError("state amplitudes must be normalized")
    return "ket " + " ".join(_render_complex(z) for z in amps)


def epr_scenario(
    who: str = "alice",
    t1: int = 1,
    t_collapse: int = 2,
    t2: int = 3,
    outcome: int = +1,
) -> str:
    """Singlet pair; party A measured along x; z-difference meter on one side."""
    who = who.lower()
    if who not in ("alice", "bob"):
        raise ValueError("who must be 'alice' or 'bob'")
    if not (0 < t1 < t_collapse <= t2):
        raise ValueError("need 0 < t1 < T <= t2")
    if outcome not in (+1, -1):
        raise ValueError("outcome must be +1 or -1")
    target = "A" if who == "alice" else "B"
    tag = "+x" if outcome == +1 else "-x"
    lines = [
        "# Entangled pair: only the measured party's difference becomes uncertain",
        "system A qubit",
        "system B qubit",
        "prepare A B singlet",
    ]
    for m in range(1, t2 + 1):
        if m == t_collapse:
            lines.append(f"collapse A @{m} state {tag}")
        else:
            lines.append(f"link A @{m} identity")
        lines.append(f"link B @{m} identity")
    lines.append(f"meter-diff {target} @{t1} @{t2} pauli z")
    return "\n".join(lines) + "\n"


def run_epr(
    who: str = "alice",
    t1: int = 1,
    t_collapse: int = 2,
    t2: int = 3,
    outcome: int = +1,
    samples: int | None = None,
    seed: int | None = None,
) -> OutcomeStats:
    """Distribution of the two-time z-difference reading for one party."""
    text = epr_scenario(who, t1, t_collapse, t2, outcome)
    return run_scenario(parse_scenario(text), samples=samples, seed=seed)


def epr_single_time_scenario(
    who: str = "alice",
    moment: int = 1,
    axis: str = "z",
    t_collapse: int = 2,
    t_last: int = 3,
    outcome: int = +1,
) -> str:
    """EPR evolution with a single projective measurement instead of a meter."""
    target = "A" if who.lower() == "alice" else "B"
    tag = "+x" if outcome == +1 else "-x"
    lines = [
        "system A qubit",
        "system B qubit",
        "prepare A B singlet",
    ]
    for m in range(1, t_last + 1):
        if m == t_collapse:
            lines.append(f"collapse A @{m} state {tag}")
        else:
            lines.append(f"link A @{m} identity")
        lines.append(f"link B @{m} identity")
    lines.append(f"measure {target} @{moment} pauli {axis}")
    return "\n".join(lines) + "\n"


def double_life_scenario(
    psi1="+z",
    psi2="+x",
    n_moments: int = 4,
    observable: str = "z",
    pair: tuple[int, int] = (0, 2),
) -> str:
    """Stride-2 chain: even moments live one evolution, odd moments another."""
    if n_moments < 4:
        raise ValueError("need at least 4 moments for two lives of 2 moments each")
    if observable not in ("x", "y", "z"):
        raise ValueError("observable must be a Pauli axis")
    a, b = pair
    if not 0 <= a < b < n_moments:
        raise ValueError("pair must be two increasing moments inside the chain")
    lines = [
        "# One particle, two interleaved lives: moment k correlates with k+2",
        "system A qubit",
        f"prepare A {_state_tokens(psi1)}",
        f"prepare A @1 {_state_tokens(psi2)}",
    ]
    for m in range(n_moments - 2):
        lines.append(f"link A @{m}:@{m + 2} identity")
    lines.append(f"meter-diff A @{a} @{b} pauli {observable}")
    return "\n".join(lines) + "\n"


def run_double_life(
    psi1="+z",
    psi2="+x",
    n_moments: int = 4,
    observable: str = "z",
    pair: tuple[int, int] = (0, 2),
    samples: int | None = None,
    seed: int | None = None,
) -> OutcomeStats:
    """Difference-reading distribution between two moments of the chain.

    Same-parity pairs ride one life (reading 0 with certainty); cross-parity
    pairs combine two independent evolutions.
    """
    text = double_life_scenario(psi1, psi2, n_moments, observable, pair)
    return run_scenario(parse_scenario(text), samples=samples, seed=seed)


_TRIVIAL = """\
# Zero Hamiltonian: repeated z readings of an up spin never change
system A qubit
prepare A state +z
link A @1 identity
link A @2 identity
measure A @1 pauli z
measure A @2 pauli z
"""

_PARTIAL = """\
# Partial-strength x measurement between the metered moments
system A qubit
prepare A state +z
link A @1 identity
partial A @2 0.8 0.6 basis x
link A @3 identity
meter-diff A @1 @3 pauli z
"""

_TELEPORT = """\
# Pair post-selection chains S0's past onto S1: x readings agree
system S0 qubit
system A1 qubit
system S1 qubit
prepare S0 ket 0.6 0.8
prepare A1 S1 bell phi+
measure S0 @0 pauli x
measure S1 @0 pauli x
bellpost S0 A1
"""


def builtin_scenarios() -> dict[str, str]:
    """Name -> scenario text for every built-in experiment."""
    return {
        "trivial": _TRIVIAL,
        "epr-alice": epr_scenario("alice"),
        "epr-bob": epr_scenario("bob"),
        "double-life": double_life_scenario("+z", "+x", 4, "z", (0, 2)),
        "partial": _PARTIAL,
        "teleport": _TELEPORT,
    }
