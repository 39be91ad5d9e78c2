"""Forward state-vector execution of timed step programs.

Higher layers (history chains, meters, the spin protocol, parsed scenarios)
lower their experiments to a :class:`Program`: an initial state over named
registers plus an ordered list of steps. Steps are sorted by ``(moment, rank,
declaration index)`` where rank 0 = links arriving at that moment, rank 1 =
pointer couplings, rank 2 = projective measurements; post-selections run
after the last moment.

Exact mode enumerates measurement branches and normalizes total weight (the
standard rule for outcome probabilities between a preparation and a set of
conditioning events). Sampled mode draws trajectories by sequential Born
sampling with accept/reject at every conditioning step, so its statistics are
an independent check on the exact path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import config
from .errors import ConditioningImpossibleError
from ._kernels import apply_matrix, marginal_probabilities
from .qcore import RegisterLayout, StateVector
from .stats import OutcomeStats

__all__ = ["ApplyStep", "MeasureStep", "Readout", "Program", "assemble", "run_exact", "run_sampled"]

POST_RANK = 3  # rank used for end-of-timeline conditioning steps


@dataclass(frozen=True, eq=False)
class ApplyStep:
    key: tuple
    targets: tuple[str, ...]
    matrix: np.ndarray
    conditioning: bool = False


@dataclass(frozen=True, eq=False)
class MeasureStep:
    key: tuple
    label: str
    targets: tuple[str, ...]
    branches: tuple[tuple[float, np.ndarray], ...]


@dataclass(frozen=True, eq=False)
class Readout:
    """Final computational-basis reading of a pointer register.

    Index i decodes to the signed position i (i <= half) or i - dim (i > half).
    """

    label: str
    register: str
    half: int


@dataclass(frozen=True, eq=False)
class Program:
    layout: RegisterLayout
    initial: np.ndarray
    ops: tuple
    readouts: tuple[Readout, ...]
    labels: tuple[str, ...]


def assemble(layout: RegisterLayout, initial: np.ndarray, steps, readouts=()) -> Program:
    """Sort steps into execution order and resolve register names to axes."""
    ordered = sorted(enumerate(steps), key=lambda it: (it[1].key, it[0]))
    dims = layout.dims
    ops = []
    labels = []
    for _, step in ordered:
        axes = layout.axes(step.targets)
        if isinstance(step, ApplyStep):
            m = np.ascontiguousarray(step.matrix, dtype=np.complex128)
            ops.append(("c" if step.conditioning else "u", axes, m))
        elif isinstance(step, MeasureStep):
            branches = tuple(
                (v, np.ascontiguousarray(p, dtype=np.complex128)) for v, p in step.branches
            )
            ops.append(("m", axes, branches))
            labels.append(step.label)
        else:
            raise TypeError(f"unknown step {step!r}")
    labels.extend(r.label for r in readouts)
    initial = np.ascontiguousarray(initial, dtype=np.complex128)
    if initial.size != layout.dim:
        raise ValueError("initial state size does not match layout")
    return Program(layout, initial, tuple(ops), tuple(readouts), tuple(labels))


def _readout_values(program: Program, vec: np.ndarray):
    """Joint pointer-reading weights of a (sub-normalized) final vector."""
    dims = program.layout.dims
    axes = tuple(program.layout.axis(r.register) for r in program.readouts)
    probs = marginal_probabilities(vec, dims, axes)
    sizes = [dims[a] for a in axes]
    halves = [r.half for r in program.readouts]
    for flat, w in enumerate(probs):
        if w <= 0.0:
            continue
        digits = []
        rem = flat
        for s in reversed(sizes):
            digits.append(rem % s)
            rem //= s
        digits.reverse()
        values = tuple(d if d <= h else d - s for d, h, s in zip(digits, halves, sizes))
        yield values, float(w)


def run_exact(program: Program) -> OutcomeStats:
    """Enumerate all measurement branches and condition on total weight."""
    dims = program.layout.dims
    weights: dict[tuple, float] = {}

    def walk(i: int, vec: np.ndarray, values: tuple):
        for j in range(i, len(program.ops)):
            kind, axes, payload = program.ops[j]
            if kind == "m":
                for value, proj in payload:
                    branch = apply_matrix(vec, proj, dims, axes)
                    w = float(np.vdot(branch, branch).real)
                    if w <= config.PRUNE_EPS:
                        continue
                    walk(j + 1, branch, values + (value,))
                return
            vec = apply_matrix(vec, payload, dims, axes)
        if program.readouts:
            for readings, w in _readout_values(program, vec):
                key = values + readings
                weights[key] = weights.get(key, 0.0) + w
        else:
            w = float(np.vdot(vec, vec).real)
            if w > 0.0:
                weights[values] = weights.get(values, 0.0) + w

    walk(0, program.initial, ())
    total = sum(weights.values())
    if total <= config.CONDITION_EPS:
        raise ConditioningImpossibleError("conditioning impossible: total weight is zero")
    probs = {k: w / total for k, w in weights.items()}
    return OutcomeStats.exact(program.labels, probs, success=total)


def final_state(program: Program) -> StateVector:
    """Final (normalized) state of a measurement-free program."""
    if any(kind == "m" for kind, _, _ in program.ops):
        raise ValueError("final_state requires a program without measurement steps")
    dims = program.layout.dims
    vec = program.initial
    for _, axes, payload in program.ops:
        vec = apply_matrix(vec, payload, dims, axes)
    n = float(np.linalg.norm(vec))
    if n * n <= config.CONDITION_EPS:
        raise ConditioningImpossibleError("conditioning impossible: total weight is zero")
    return StateVector(program.layout, vec / n)


_STALL_CHECK = 1000


def run_sampled(program: Program, n: int, seed: int) -> OutcomeStats:
    """Draw ``n`` accepted trajectories; deterministic for a fixed seed."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    dims = program.layout.dims
    ops = program.ops
    counts: dict[tuple, int] = {}
    accepted = 0
    trials = 0
    readout_axes = tuple(program.layout.axis(r.register) for r in program.readouts)
    sizes = [dims[a] for a in readout_axes]
    halves = [r.half for r in program.readouts]

    while accepted < n:
        trials += 1
        if accepted == 0 and trials == _STALL_CHECK:
            run_exact(program)  # raises ConditioningImpossibleError when weight is 0
        if trials > max(10_000, 200 * n):
            raise RuntimeError("acceptance rate too low; rejected too many trajectories")
        vec = program.initial
        values: list = []
        rejected = False
        for kind, axes, payload in ops:
            if kind == "m":
                r = rng.random()
                acc = 0.0
                chosen = None
                for value, proj in payload:
                    branch = apply_matrix(vec, proj, dims, axes)
                    p = float(np.vdot(branch, branch).real)
                    acc += p
                    if r < acc:
                        chosen = (value, branch, p)
                        break
                if chosen is None:  # numerical remainder: keep the last branch
                    chosen = (value, branch, p)
                value, branch, p = chosen
                if p <= 0.0:
                    rejected = True
                    break
                vec = branch / np.sqrt(p)
                values.append(value)
            else:
                vec = apply_matrix(vec, payload, dims, axes)
                if kind == "c":
                    p = float(np.vdot(vec, vec).real)
                    if rng.random() >= p:
                        rejected = True
                        break
                    vec = vec / np.sqrt(p)
        if rejected:
            continue
        if readout_axes:
            probs = marginal_probabilities(vec, dims, readout_axes)
            r = rng.random() * probs.sum()
            acc = 0.0
            flat = len(probs) - 1
            for i, w in enumerate(probs):
                acc += w
                if r < acc:
                    flat = i
                    break
            digits = []
            rem = flat
            for s in reversed(sizes):
                digits.append(rem % s)
                rem //= s
            digits.reverse()
            values.extend(
                d if d <= h else d - s for d, h, s in zip(digits, halves, sizes)
            )
        key = tuple(values)
        counts[key] = counts.get(key, 0) + 1
        accepted += 1

    return OutcomeStats.sampled(
        program.labels, counts, n, seed, success=accepted / trials
    )
