"""Chains of time moments joined by identity/unitary/collapse/partial links.

A :class:`HistoryChain` fixes a ket at its earliest moment, connects
successive moments with links, and optionally fixes a bra at its latest
moment. Link matrices are stored un-normalized (a collapse link is the bare
projector |phi><phi|), so contracting a unitary-only chain against a final
bra returns the plain transition amplitude <post|U_n ... U_1|pre>; physical
probabilities always come from Born-rule normalization, never from link
norms.

For histories that contain collapse or partial links, probabilities follow
the sequential outcome-map rule: each such link conditions the history on its
recorded outcome, and distributions are normalized over the enumerated
measurement outcomes (conditioning on a zero-weight event raises, it is never
0/0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import config
from .engine import ApplyStep, MeasureStep, Program, assemble, run_exact, run_sampled
from .qcore import (
    Operator,
    RegisterLayout,
    StateVector,
    eigen_projectors,
    layout as make_layout,
)
from .stats import OutcomeStats

__all__ = [
    "Link",
    "HistoryChain",
    "MultiSystemChain",
    "link_matrix",
    "contract",
    "history_probability",
    "conditional_outcome_distribution",
    "decompose_collapse",
    "sample_history",
    "sample_outcome_distribution",
]


def _as_matrix(obj) -> np.ndarray:
    if isinstance(obj, Operator):
        return np.array(obj.matrix, dtype=np.complex128)
    return np.array(obj, dtype=np.complex128)


def _as_amplitudes(obj) -> np.ndarray:
    if isinstance(obj, StateVector):
        return np.array(obj.amplitudes, dtype=np.complex128)
    return np.array(obj, dtype=np.complex128).reshape(-1)


@dataclass(frozen=True, eq=False)
class Link:
    """One connector between moment ``t_from`` and moment ``t_to``.

    Kinds: 'identity', 'unitary' (U), 'collapse' (rank-one |phi><phi|),
    'partial' (contraction K with operator norm <= 1). ``t_to - t_from`` is
    normally 1; larger strides skip moments that then carry no boundary
    vectors of their own.
    """

    kind: str
    t_from: int
    t_to: int
    dim: int
    matrix: np.ndarray | None = None
    phi: np.ndarray | None = None

    def __post_init__(self):
        if self.t_to <= self.t_from:
            raise ValueError("link must advance in time (t_to > t_from)")

    @property
    def stride(self) -> int:
        return self.t_to - self.t_from

    @classmethod
    def identity(cls, dim: int, t_from: int, stride: int = 1) -> "Link":
        return cls("identity", t_from, t_from + stride, dim)

    @classmethod
    def unitary(cls, u, t_from: int, stride: int = 1) -> "Link":
        m = _as_matrix(u)
        d = m.shape[0]
        if np.max(np.abs(m.conj().T @ m - np.eye(d))) > config.STRUCTURAL_TOL:
            raise ValueError("unitary link matrix is not unitary within tolerance")
        return cls("unitary", t_from, t_from + stride, d, matrix=m)

    @classmethod
    def collapse(cls, phi, t_from: int, stride: int = 1) -> "Link":
        v = _as_amplitudes(phi)
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ValueError("collapse state must be normalized")
        return cls(
            "collapse", t_from, t_from + stride, v.size,
            matrix=np.outer(v, v.conj()), phi=v,
        )

    @classmethod
    def partial(cls, k, t_from: int, stride: int = 1) -> "Link":
        m = _as_matrix(k)
        top = float(np.linalg.norm(m, 2))
        if top > 1.0 + config.STRUCTURAL_TOL:
            raise ValueError(f"partial link must be a contraction (norm {top} > 1)")
        return cls("partial", t_from, t_from + stride, m.shape[0], matrix=m)

    @property
    def is_conditioning(self) -> bool:
        return self.kind in ("collapse", "partial")


def link_matrix(link: Link) -> Operator:
    """The un-normalized matrix a link applies when the chain is contracted."""
    if link.kind == "identity":
        m = np.eye(link.dim)
    else:
        m = link.matrix
    return Operator(make_layout(("q", link.dim)), m)


@dataclass(frozen=True, eq=False)
class HistoryChain:
    """Pre-selected ket, ordered links, optional post-selected bra.

    ``system`` is the per-moment state space. Links must be contiguous:
    each starts at the moment the previous one reached.
    """

    system: RegisterLayout
    pre: StateVector
    links: tuple[Link, ...]
    post: StateVector | None = None
    pre_time: int = 0

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        if self.pre.layout != self.system:
            raise ValueError("pre-selected state layout must match the system")
        if not self.pre.is_normalized():
            raise ValueError("pre-selected state must be normalized")
        t = self.pre_time
        for ln in self.links:
            if ln.dim != self.system.dim:
                raise ValueError("link dimension does not match the system")
            if ln.t_from != t:
                raise ValueError(
                    f"links must be contiguous: expected start {t}, got {ln.t_from}"
                )
            t = ln.t_to
        if self.post is not None:
            if self.post.layout != self.system:
                raise ValueError("post-selected state layout must match the system")
            if not self.post.is_normalized():
                raise ValueError("post-selected state must be normalized")

    @classmethod
    def from_states(cls, pre: StateVector, links: Sequence[Link], post: StateVector | None = None,
                    pre_time: int = 0) -> "HistoryChain":
        return cls(pre.layout, pre, tuple(links), post, pre_time)

    @property
    def last_time(self) -> int:
        return self.links[-1].t_to if self.links else self.pre_time

    @property
    def moments(self) -> tuple[int, ...]:
        ms = [self.pre_time]
        ms.extend(ln.t_to for ln in self.links)
        return tuple(ms)


def contract(chain: HistoryChain) -> complex:
    """<post| L_n ... L_1 |pre> with links applied in time order."""
    if chain.post is None:
        raise ValueError("contraction requires a post-selected boundary")
    vec = np.array(chain.pre.amplitudes)
    for ln in chain.links:
        if ln.kind != "identity":
            vec = ln.matrix @ vec
    return complex(np.vdot(chain.post.amplitudes, vec))


def history_probability(chain: HistoryChain) -> float:
    """Weight of the chain's recorded history.

    With a post boundary this is |contract|^2; without one it is the squared
    norm left after the (possibly non-unitary) links act on the pre state.
    """
    if chain.post is not None:
        return abs(contract(chain)) ** 2
    vec = np.array(chain.pre.amplitudes)
    for ln in chain.links:
        if ln.kind != "identity":
            vec = ln.matrix @ vec
    return float(np.vdot(vec, vec).real)


def _chain_program(chain: HistoryChain, measurement_slots) -> Program:
    steps = []
    for ln in chain.links:
        if ln.kind == "identity":
            continue
        steps.append(
            ApplyStep((ln.t_to, 0), chain.system.names, ln.matrix,
                      conditioning=ln.is_conditioning)
        )
    slots = sorted(enumerate(measurement_slots), key=lambda it: it[1][0])
    valid = set(chain.moments)
    for idx, (t, obs) in slots:
        if t not in valid:
            raise ValueError(f"no moment {t} in this chain (moments {sorted(valid)})")
        obs_m = obs.matrix if isinstance(obs, Operator) else np.asarray(obs)
        if isinstance(obs, Operator) and not obs.is_hermitian():
            raise ValueError("measurement observables must be hermitian")
        branches = tuple(eigen_projectors(obs_m))
        steps.append(MeasureStep((t, 2), f"m{idx}@t{t}", chain.system.names, branches))
    if chain.post is not None:
        proj = np.outer(chain.post.amplitudes, chain.post.amplitudes.conj())
        steps.append(
            ApplyStep((chain.last_time, 3), chain.system.names, proj, conditioning=True)
        )
    return assemble(chain.system, chain.pre.amplitudes, steps)


def conditional_outcome_distribution(
    chain: HistoryChain, measurement_slots: Sequence[tuple[int, Operator]]
) -> OutcomeStats:
    """Exact joint distribution of eigenvalue outcomes at the given moments.

    Conditioned on the pre boundary, any collapse/partial link outcomes, and
    the post boundary when present: every outcome sequence is weighted by the
    squared sandwiched amplitude and the weights are normalized over all
    sequences. A slot at moment t measures after the link arriving at t and
    before the link leaving it.
    """
    return run_exact(_chain_program(chain, measurement_slots))


def decompose_collapse(link: Link) -> tuple[tuple[float, float], tuple[Operator, Operator]]:
    """Write a qubit collapse link as a weighted sum of two unitaries.

    |phi><phi| = 1/2 * I + 1/2 * (2|phi><phi| - I), exactly; the second term
    is the reflection through phi.
    """
    if link.kind != "collapse":
        raise ValueError("decompose_collapse needs a collapse link")
    if link.dim != 2:
        raise ValueError("decomposition applies to 2-dimensional systems only")
    lay = make_layout(("q", 2))
    proj = link.matrix
    reflection = 2.0 * proj - np.eye(2)
    return (0.5, 0.5), (
        Operator(lay, np.eye(2), unitary=True),
        Operator(lay, reflection, unitary=True),
    )


def sample_history(
    chain: HistoryChain, measurement_slots, seed: int
) -> tuple:
    """One outcome sequence by forward sampling with accept/reject conditioning."""
    stats = run_sampled(_chain_program(chain, measurement_slots), 1, seed)
    return next(iter(stats.outcomes))


def sample_outcome_distribution(
    chain: HistoryChain, measurement_slots, n: int, seed: int
) -> OutcomeStats:
    """Monte Carlo counterpart of :func:`conditional_outcome_distribution`."""
    return run_sampled(_chain_program(chain, measurement_slots), n, seed)


@dataclass(frozen=True, eq=False)
class MultiSystemChain:
    """Independent per-system chains sharing one joint preparation.

    ``joint_pre`` lives on the merged layout (one register per system, in
    ``systems`` order) and is the only place cross-system entanglement may
    enter; afterwards each system evolves through its own links. Posts, when
    present, are per-system bras at that system's last moment.
    """

    systems: tuple[str, ...]
    chains: dict[str, tuple[Link, ...]]
    joint_pre: StateVector
    posts: dict[str, StateVector] = field(default_factory=dict)
    pre_time: int = 0

    def __post_init__(self):
        if tuple(self.joint_pre.layout.names) != tuple(self.systems):
            raise ValueError("joint preparation layout must list the systems in order")
        if not self.joint_pre.is_normalized():
            raise ValueError("joint preparation must be normalized")
        for name, links in self.chains.items():
            t = self.pre_time
            d = self.joint_pre.layout.dim_of(name)
            for ln in links:
                if ln.t_from != t:
                    raise ValueError(f"links of {name!r} must be contiguous")
                if ln.dim != d:
                    raise ValueError(f"link dimension mismatch on {name!r}")
                t = ln.t_to

    def steps(self) -> list[ApplyStep]:
        out = []
        for name, links in self.chains.items():
            for ln in links:
                if ln.kind == "identity":
                    continue
                out.append(
                    ApplyStep((ln.t_to, 0), (name,), ln.matrix,
                              conditioning=ln.is_conditioning)
                )
        last = self.last_times()
        for name, bra in self.posts.items():
            proj = np.outer(bra.amplitudes, bra.amplitudes.conj())
            out.append(ApplyStep((last[name], 3), (name,), proj, conditioning=True))
        return out

    def last_times(self) -> dict[str, int]:
        return {
            name: (links[-1].t_to if links else self.pre_time)
            for name, links in self.chains.items()
        }

    def conditional_outcome_distribution(self, measurement_slots) -> OutcomeStats:
        """Slots are ``(system, moment, observable)`` triples."""
        steps = self.steps()
        for idx, (name, t, obs) in enumerate(measurement_slots):
            obs_m = obs.matrix if isinstance(obs, Operator) else np.asarray(obs)
            steps.append(
                MeasureStep((t, 2), f"{name}@t{t}", (name,), tuple(eigen_projectors(obs_m)))
            )
        program = assemble(self.joint_pre.layout, self.joint_pre.amplitudes, steps)
        return run_exact(program)
