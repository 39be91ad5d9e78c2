"""Shared helpers for the test suite."""

import numpy as np

from momentchain import HistoryChain, Link, StateVector, layout


def haar_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng: np.random.Generator, d: int, name: str = "q") -> StateVector:
    z = rng.normal(size=d) + 1j * rng.normal(size=d)
    return StateVector(layout((name, d)), z / np.linalg.norm(z))


def random_direction(rng: np.random.Generator):
    theta = np.arccos(2 * rng.random() - 1)
    phi = 2 * np.pi * rng.random()
    return theta, phi


def qubit_chain(pre, n_identity_links: int, post=None) -> HistoryChain:
    links = tuple(Link.identity(2, t) for t in range(n_identity_links))
    return HistoryChain.from_states(pre, links, post)
