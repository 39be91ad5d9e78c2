"""Outcome distributions and their machine-readable serializations."""

from __future__ import annotations

import json
from dataclasses import dataclass

from . import config

__all__ = ["OutcomeStats", "report"]


def _canon_value(v):
    """Outcome values are ints wherever they are integral within 1e-9."""
    f = float(v)
    r = round(f)
    if abs(f - r) <= 1e-9:
        return int(r)
    return f


def _fmt(p: float) -> float:
    """Round to 12 significant digits for stable serialization."""
    return float(f"{float(p):.12g}")


@dataclass(frozen=True, eq=False)
class OutcomeStats:
    """Joint distribution over labeled measurement outcomes.

    ``outcomes`` maps a tuple of values (one per label, in label order) to its
    probability. ``success_probability`` is the weight of the conditioning
    event (post-selections and fixed collapse/partial outcomes); it is 1.0
    when nothing was conditioned on.
    """

    labels: tuple[str, ...]
    outcomes: dict[tuple, float]
    mode: str = "exact"
    n_samples: int | None = None
    seed: int | None = None
    success_probability: float = 1.0

    @classmethod
    def exact(cls, labels, probs: dict, success: float = 1.0) -> "OutcomeStats":
        clean = {}
        for values, p in probs.items():
            if p > config.PRUNE_EPS:
                clean[tuple(_canon_value(v) for v in values)] = float(p)
        ordered = {k: clean[k] for k in sorted(clean)}
        return cls(tuple(labels), ordered, "exact", None, None, float(success))

    @classmethod
    def sampled(cls, labels, counts: dict, n: int, seed: int, success: float) -> "OutcomeStats":
        probs = {
            tuple(_canon_value(v) for v in values): c / n for values, c in counts.items()
        }
        ordered = {k: probs[k] for k in sorted(probs)}
        return cls(tuple(labels), ordered, "sampled", int(n), int(seed), float(success))

    def probability(self, values) -> float:
        return self.outcomes.get(tuple(_canon_value(v) for v in values), 0.0)

    def support(self) -> tuple:
        return tuple(self.outcomes)

    def total(self) -> float:
        return sum(self.outcomes.values())

    def total_variation(self, other: "OutcomeStats") -> float:
        if self.labels != other.labels:
            raise ValueError("cannot compare distributions with different labels")
        keys = set(self.outcomes) | set(other.outcomes)
        return 0.5 * sum(
            abs(self.outcomes.get(k, 0.0) - other.outcomes.get(k, 0.0)) for k in keys
        )

    def expectation(self) -> float:
        """Mean of a single-label numeric outcome."""
        if len(self.labels) != 1:
            raise ValueError("expectation needs a single-label distribution")
        return sum(k[0] * p for k, p in self.outcomes.items())

    def variance(self) -> float:
        mu = self.expectation()
        return sum((k[0] - mu) ** 2 * p for k, p in self.outcomes.items())

    def to_json_dict(self) -> dict:
        d: dict = {"mode": self.mode}
        if self.mode == "sampled":
            d["n"] = self.n_samples
            d["seed"] = self.seed
        d["success_probability"] = _fmt(self.success_probability)
        d["labels"] = list(self.labels)
        d["outcomes"] = [
            {"values": list(k), "probability": _fmt(p)} for k, p in self.outcomes.items()
        ]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        header = list(self.labels) + [
            "probability", "mode", "n", "seed", "success_probability",
        ]
        n = "" if self.n_samples is None else str(self.n_samples)
        seed = "" if self.seed is None else str(self.seed)
        rows = [",".join(header)]
        for k, p in self.outcomes.items():
            rows.append(
                ",".join(
                    [str(v) for v in k]
                    + [f"{_fmt(p)!r}", self.mode, n, seed, f"{_fmt(self.success_probability)!r}"]
                )
            )
        return "\n".join(rows) + "\n"


def report(stats: OutcomeStats, format: str = "json") -> str:
    """Serialize a distribution for the CLI; 'json' or 'csv'."""
    if format == "json":
        return stats.to_json()
    if format == "csv":
        return stats.to_csv()
    raise ValueError(f"unknown report format {format!r}")
