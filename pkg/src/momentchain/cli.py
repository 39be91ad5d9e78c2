"""Command-line interface.

Exit codes: 0 success, 1 parse/validation error, 2 conditioning impossible,
3 dimension cap exceeded (argparse usage errors exit 64).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import (
    ConditioningImpossibleError,
    DimensionCapError,
    ScenarioParseError,
)
from .experiments import double_life_scenario, epr_scenario
from .protocol import equivalence_report
from .qcore import StateVector, layout
from .scenario import parse_scenario, run_scenario
from .stats import report

_STATE_TAGS = ("+x", "-x", "+y", "-y", "+z", "-z")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(64)


def _parse_state_arg(text: str):
    """'+x' style tag, or comma-separated complex amplitudes like '0.6,0.8'."""
    if text in _STATE_TAGS:
        return text
    from .scenario import _parse_complex

    amps = np.array([_parse_complex(t) for t in text.split(",")], dtype=np.complex128)
    n = np.linalg.norm(amps)
    if n == 0:
        raise ValueError("state amplitudes cannot all be zero")
    return StateVector(layout(("q", amps.size)), amps / n)


def _add_sampling(p: _Parser):
    p.add_argument("--samples", type=int, default=None,
                   help="draw this many Monte Carlo samples instead of exact evaluation")
    p.add_argument("--seed", type=int, default=None,
                   help="random seed (required with --samples)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> _Parser:
    p = _Parser(prog="momentchain",
                description="Pre/post-selected moment-chain quantum simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[], help="execute a scenario file")
    run.add_argument("file", type=Path)
    _add_sampling(run)

    chk = sub.add_parser("check", help="parse-only validation of scenario files")
    chk.add_argument("files", nargs="+", type=Path)

    epr = sub.add_parser("epr", help="entangled-pair two-time difference experiment")
    epr.add_argument("--who", choices=("alice", "bob"), required=True)
    epr.add_argument("--outcome", choices=("+1", "-1"), default="+1")
    epr.add_argument("--t1", type=int, default=1)
    epr.add_argument("--T", type=int, default=2, dest="t_collapse")
    epr.add_argument("--t2", type=int, default=3)
    _add_sampling(epr)

    dbl = sub.add_parser("double-life", help="stride-2 interleaved-evolutions experiment")
    dbl.add_argument("--psi1", default="+z")
    dbl.add_argument("--psi2", default="+x")
    dbl.add_argument("--moments", type=int, default=4)
    dbl.add_argument("--obs", choices=("x", "y", "z"), default="z")
    dbl.add_argument("--pair", default="0,2", help="two moments, e.g. 0,2")
    _add_sampling(dbl)

    pro = sub.add_parser("protocol", help="N-spins-at-one-time equivalence report")
    pro.add_argument("--n", type=int, required=True, help="number of moments (>= 2)")
    pro.add_argument("--psi", default=None, help="prepared state, e.g. '1,0' or '+x'")
    pro.add_argument("--plans", type=int, default=50)
    pro.add_argument("--seed", type=int, default=0)

    return p


def _run_text(text: str, args) -> str:
    scenario = parse_scenario(text)
    stats = run_scenario(scenario, samples=args.samples, seed=args.seed)
    return report(stats, args.format)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            if args.samples is not None and args.seed is None:
                print("error: --samples requires an explicit --seed", file=sys.stderr)
                return 64
            text = args.file.read_text(encoding="utf-8")
            sys.stdout.write(_run_text(text, args))
            return 0

        if args.command == "check":
            status = 0
            for f in args.files:
                try:
                    parse_scenario(f.read_text(encoding="utf-8"))
                    print(f"ok: {f}")
                except ScenarioParseError as e:
                    print(f"error: {f}: {e}", file=sys.stderr)
                    status = 1
            return status

        if args.command == "epr":
            if args.samples is not None and args.seed is None:
                print("error: --samples requires an explicit --seed", file=sys.stderr)
                return 64
            text = epr_scenario(args.who, args.t1, args.t_collapse, args.t2,
                                +1 if args.outcome == "+1" else -1)
            sys.stdout.write(_run_text(text, args))
            return 0

        if args.command == "double-life":
            if args.samples is not None and args.seed is None:
                print("error: --samples requires an explicit --seed", file=sys.stderr)
                return 64
            a, b = (int(x) for x in args.pair.split(","))
            text = double_life_scenario(
                _parse_state_arg(args.psi1), _parse_state_arg(args.psi2),
                args.moments, args.obs, (a, b),
            )
            sys.stdout.write(_run_text(text, args))
            return 0

        if args.command == "protocol":
            psi = _parse_state_arg(args.psi) if args.psi else None
            if isinstance(psi, str):
                from .qcore import named_state

                psi = named_state(psi)
            rep = equivalence_report(args.n, args.plans, args.seed, psi)
            import json

            sys.stdout.write(json.dumps(rep, indent=2) + "\n")
            return 0

    except ScenarioParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ConditioningImpossibleError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DimensionCapError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
