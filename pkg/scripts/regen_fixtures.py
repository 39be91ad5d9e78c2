#!/usr/bin/env python3
"""Regenerate the pinned JSON outputs for the scenario fixture corpus.

Run from the repository root after an intentional output-format change:

    python scripts/regen_fixtures.py

The test suite compares report() output byte-for-byte against these files,
so regenerate only when the change in bytes is the point of the commit.
"""

from pathlib import Path

from momentchain.scenario import parse_scenario, run_scenario
from momentchain.stats import report

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def main() -> None:
    expected = FIXTURES / "expected"
    expected.mkdir(exist_ok=True)
    for scn in sorted(FIXTURES.glob("*.scn")):
        stats = run_scenario(parse_scenario(scn.read_text()))
        out = expected / (scn.stem + ".json")
        out.write_text(report(stats, "json"))
        print(f"pinned {out.relative_to(FIXTURES.parent.parent)}")


if __name__ == "__main__":
    main()
