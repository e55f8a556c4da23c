"""Walkthrough: compare expert and model taxonomies, then unify them.

Two flows are shown. For 0.45.0 -> 0.46.0 the model recovers every expert
scenario and adds one of its own; for 0.46.0 -> 1.0.0 it misses one and
finds another the expert did not list.

    python3 demos/03_compare_and_merge.py
"""

from __future__ import annotations

from pathlib import Path

from qmigtax.diff import compare, merge, render_report
from qmigtax.model import Provenance
from qmigtax.parser import errors_only, parse_markdown, validate

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def load(path: Path, provenance: Provenance):
    tax, _ = parse_markdown(path.read_text("utf-8"), provenance=provenance)
    return tax


def main() -> None:
    for manual_file, response in (("0.45.0_0.46.0.md", "0.46.0.md"), ("0.46.0_1.0.0.md", "1.0.0.md")):
        manual = load(FIXTURES / "manual" / manual_file, Provenance.manual())
        auto = load(FIXTURES / "responses" / response, Provenance.model("mock"))

        report = compare(manual, auto, threshold=0.5, model="mock")
        print(render_report(report, manual, auto))

        unified = merge(manual, auto, report)
        kinds = [s.provenance.kind for s in unified]
        print(
            f"Unified taxonomy: {len(unified)} scenarios "
            f"({kinds.count('merged')} merged, {kinds.count('manual')} manual only, {kinds.count('model')} model only); "
            f"{len(errors_only(validate(unified)))} validation errors"
        )
        print("=" * 72 + "\n")


if __name__ == "__main__":
    main()
