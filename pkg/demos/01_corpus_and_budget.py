"""Walkthrough: build a release-notes corpus and check it against context windows.

Imports the thirteen synthetic fixture documents into a scratch corpus,
prints the token size table, then shows what happens when one document
is far too large for a model.

    python3 demos/01_corpus_and_budget.py
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from qmigtax.errors import ContextExceededError
from qmigtax.gateway import ModelEndpoint
from qmigtax.ingest import CorpusStore, ReleaseDoc, load_release_notes, release_in_scope, size_distribution
from qmigtax.prompts import build_bundle

NOTES = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "release_notes"


def main() -> None:
    kinds = dict(ln.split() for ln in (NOTES / "kinds.txt").read_text("utf-8").splitlines() if ln.strip())

    with tempfile.TemporaryDirectory() as tmp:
        store = CorpusStore(Path(tmp) / "corpus")
        for version, kind in kinds.items():
            store.write(load_release_notes(NOTES / f"{version}.en.txt", version, "en", kind=kind))
        print(f"Imported {len(store.versions())} versions into {store.root}\n")

        # A patch release would be skipped before any prompting happens.
        print("0.45.1 (patch) in scope?", release_in_scope("0.45.1", "patch"))
        print("1.0.0 (major) in scope?", release_in_scope("1.0.0", "major"), "\n")

        dist = size_distribution(store.load_all("en"))
        print(f"{'version':<8} {'chars':>7} {'tokens':>7}")
        for row in dist.rows:
            print(f"{row.version:<8} {row.characters:>7} {row.tokens:>7}")
        print(f"\nmin {dist.min}, median {dist.median:g}, max {dist.max} tokens")
        print(f"over 32K: {dist.over_budget_count(32_768)}, over 128K: {dist.over_budget_count(131_072)}\n")

        # Every fixture fits a 32K model with room left for the answer.
        small = ModelEndpoint("local-32k", "mock://", 32_768)
        biggest = max(store.load_all("en"), key=lambda d: d.token_estimate)
        bundle = build_bundle(biggest, small)
        print(f"{biggest.version} prompt needs {bundle.token_estimate} of {small.context_window} tokens")

        # A synthetic document of ~130K tokens is refused before any request is made.
        huge = ReleaseDoc("9.0.0", "en", "lorem " * 90_000, source="synthetic")
        try:
            build_bundle(huge, ModelEndpoint("cloud-128k", "mock://", 131_072))
        except ContextExceededError as exc:
            print(f"refused: {exc}")


if __name__ == "__main__":
    main()
