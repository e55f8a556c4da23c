"""Walkthrough: prompt a (mock) model for a taxonomy and parse the answer.

The mock endpoint reads canned responses from the test fixtures, so the
whole round trip runs offline. Swap the endpoint for ``gpt-4o`` and set
``OPENAI_API_KEY`` to talk to a real model instead.

    python3 demos/02_prompt_generate_parse.py
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from qmigtax.gateway import ModelEndpoint, generate, list_runs, replay
from qmigtax.ingest import load_release_notes
from qmigtax.model import Provenance
from qmigtax.parser import parse_markdown, serialize_markdown, validate
from qmigtax.prompts import build_bundle, extract_body

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main() -> None:
    doc = load_release_notes(FIXTURES / "release_notes" / "1.0.0.en.txt", "1.0.0", "en", kind="major")
    mock = ModelEndpoint("mock", "mock://", 32_768, response_dir=str(FIXTURES / "responses"))

    bundle = build_bundle(doc, mock)
    print("System prompt begins:")
    print("  " + "\n  ".join(bundle.system_text.splitlines()[:6]) + "\n  ...")
    assert extract_body(bundle.user_text) == doc.body
    print(f"User prompt carries the notes verbatim ({len(doc.body)} chars, sha256 {doc.checksum[:12]})\n")

    with tempfile.TemporaryDirectory() as runs:
        text, log = generate(bundle, mock, runs)
        print(f"Run logged at {log.path.relative_to(runs)} with outcome {log.outcome!r}")
        assert replay(log.path) == text
        print(f"{len(list_runs(runs, '1.0.0'))} run(s) recorded for 1.0.0\n")

        tax, violations = parse_markdown(text, provenance=Provenance.model(mock.name))
        print(f"Parsed {len(tax)} scenarios for {tax.flow}; {len(violations)} parse violation(s)")
        for s in tax:
            print(f"  [{s.difficulty}] {s.summary}  ({', '.join(s.artifacts)})")
        warnings = validate(tax)
        print(f"validator: {len(warnings)} finding(s)\n")

        print("Canonical markdown, first two rows:")
        print("\n".join(serialize_markdown(tax).splitlines()[:4]))


if __name__ == "__main__":
    main()
