"""Acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line and the session summary repeats
them under "acceptance criteria". Run alone with::

    pytest tests/test_acceptance.py -v
"""

import contextlib
import json
import socket
import time
from pathlib import Path

import pytest

from qmigtax.cli import main
from qmigtax.diff import Phase, compare, match, similarity
from qmigtax.errors import ContextExceededError
from qmigtax.gateway import ModelEndpoint, list_runs
from qmigtax.ingest import ReleaseDoc, estimate_tokens
from qmigtax.model import Classification, Difficulty, ImpactDomain, Scenario, Taxonomy, VersionFlow
from qmigtax.parser import HEADER_ROW, errors_only, parse_markdown, parse_record, serialize_markdown, validate
from qmigtax.prompts import DEFAULT_RESERVE, build_bundle, build_user_prompt, extract_body, load_one_shot

from conftest import ACCEPTANCE_RESULTS, FIXTURES, NOTES, fixture_kinds, small_fixture_comparisons
from oracles.assignment import best_assignment
from oracles.charcount import summary, token_counts


@contextlib.contextmanager
def criterion(n, title, budget=None):
    start = time.perf_counter()
    ok = False
    try:
        yield
        elapsed = time.perf_counter() - start
        if budget is not None:
            assert elapsed < budget, f"took {elapsed:.2f}s, budget {budget}s"
        ok = True
    finally:
        ACCEPTANCE_RESULTS[n] = (title, ok)
        print(f"{'PASS' if ok else 'FAIL'}  criterion {n}: {title}")


def test_1_schema_fidelity():
    with criterion(1, "canonical header and byte-identical 20-row round trip", budget=1.0):
        assert HEADER_ROW == (
            "| Category | Migration Flow | Summary | Artifacts | Example code in source version | "
            "Example code in target version | Degree of Difficulty | Degree of impact in SE/QSE | References |"
        )
        text = (FIXTURES / "twenty.md").read_text("utf-8")
        tax, violations = parse_markdown(text)
        assert len(tax) == 20 and errors_only(violations) == []
        again = serialize_markdown(tax)
        assert again == text
        back, _ = parse_markdown(again)
        assert back.scenarios == tax.scenarios


def test_2_defect_detection():
    with criterion(2, "seeded defects yield exactly four violations", budget=1.0):
        _, violations = parse_markdown((FIXTURES / "defects.md").read_text("utf-8"))
        assert sorted(v.kind for v in violations) == ["bad-enum", "duplicate-row", "empty-cell", "multiline-cell"]
        by_kind = {v.kind: v for v in violations}
        assert by_kind["empty-cell"].column == "Summary"
        assert by_kind["bad-enum"].column == "Degree of Difficulty" and "Medium" in by_kind["bad-enum"].detail
        assert all(v.severity == "error" for v in violations)


def test_3_token_budgeting(long_body):
    with criterion(3, "80,000 chars = 20,000 tokens fits 32K; over-128K document rejected", budget=1.0):
        assert len(long_body) == 80_000 and estimate_tokens(long_body) == 20_000
        ep32 = ModelEndpoint("ctx32k", "mock://", 32 * 1024)
        bundle = build_bundle(ReleaseDoc("1.0.0", "en", long_body, "fixture"), ep32)
        assert bundle.reserve == DEFAULT_RESERVE == 4096
        assert 20_000 + 4096 < bundle.token_estimate <= 32_768
        huge = "x" * (130 * 1024 * 4)
        assert estimate_tokens(huge) > 128 * 1024
        with pytest.raises(ContextExceededError):
            build_bundle(ReleaseDoc("1.0.0", "en", huge, "fixture"), ModelEndpoint("ctx128k", "mock://", 128 * 1024))


def test_4_size_distribution(tmp_path, monkeypatch):
    with criterion(4, "tokens subcommand: 13 rows, min/median/max match independent count", budget=1.0):
        monkeypatch.chdir(tmp_path)
        kinds = fixture_kinds()
        for v, kind in kinds.items():
            assert main(["fetch", "--version", v, "--from", str(NOTES / f"{v}.en.txt"), "--kind", kind]) == 0
        out = tmp_path / "sizes.record"
        assert main(["tokens", "--out", str(out)]) == 0
        record = json.loads(out.read_text("utf-8"))
        expected = token_counts(NOTES)
        assert len(record["rows"]) == 13 == len(expected)
        assert {r["version"]: r["tokens"] for r in record["rows"]} == expected
        lo, med, hi = summary(expected)
        assert (record["min"], record["median"], record["max"]) == (lo, med, hi)


def _numbered(n, start=0):
    flow = VersionFlow("0.46.0", "1.0.0")
    return [
        Scenario(Classification(implication="Method"), flow, f"change number {k}", (f"artifact{k}",), Difficulty.LOW,
                 ImpactDomain.parse("SE"))
        for k in range(start, start + n)
    ]


def test_5_phase_classification():
    with criterion(5, "Initial / Intermediate / Future on constructed comparisons", budget=1.0):
        flow = VersionFlow("0.46.0", "1.0.0")
        manual = _numbered(5)
        r = compare(Taxonomy(flow, tuple(manual)), Taxonomy(flow, tuple(manual[:1])))
        assert (r.recall, r.novelty, r.phase) == (0.2, 0.0, Phase.INITIAL)

        manual = _numbered(40)
        auto = manual[:28] + _numbered(7, start=100)
        r = compare(Taxonomy(flow, tuple(manual)), Taxonomy(flow, tuple(auto)))
        assert (r.recall, r.novelty, r.phase) == (0.7, 0.2, Phase.INTERMEDIATE)

        manual = _numbered(5)
        auto = manual + _numbered(2, start=100)
        r = compare(Taxonomy(flow, tuple(manual)), Taxonomy(flow, tuple(auto)))
        assert (r.recall, r.phase) == (1.0, Phase.FUTURE)


def test_6_matching_oracle():
    with criterion(6, "greedy pairs equal exhaustive optimum on all small fixtures", budget=5.0):
        cases = small_fixture_comparisons(limit=6)
        assert len(cases) >= 10
        for name, manual, auto in cases:
            scores = [[similarity(m, a) for a in auto.scenarios] for m in manual.scenarios]
            count, _, optimal = best_assignment(scores, 0.5)
            im = {s.id: i for i, s in enumerate(manual.scenarios)}
            ia = {s.id: j for j, s in enumerate(auto.scenarios)}
            greedy = frozenset((im[p.manual_id], ia[p.auto_id]) for p in match(manual, auto, 0.5).pairs)
            assert len(greedy) == count, name
            assert greedy in optimal, name


def test_7_similarity_hand_check():
    with criterion(7, "worked similarity example equals 0.55"):
        flow = VersionFlow("0.46.0", "1.0.0")
        cls = Classification(implication="Method", change_type="upgrade")
        a = Scenario(cls, flow, "execute was removed", ("execute", "backend"), Difficulty.LOW, ImpactDomain.parse("SE"))
        b = Scenario(cls, flow, "use transpile instead", ("execute",), Difficulty.LOW, ImpactDomain.parse("SE"))
        assert abs(similarity(a, b) - (0.6 * 0.5 + 0.25 * 1.0 + 0.15 * 0.0)) <= 1e-9
        assert abs(similarity(a, b) - 0.55) <= 1e-9


def test_8_offline_end_to_end(workdir, monkeypatch):
    def no_network(self, address):
        raise AssertionError(f"network access attempted: {address!r}")

    with criterion(8, "offline pipeline fetch..report exits 0 in under 10s", budget=10.0):
        monkeypatch.setattr(socket.socket, "connect", no_network)
        v = "1.0.0"
        steps = [
            ["--offline", "fetch", "--version", v, "--from", str(NOTES / f"{v}.en.txt"), "--kind", "major"],
            ["verify", "--version", v, "--golden", str(FIXTURES / "golden" / f"{v}.en.txt")],
            ["prompt", "--version", v, "--endpoint", "mock"],
            ["--offline", "generate", "--version", v, "--endpoint", "mock"],
        ]
        for argv in steps:
            assert main(argv) == 0, argv
        (log,) = list_runs(workdir / "runs", v)
        run_dir = log.parent
        rest = [
            ["parse", str(run_dir), "--flow", "0.46.0 -> 1.0.0", "--out", "auto.record"],
            ["validate", "auto.record"],
            ["parse", "manual/0.46.0_1.0.0.md", "--out", "manual.record"],
            ["compare", "--manual", "manual.record", "--auto", "auto.record", "--out-dir", "cmp"],
            ["merge", "--report", "cmp/comparison.record", "--out", "merged.record"],
            ["validate", "merged.record"],
            ["report", "cmp/comparison.record", "--out", "report.txt"],
        ]
        for argv in rest:
            assert main(argv) == 0, argv
        merged = parse_record((workdir / "merged.record").read_text("utf-8"))
        assert len(merged) > 0
        assert errors_only(validate(merged)) == []
        assert all(s.provenance is not None and s.provenance.kind in ("manual", "model", "merged") for s in merged)
        assert "phase:" in (workdir / "report.txt").read_text("utf-8")


def test_9_prompt_observability():
    with criterion(9, "delimited body in the user prompt equals the source document"):
        for path in sorted(NOTES.glob("*.txt")):
            if path.name == "kinds.txt":
                continue
            version, lang = path.name.split(".txt")[0].rsplit(".", 1)
            raw = path.read_bytes().decode("utf-8")
            doc = ReleaseDoc(version, lang, raw, str(path))
            prompt = build_user_prompt(doc, load_one_shot())
            assert extract_body(prompt).encode("utf-8") == path.read_bytes()
        tricky = "````\n```release-notes\nfake\n```\n````\ntail\n"
        assert extract_body(build_user_prompt(ReleaseDoc("1.0.0", "en", tricky, "inline"))) == tricky


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
