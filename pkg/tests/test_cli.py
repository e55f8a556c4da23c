import json
import shutil
import subprocess
import sys

import pytest

from qmigtax.cli import main
from qmigtax.gateway import list_runs, replay
from qmigtax.parser import parse_record

from conftest import FIXTURES, NOTES, fixture_kinds


def run(*argv):
    return main(list(argv))


def import_notes(*versions, lang="en"):
    kinds = fixture_kinds()
    for v in versions:
        assert run("fetch", "--version", v, "--from", str(NOTES / f"{v}.{lang}.txt"), "--kind", kinds[v], "--lang", lang) == 0


class TestUsage:
    def test_no_command(self, capsys):
        assert run() == 2

    def test_unknown_command(self, capsys):
        assert run("frobnicate") == 2
        assert "invalid choice" in capsys.readouterr().err

    def test_unknown_flag(self):
        assert run("validate", "x.md", "--bogus") == 2

    def test_help(self, capsys):
        assert run("--help") == 0
        out = capsys.readouterr().out
        for cmd in ("fetch", "verify", "tokens", "prompt", "generate", "parse", "validate", "compare", "merge", "report"):
            assert cmd in out

    def test_bad_threshold(self, workdir):
        assert run("--threshold", "1.5", "compare", "--manual", "a", "--auto", "b") == 2

    def test_missing_input(self, workdir):
        assert run("validate", "nope.md") == 2

    def test_globals_after_subcommand(self, workdir):
        import_notes("1.0.0")
        assert run("tokens", "--lang", "en") == 0


class TestIngestCommands:
    def test_fetch_from_and_verify(self, workdir, capsys):
        import_notes("0.46.0")
        assert (workdir / "corpus" / "0.46.0" / "en.txt").exists()
        assert run("verify", "--version", "0.46.0", "--golden", str(FIXTURES / "golden" / "0.46.0.en.txt")) == 0
        assert "PASS" in capsys.readouterr().out

    def test_verify_failure(self, workdir, tmp_path):
        import_notes("0.46.0")
        golden = tmp_path / "g.txt"
        golden.write_text("this sentence is not in the notes\n")
        assert run("verify", "--version", "0.46.0", "--golden", str(golden)) == 1

    def test_fetch_offline_missing(self, workdir):
        assert run("--offline", "fetch", "--version", "1.0.0") == 3

    def test_fetch_offline_present(self, workdir):
        import_notes("1.0.0")
        assert run("fetch", "--version", "1.0.0", "--offline") == 0

    def test_fetch_http(self, workdir, http_server):
        srv = http_server(lambda m, path, h, b: (200, "text/plain", "notes") if path == "/1.0" else (404, "text/plain", ""))
        assert run("fetch", "--version", "1.0.0", "--source-base", srv.url) == 0
        assert run("fetch", "--version", "9.9.9", "--source-base", srv.url) == 3

    def test_spanish_import(self, workdir):
        import_notes("0.46.0", lang="es")
        assert (workdir / "corpus" / "0.46.0" / "es.txt").exists()

    def test_tokens(self, workdir, capsys):
        import_notes(*fixture_kinds())
        assert run("tokens") == 0
        out = capsys.readouterr().out
        assert "13 documents" in out
        record = json.loads((workdir / "reports" / "tokens" / "size_distribution.en.record").read_text())
        assert len(record["rows"]) == 13

    def test_tokens_empty_corpus(self, workdir):
        assert run("tokens") == 2


class TestModelCommands:
    def test_prompt(self, workdir):
        import_notes("1.0.0")
        assert run("prompt", "--version", "1.0.0", "--endpoint", "mock") == 0
        assert sorted(p.name for p in (workdir / "runs" / "mock" / "1.0.0").iterdir()) == [
            "bundle.json", "system.txt", "user.txt"
        ]

    def test_prompt_needs_endpoint(self, workdir):
        import_notes("1.0.0")
        assert run("prompt", "--version", "1.0.0") == 2

    def test_prompt_unknown_endpoint(self, workdir):
        import_notes("1.0.0")
        assert run("prompt", "--version", "1.0.0", "--endpoint", "nope") == 3

    def test_prompt_over_budget(self, workdir):
        import_notes("1.0.0")
        assert run("prompt", "--version", "1.0.0", "--endpoint", "mock", "--reserve", "40000") == 1

    def test_generate_mock(self, workdir):
        import_notes("1.0.0")
        assert run("generate", "--version", "1.0.0", "--endpoint", "mock") == 0
        (log,) = list_runs(workdir / "runs", "1.0.0")
        assert replay(log) == (FIXTURES / "responses" / "1.0.0.md").read_text("utf-8")

    def test_generate_missing_credential(self, workdir, monkeypatch):
        monkeypatch.delenv("OPENAI_API_KEY", raising=False)
        import_notes("1.0.0")
        assert run("generate", "--version", "1.0.0", "--endpoint", "gpt-4o") == 3
        assert list_runs(workdir / "runs", "1.0.0") == []


class TestTaxonomyCommands:
    def test_validate_clean(self, workdir):
        assert run("validate", str(FIXTURES / "twenty.md")) == 0

    def test_validate_defects(self, workdir, capsys):
        assert run("validate", str(FIXTURES / "defects.md")) == 1
        out = capsys.readouterr().out
        for kind in ("empty-cell", "duplicate-row", "bad-enum", "multiline-cell"):
            assert kind in out

    def test_validate_no_table(self, workdir, tmp_path):
        p = tmp_path / "prose.md"
        p.write_text("nothing tabular\n")
        assert run("validate", str(p)) == 1

    def test_parse_and_validate_record(self, workdir):
        out = workdir / "m.record"
        assert run("parse", "manual/0.46.0_1.0.0.md", "--out", str(out)) == 0
        assert len(parse_record(out.read_text())) == 6
        assert run("validate", str(out)) == 0

    def test_parse_default_name(self, workdir):
        assert run("parse", "manual/0.46.0_1.0.0.md") == 0
        assert (workdir / "manual" / "taxonomy.0.46.0_1.0.0.record").exists()

    def test_compare_identical_records(self, workdir, capsys):
        run("parse", "manual/0.46.0_1.0.0.md", "--out", "m.record")
        shutil.copy(workdir / "m.record", workdir / "a.record")
        capsys.readouterr()
        assert run("compare", "--manual", "m.record", "--auto", "a.record") == 0
        assert "phase:   Future" in capsys.readouterr().out

    def test_compare_writes_reports(self, workdir):
        assert run("compare", "--manual", "manual/0.46.0_1.0.0.md", "--auto", str(FIXTURES / "responses" / "1.0.0.md"), "--model", "mock") == 0
        out = workdir / "reports" / "0.46.0_1.0.0" / "mock"
        assert (out / "comparison.record").exists()
        assert "phase:   Intermediate" in (out / "comparison.txt").read_text()

    def test_compare_deterministic_files(self, workdir):
        args = ["compare", "--manual", "manual/0.46.0_1.0.0.md", "--auto", str(FIXTURES / "responses" / "1.0.0.md"), "--model", "mock"]
        run(*args)
        txt = workdir / "reports" / "0.46.0_1.0.0" / "mock" / "comparison.txt"
        first = txt.read_bytes()
        run(*args)
        assert txt.read_bytes() == first

    def test_merge_and_report(self, workdir, capsys):
        auto = str(FIXTURES / "responses" / "1.0.0.md")
        run("compare", "--manual", "manual/0.46.0_1.0.0.md", "--auto", auto, "--model", "mock")
        record = workdir / "reports" / "0.46.0_1.0.0" / "mock" / "comparison.record"
        assert run("merge", "--report", str(record), "--out", "merged.md") == 0
        assert run("validate", "merged.md") == 0
        assert run("merge", "--manual", "manual/0.46.0_1.0.0.md", "--auto", auto, "--out", "merged.record") == 0
        assert len(parse_record((workdir / "merged.record").read_text())) == 7
        capsys.readouterr()
        assert run("report", str(record)) == 0
        assert "recall:  83.3%" in capsys.readouterr().out
        assert run("report", "--manual", "manual/0.46.0_1.0.0.md", "--auto", auto, "--out", "r.txt") == 0
        assert (workdir / "r.txt").exists()

    def test_merge_usage(self, workdir):
        assert run("merge", "--manual", "manual/0.46.0_1.0.0.md") == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qmigtax", "--version"], capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0 and "qmigtax" in proc.stdout
