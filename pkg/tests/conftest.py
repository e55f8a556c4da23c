from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from qmigtax.ingest import CorpusStore, load_release_notes
from qmigtax.parser import parse_markdown

FIXTURES = Path(__file__).parent / "fixtures"
NOTES = FIXTURES / "release_notes"


def fixture_kinds() -> dict[str, str]:
    lines = (NOTES / "kinds.txt").read_text("utf-8").split("\n")
    return dict(ln.split() for ln in lines if ln.strip())


def read_md(name: str):
    return parse_markdown((FIXTURES / name).read_text("utf-8"))


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def corpus(tmp_path) -> CorpusStore:
    """All thirteen English fixture documents imported into a fresh store."""
    store = CorpusStore(tmp_path / "corpus")
    for version, kind in fixture_kinds().items():
        store.write(load_release_notes(NOTES / f"{version}.en.txt", version, "en", kind=kind))
    return store


@pytest.fixture
def long_body() -> str:
    """Exactly 80,000 characters of plain ASCII prose."""
    line = "Deprecated APIs were removed; use transpile() and backend.run().\n"
    text = (line * (80_000 // len(line) + 1))[:80_000]
    assert len(text) == 80_000
    return text


@pytest.fixture
def workdir(tmp_path, monkeypatch) -> Path:
    """A scratch directory with a config routing the mock endpoint to fixture responses."""
    (tmp_path / "qmigtax.conf").write_text(
        "[qmigtax]\n"
        "corpus_dir = corpus\n"
        "runs_dir = runs\n"
        "reports_dir = reports\n"
        "\n"
        "[endpoint mock]\n"
        "base_url = mock://\n"
        "context_window = 32768\n"
        f"response_dir = {FIXTURES / 'responses'}\n",
        encoding="utf-8",
    )
    shutil.copytree(FIXTURES / "manual", tmp_path / "manual")
    monkeypatch.chdir(tmp_path)
    return tmp_path


class _Server:
    """A throwaway local HTTP server driven by a ``route(method, path, headers, body)`` callable."""

    def __init__(self, route):
        import threading
        from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

        self.requests = []
        server_self = self

        class Handler(BaseHTTPRequestHandler):
            def _serve(self, method):
                length = int(self.headers.get("Content-Length") or 0)
                body = self.rfile.read(length) if length else b""
                server_self.requests.append((method, self.path, dict(self.headers), body))
                status, ctype, payload = route(method, self.path, self.headers, body)
                data = payload.encode("utf-8") if isinstance(payload, str) else payload
                self.send_response(status)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_GET(self):
                self._serve("GET")

            def do_POST(self):
                self._serve("POST")

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}"
        self.thread = threading.Thread(target=self.httpd.serve_forever, args=(0.02,), daemon=True)
        self.thread.start()

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def http_server():
    started = []

    def start(route):
        s = _Server(route)
        started.append(s)
        return s

    yield start
    for s in started:
        s.close()


def small_fixture_comparisons(limit: int = 6):
    """Every (name, manual, auto) pairing of shipped fixtures sharing a flow, both sides <= ``limit`` rows.

    Manual-side fixtures pair with every same-flow fixture, themselves included.
    """
    from qmigtax.model import Provenance

    names = sorted(
        str(p.relative_to(FIXTURES))
        for p in FIXTURES.rglob("*.md")
    )
    loaded = {}
    for name in names:
        tax, _ = parse_markdown((FIXTURES / name).read_text("utf-8"), provenance=Provenance.model("fixture"))
        if 0 < len(tax) <= limit:
            loaded[name] = tax
    out = []
    for m_name, m in loaded.items():
        for a_name, a in loaded.items():
            if m.flow == a.flow:
                out.append((f"{m_name} vs {a_name}", m, a))
    return out


# ---- acceptance summary ----------------------------------------------------

ACCEPTANCE_RESULTS: dict[int, tuple[str, bool]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        title, ok = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {n}: {title}")
