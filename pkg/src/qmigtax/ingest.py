"""Release-notes retrieval, verification and size accounting.

Documents live in a corpus directory laid out as::

    corpus/<version>/<language>.txt
    corpus/<version>/<language>.meta     # flat key = value sidecar

Bodies are read and written as raw UTF-8 bytes so checksums never depend on
platform newline translation.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
import re
import statistics
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

import requests

from .errors import (
    ExtractionError,
    InvalidInputError,
    TransportError,
    UnknownVersionError,
)
from .model import canonical_version, parse_version

LANGUAGES = ("en", "es")
RELEASE_KINDS = ("major", "minor", "patch", "bug-fix", "prelude")
EXCLUDED_KINDS = frozenset({"patch", "bug-fix", "prelude"})

# Context windows the size report flags against (32K and 128K tokens).
DEFAULT_WINDOWS = (32_768, 131_072)

DEFAULT_URL_TEMPLATE = "{base}/{version}"


class Tokenizer(Protocol):
    def count(self, text: str) -> int: ...


@dataclass(frozen=True)
class CharRatioTokenizer:
    """ceil(len(text) / chars_per_token)."""

    chars_per_token: int = 4

    def count(self, text: str) -> int:
        return math.ceil(len(text) / self.chars_per_token)


_default_tokenizer: Tokenizer = CharRatioTokenizer()


def set_default_tokenizer(tokenizer: Tokenizer) -> Tokenizer:
    """Swap in an exact tokenizer; returns the previous one."""
    global _default_tokenizer
    previous, _default_tokenizer = _default_tokenizer, tokenizer
    return previous


def estimate_tokens(body: str, tokenizer: Optional[Tokenizer] = None) -> int:
    return (tokenizer or _default_tokenizer).count(body)


def checksum(body: str) -> str:
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


def _now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def _check_language(language: str) -> str:
    if language not in LANGUAGES:
        raise InvalidInputError(f"unsupported language tag {language!r}; expected one of {LANGUAGES}")
    return language


@dataclass(frozen=True)
class ReleaseDoc:
    version: str
    language: str
    body: str
    source: str
    fetched_at: datetime = field(default_factory=_now)
    kind: Optional[str] = None
    token_estimate: int = field(init=False, default=0)
    checksum: str = field(init=False, default="")

    def __post_init__(self) -> None:
        object.__setattr__(self, "version", canonical_version(self.version))
        _check_language(self.language)
        if self.kind is not None and self.kind not in RELEASE_KINDS:
            raise InvalidInputError(f"unknown release kind {self.kind!r}")
        object.__setattr__(self, "token_estimate", estimate_tokens(self.body))
        object.__setattr__(self, "checksum", checksum(self.body))


# --------------------------------------------------------------------------
# retrieval
# --------------------------------------------------------------------------


class _TextExtractor(HTMLParser):
    _skip = {"script", "style", "nav", "header", "footer", "head"}

    def __init__(self) -> None:
        super().__init__()
        self._depth = 0
        self._out = io.StringIO()

    def handle_starttag(self, tag, attrs):
        if tag in self._skip:
            self._depth += 1
        elif tag in ("p", "li", "br", "div", "h1", "h2", "h3", "h4", "pre", "tr"):
            self._out.write("\n")

    def handle_endtag(self, tag):
        if tag in self._skip and self._depth:
            self._depth -= 1

    def handle_data(self, data):
        if not self._depth:
            self._out.write(data)

    def text(self) -> str:
        lines = [ln.rstrip() for ln in self._out.getvalue().splitlines()]
        return re.sub(r"\n{3,}", "\n\n", "\n".join(lines)).strip() + "\n"


def html_to_text(html: str) -> str:
    parser = _TextExtractor()
    parser.feed(html)
    parser.close()
    return parser.text()


def fetch_release_notes(
    version: str,
    language: str,
    source_base: str,
    *,
    store: Optional["CorpusStore"] = None,
    kind: Optional[str] = None,
    url_template: str = DEFAULT_URL_TEMPLATE,
    session: Optional[requests.Session] = None,
    timeout: float = 30.0,
) -> ReleaseDoc:
    """Download one version's release notes.

    The language goes out both as ``Accept-Language`` (the docs site localizes
    on browser preference) and as the ``{language}`` template field. HTML
    responses are reduced to plain text.
    """
    version = canonical_version(version)
    _check_language(language)
    if not source_base.startswith(("http://", "https://")):
        raise InvalidInputError(f"source base must be an HTTP(S) URL: {source_base!r}")
    major, minor, patch = parse_version(version)
    url = url_template.format(
        base=source_base.rstrip("/"),
        version=version,
        language=language,
        minor=f"{major}.{minor}",
    )
    http = session or requests.Session()
    try:
        resp = http.get(url, headers={"Accept-Language": language}, timeout=timeout)
    except (requests.ConnectionError, requests.Timeout) as exc:
        raise TransportError(f"fetching {url} failed: {exc}") from exc
    if resp.status_code == 404:
        raise UnknownVersionError(f"no release notes for {version} at {url}")
    if resp.status_code >= 500:
        raise TransportError(f"{url} answered {resp.status_code}")
    if resp.status_code >= 400:
        raise TransportError(f"{url} answered {resp.status_code}", retryable=False)

    resp.encoding = resp.encoding or "utf-8"
    body = resp.text
    if "html" in resp.headers.get("Content-Type", ""):
        body = html_to_text(body)
    if not body.strip():
        raise ExtractionError(f"empty release notes body from {url}")

    doc = ReleaseDoc(version, language, body, source=url, kind=kind)
    if store is not None:
        store.write(doc)
    return doc


def load_release_notes(path, version: str, language: str, *, kind: Optional[str] = None) -> ReleaseDoc:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError as exc:
        raise InvalidInputError(f"release notes file not found: {path}") from exc
    try:
        body = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ExtractionError(f"{path} is not valid UTF-8: {exc}") from exc
    if not body.strip():
        raise ExtractionError(f"{path} is empty")
    return ReleaseDoc(version, language, body, source=str(path), kind=kind)


# --------------------------------------------------------------------------
# corpus store
# --------------------------------------------------------------------------


class CorpusStore:
    """On-disk corpus; writes for the same version are serialized."""

    def __init__(self, root) -> None:
        self.root = Path(root)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock(self, version: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(version, threading.Lock())

    def body_path(self, version: str, language: str) -> Path:
        return self.root / canonical_version(version) / f"{language}.txt"

    def meta_path(self, version: str, language: str) -> Path:
        return self.root / canonical_version(version) / f"{language}.meta"

    def write(self, doc: ReleaseDoc) -> Path:
        body_path = self.body_path(doc.version, doc.language)
        meta = configparser.ConfigParser(interpolation=None)
        meta["doc"] = {
            "version": doc.version,
            "language": doc.language,
            "source": doc.source,
            "checksum": doc.checksum,
            "fetched_at": doc.fetched_at.isoformat(),
            "kind": doc.kind or "",
        }
        with self._lock(doc.version):
            body_path.parent.mkdir(parents=True, exist_ok=True)
            _atomic_write(body_path, doc.body.encode("utf-8"))
            buf = io.StringIO()
            meta.write(buf)
            _atomic_write(self.meta_path(doc.version, doc.language), buf.getvalue().encode("utf-8"))
        return body_path

    def read_meta(self, version: str, language: str) -> dict[str, str]:
        path = self.meta_path(version, language)
        if not path.exists():
            return {}
        parser = configparser.ConfigParser(interpolation=None)
        parser.read(path, encoding="utf-8")
        return dict(parser["doc"]) if parser.has_section("doc") else {}

    def read(self, version: str, language: str) -> ReleaseDoc:
        path = self.body_path(version, language)
        meta = self.read_meta(version, language)
        doc = load_release_notes(path, version, language, kind=meta.get("kind") or None)
        if meta.get("checksum") and meta["checksum"] != doc.checksum:
            raise ExtractionError(f"{path} does not match its recorded checksum")
        fetched = meta.get("fetched_at")
        return ReleaseDoc(
            doc.version,
            language,
            doc.body,
            source=meta.get("source") or str(path),
            fetched_at=datetime.fromisoformat(fetched) if fetched else doc.fetched_at,
            kind=doc.kind,
        )

    def versions(self) -> list[str]:
        if not self.root.is_dir():
            return []
        found = []
        for child in self.root.iterdir():
            try:
                found.append(canonical_version(child.name))
            except InvalidInputError:
                continue
        return sorted(found, key=parse_version)

    def load_all(self, language: str, versions: Optional[Iterable[str]] = None) -> list[ReleaseDoc]:
        wanted = versions if versions is not None else self.versions()
        return [self.read(v, language) for v in wanted if self.body_path(v, language).exists()]


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


# --------------------------------------------------------------------------
# verification, scoping, size report
# --------------------------------------------------------------------------


def normalize_whitespace(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    missing_sentinels: tuple[str, ...] = ()
    extra_notes: tuple[str, ...] = ()


def verify_extraction(doc: ReleaseDoc, golden: Sequence[str]) -> VerificationReport:
    """Check that every golden sentinel appears in the body (whitespace-insensitive)."""
    if not golden:
        raise InvalidInputError("at least one golden sentinel is required")
    flat_body = normalize_whitespace(doc.body)
    missing, notes = [], []
    for sentinel in golden:
        if sentinel in doc.body:
            continue
        if normalize_whitespace(sentinel) in flat_body:
            notes.append(f"matched only after whitespace normalization: {sentinel!r}")
        else:
            missing.append(sentinel)
    return VerificationReport(not missing, tuple(missing), tuple(notes))


def release_in_scope(version: str, kind: str) -> bool:
    """Patch, bug-fix and prelude releases carry no refactoring scenarios."""
    parse_version(version)
    if kind not in RELEASE_KINDS:
        raise InvalidInputError(f"unknown release kind {kind!r}; expected one of {RELEASE_KINDS}")
    return kind not in EXCLUDED_KINDS


@dataclass(frozen=True)
class SizeRow:
    version: str
    language: str
    characters: int
    tokens: int
    over_budget: dict[int, bool]


@dataclass(frozen=True)
class SizeDistribution:
    rows: tuple[SizeRow, ...]
    windows: tuple[int, ...]
    min: int
    median: float
    max: int

    def over_budget_count(self, window: int) -> int:
        return sum(r.over_budget[window] for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "windows": list(self.windows),
            "min": self.min,
            "median": self.median,
            "max": self.max,
            "rows": [
                {
                    "version": r.version,
                    "language": r.language,
                    "characters": r.characters,
                    "tokens": r.tokens,
                    "over_budget": {str(w): r.over_budget[w] for w in self.windows},
                }
                for r in self.rows
            ],
        }


def size_distribution(
    docs: Sequence[ReleaseDoc],
    windows: Sequence[int] = DEFAULT_WINDOWS,
    reserve: int = 0,
) -> SizeDistribution:
    """Per-version token counts with min/median/max and context-window flags.

    A document is over budget for a window when its tokens plus ``reserve``
    exceed the window.
    """
    if not docs:
        raise InvalidInputError("size distribution needs at least one document")
    ordered = sorted(docs, key=lambda d: (parse_version(d.version), d.language))
    rows = tuple(
        SizeRow(
            d.version,
            d.language,
            len(d.body),
            d.token_estimate,
            {w: d.token_estimate + reserve > w for w in windows},
        )
        for d in ordered
    )
    counts = [r.tokens for r in rows]
    return SizeDistribution(rows, tuple(windows), min(counts), statistics.median(counts), max(counts))
