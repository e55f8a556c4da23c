"""Data model for migration scenarios and the taxonomies that group them.

Every type here is an immutable value. Invariants are enforced at
construction, so a ``Scenario`` or ``Taxonomy`` that exists is well-formed.
"""

from __future__ import annotations

import enum
import functools
import hashlib
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Optional

from .errors import InvalidInputError

TABLE_COLUMNS: tuple[str, ...] = (
    "Category",
    "Migration Flow",
    "Summary",
    "Artifacts",
    "Example code in source version",
    "Example code in target version",
    "Degree of Difficulty",
    "Degree of impact in SE/QSE",
    "References",
)

# Classification facet attribute -> display label used inside the Category cell.
FACET_LABELS: dict[str, str] = {
    "structure": "Structure",
    "language_shift": "Language",
    "implication": "Implication",
    "module": "Module",
    "change_type": "Type",
    "se_refactoring": "SE Refactoring",
}

# Suggested (non-exhaustive) labels per facet. Anything else is accepted but
# reported as a warning by the validator.
SUGGESTED_LABELS: dict[str, frozenset[str]] = {
    "structure": frozenset({"reorganization", "package", "module", "inheritance"}),
    "language_shift": frozenset({"python", "rust", "c++"}),
    "implication": frozenset(
        {
            "primitive",
            "gate",
            "algorithm",
            "transpilation",
            "organization",
            "parameterization",
            "class",
            "method",
        }
    ),
    "module": frozenset(
        {
            "q-aer",
            "q-aqua",
            "q-terra",
            "q-ignis",
            "q-ibmquantum",
            "q-experiments",
            "q-chemistry",
            "q-optimization",
            "q-finance",
            "q-ml",
            "q-nature",
        }
    ),
    "change_type": frozenset(
        {"increased functionality", "upgrade", "deprecation", "bug fixes"}
    ),
    "se_refactoring": frozenset(
        {"usability", "extensibility", "readability", "modularity", "security", "flexibility"}
    ),
}

_VERSION_RE = re.compile(r"^v?(\d+)\.(\d+)(?:\.(\d+))?$")
_KEYWORD_SPLIT_RE = re.compile(r"[,;\s]+")
_WS_RE = re.compile(r"\s+")


# --------------------------------------------------------------------------
# versions
# --------------------------------------------------------------------------


def parse_version(text: str) -> tuple[int, int, int]:
    """Parse ``major.minor[.patch]`` (optional leading ``v``) into a tuple."""
    m = _VERSION_RE.match(text.strip()) if isinstance(text, str) else None
    if m is None:
        raise InvalidInputError(f"not a dotted numeric version: {text!r}")
    major, minor, patch = m.groups()
    return int(major), int(minor), int(patch or 0)


def canonical_version(text: str) -> str:
    return "{}.{}.{}".format(*parse_version(text))


@dataclass(frozen=True, order=False)
class VersionFlow:
    source: str
    target: str

    def __post_init__(self) -> None:
        src, tgt = canonical_version(self.source), canonical_version(self.target)
        if parse_version(src) >= parse_version(tgt):
            raise InvalidInputError(f"source {src} does not precede target {tgt}")
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", tgt)

    @classmethod
    def parse(cls, text: str) -> "VersionFlow":
        """Parse ``"0.45.0 -> 0.46.0"``; ``→`` is accepted in place of ``->``."""
        parts = re.split(r"\s*(?:->|→)\s*", text.strip())
        if len(parts) != 2:
            raise InvalidInputError(f"not a version flow: {text!r}")
        return cls(parts[0], parts[1])

    def __str__(self) -> str:
        return f"{self.source} -> {self.target}"

    @property
    def slug(self) -> str:
        return f"{self.source}_{self.target}"


# --------------------------------------------------------------------------
# keywords and identity
# --------------------------------------------------------------------------


def split_keywords(raw: str) -> list[str]:
    """Split on commas, semicolons and whitespace runs, keeping original casing.

    Duplicates (compared case-insensitively) are dropped, first one wins.
    """
    seen: set[str] = set()
    out: list[str] = []
    for piece in _KEYWORD_SPLIT_RE.split(raw or ""):
        piece = piece.strip().strip("`")
        if not piece:
            continue
        key = piece.casefold()
        if key not in seen:
            seen.add(key)
            out.append(piece)
    return out


def normalize_keywords(raw: str) -> tuple[str, ...]:
    """Split, fold and deduplicate a keyword string, preserving first-seen order.

    >>> normalize_keywords("execute;execute, Execute")
    ('execute',)
    """
    return tuple(k.casefold() for k in split_keywords(raw))


def normalize_summary(summary: str) -> str:
    return _WS_RE.sub(" ", summary).strip().casefold()


def scenario_id(flow: VersionFlow, summary: str, artifacts: Iterable[str]) -> str:
    """Deterministic 16-hex-digit id for a scenario.

    Insensitive to keyword order, casing and surrounding whitespace.
    Code examples are deliberately excluded.
    """
    norm = normalize_summary(summary or "")
    if not norm:
        raise InvalidInputError("scenario summary is empty")
    keys = sorted({a.strip().casefold() for a in artifacts if a and a.strip()})
    payload = json.dumps([flow.source, flow.target, norm, keys], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


# --------------------------------------------------------------------------
# classification dimensions
# --------------------------------------------------------------------------


def _clean_label(value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    value = _WS_RE.sub(" ", str(value)).strip()
    return value or None


@dataclass(frozen=True)
class Classification:
    structure: Optional[str] = None
    language_shift: Optional[str] = None
    implication: Optional[str] = None
    module: Optional[str] = None
    change_type: Optional[str] = None
    se_refactoring: Optional[str] = None

    def __post_init__(self) -> None:
        for name in FACET_LABELS:
            object.__setattr__(self, name, _clean_label(getattr(self, name)))
        if not self.facets():
            raise InvalidInputError("classification needs at least one facet")

    def facets(self) -> dict[str, str]:
        return {n: getattr(self, n) for n in FACET_LABELS if getattr(self, n) is not None}

    def folded(self) -> dict[str, str]:
        return {n: v.casefold() for n, v in self.facets().items()}

    def out_of_vocabulary(self) -> list[tuple[str, str]]:
        """(facet, label) pairs whose label is not among the suggested ones."""
        out = []
        for name, value in self.facets().items():
            vocab = SUGGESTED_LABELS[name]
            # "Python -> Rust" style labels are checked part by part
            parts = [p for p in re.split(r"\s*(?:->|→|/|,)\s*", value.casefold()) if p]
            if not all(p in vocab for p in parts):
                out.append((name, value))
        return out


@functools.total_ordering
class Difficulty(enum.Enum):
    MINIMAL = "Minimal"
    LOW = "Low"
    MODERATE = "Moderate"
    HIGH = "High"

    @property
    def rank(self) -> int:
        return _DIFFICULTY_ORDER.index(self)

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, Difficulty):
            return NotImplemented
        return self.rank < other.rank

    @classmethod
    def parse(cls, text: str) -> "Difficulty":
        key = (text or "").strip().casefold()
        for member in cls:
            if member.value.casefold() == key:
                return member
        raise InvalidInputError(f"unknown difficulty level: {text!r}")

    def __str__(self) -> str:
        return self.value


_DIFFICULTY_ORDER = (Difficulty.MINIMAL, Difficulty.LOW, Difficulty.MODERATE, Difficulty.HIGH)


def compare_difficulty(a: Difficulty, b: Difficulty) -> int:
    """Three-way comparison: -1, 0 or 1."""
    return (a.rank > b.rank) - (a.rank < b.rank)


IMPACT_DOMAINS = ("SE", "QSE")


@dataclass(frozen=True)
class ImpactDomain:
    domains: frozenset[str]

    def __post_init__(self) -> None:
        domains = frozenset(str(d).strip().upper() for d in self.domains)
        if not domains:
            raise InvalidInputError("impact domain set is empty")
        unknown = domains - set(IMPACT_DOMAINS)
        if unknown:
            raise InvalidInputError(f"unknown impact domain(s): {sorted(unknown)}")
        object.__setattr__(self, "domains", domains)

    @classmethod
    def parse(cls, text: str) -> "ImpactDomain":
        """Accepts ``SE``, ``QSE``, ``SE/QSE``, ``SE and QSE``, ``SE, QSE`` ..."""
        tokens = [
            t
            for t in re.split(r"\s*(?:/|,|&|\+|\band\b|\bor\b|\s)\s*", (text or "").strip(), flags=re.I)
            if t
        ]
        if not tokens:
            raise InvalidInputError("impact cell is empty")
        return cls(frozenset(tokens))

    def __str__(self) -> str:
        return "/".join(d for d in IMPACT_DOMAINS if d in self.domains)


# --------------------------------------------------------------------------
# provenance
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Provenance:
    kind: str
    name: Optional[str] = None
    parts: tuple["Provenance", ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("manual", "model", "merged"):
            raise InvalidInputError(f"unknown provenance kind: {self.kind!r}")
        if self.kind == "model" and not self.name:
            raise InvalidInputError("model provenance needs a model name")
        if self.kind == "merged" and not self.parts:
            raise InvalidInputError("merged provenance needs contributing parts")
        object.__setattr__(self, "parts", tuple(self.parts))

    @classmethod
    def manual(cls) -> "Provenance":
        return cls("manual")

    @classmethod
    def model(cls, name: str) -> "Provenance":
        return cls("model", name)

    @classmethod
    def merged(cls, *parts: "Provenance") -> "Provenance":
        return cls("merged", None, tuple(parts))

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.name is not None:
            out["name"] = self.name
        if self.parts:
            out["parts"] = [p.to_dict() for p in self.parts]
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "Provenance":
        return cls(
            data["kind"],
            data.get("name"),
            tuple(cls.from_dict(p) for p in data.get("parts", ())),
        )

    def __str__(self) -> str:
        if self.kind == "model":
            return f"model:{self.name}"
        if self.kind == "merged":
            return "merged(" + "+".join(str(p) for p in self.parts) + ")"
        return "manual"


# --------------------------------------------------------------------------
# scenarios and taxonomies
# --------------------------------------------------------------------------


_BR_TAG_RE = re.compile(r"<br\s*/?>", re.IGNORECASE)


def _canonical_code(text: Optional[str]) -> str:
    # Table cells encode line breaks as <br> and are trimmed, so a literal tag
    # and surrounding whitespace cannot survive a markdown round trip.
    return _BR_TAG_RE.sub("\n", text or "").strip()


@dataclass(frozen=True)
class Scenario:
    classification: Classification
    flow: VersionFlow
    summary: str
    artifacts: tuple[str, ...]
    difficulty: Difficulty
    impact: ImpactDomain
    source_example: str = ""
    target_example: str = ""
    references: tuple[str, ...] = ()
    provenance: Provenance = field(default_factory=Provenance.manual)
    id: str = field(init=False, default="")

    def __post_init__(self) -> None:
        summary = (self.summary or "").strip()
        if not summary:
            raise InvalidInputError("scenario summary is empty")
        if "\n" in summary or "\r" in summary:
            raise InvalidInputError("scenario summary spans multiple lines")
        object.__setattr__(self, "summary", summary)

        if isinstance(self.artifacts, str):
            raise InvalidInputError("artifacts must be a sequence of keywords; see split_keywords")
        artifacts = tuple(a.strip() for a in self.artifacts)
        if not artifacts:
            raise InvalidInputError("scenario has no artifacts")
        if any(not a for a in artifacts):
            raise InvalidInputError("empty artifact keyword")
        if len({a.casefold() for a in artifacts}) != len(artifacts):
            raise InvalidInputError(f"duplicate artifact keywords: {artifacts}")
        object.__setattr__(self, "artifacts", artifacts)
        object.__setattr__(self, "references", tuple(r.strip() for r in self.references if r.strip()))
        object.__setattr__(self, "source_example", _canonical_code(self.source_example))
        object.__setattr__(self, "target_example", _canonical_code(self.target_example))
        object.__setattr__(self, "id", scenario_id(self.flow, summary, artifacts))


def _utcnow() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


@dataclass(frozen=True)
class TaxonomyMeta:
    created_at: datetime = field(default_factory=_utcnow)
    generator: str = "manual"
    source_checksum: Optional[str] = None


@dataclass(frozen=True)
class Taxonomy:
    flow: VersionFlow
    scenarios: tuple[Scenario, ...] = ()
    meta: TaxonomyMeta = field(default_factory=TaxonomyMeta)

    def __post_init__(self) -> None:
        scenarios = tuple(self.scenarios)
        seen: set[str] = set()
        for s in scenarios:
            if s.flow != self.flow:
                raise InvalidInputError(
                    f"scenario {s.id} has flow {s.flow}, taxonomy is {self.flow}"
                )
            if s.id in seen:
                raise InvalidInputError(f"duplicate scenario id {s.id}")
            seen.add(s.id)
        object.__setattr__(self, "scenarios", scenarios)

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    def by_id(self) -> dict[str, Scenario]:
        return {s.id: s for s in self.scenarios}
