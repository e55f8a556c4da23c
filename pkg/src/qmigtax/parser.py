"""Markdown and record (de)serialization for taxonomies, plus validation.

Markdown parsing is lenient: bad rows are reported as ``Violation`` objects
and skipped, never raised. Only the complete absence of a recognizable
header row is an error.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

from .errors import (
    InvalidInputError,
    NoTableError,
    RecordError,
    SchemaVersionError,
    SerializationError,
)
from .model import (
    FACET_LABELS,
    IMPACT_DOMAINS,
    SUGGESTED_LABELS,
    TABLE_COLUMNS,
    Classification,
    Difficulty,
    ImpactDomain,
    Provenance,
    Scenario,
    Taxonomy,
    TaxonomyMeta,
    VersionFlow,
    split_keywords,
)

HEADER_ROW = "| " + " | ".join(TABLE_COLUMNS) + " |"
SEPARATOR_ROW = "|" + "---|" * len(TABLE_COLUMNS)

RECORD_SCHEMA = "qmigtax.taxonomy"
RECORD_SCHEMA_VERSION = 1

VIOLATION_KINDS = (
    "empty-cell",
    "duplicate-row",
    "bad-enum",
    "multiline-cell",
    "bad-flow",
    "missing-column",
    "extra-column",
    "unparseable-row",
)

CATEGORY, FLOW, SUMMARY, ARTIFACTS, SOURCE_CODE, TARGET_CODE, DIFFICULTY, IMPACT, REFERENCES = TABLE_COLUMNS
CODE_COLUMNS = (SOURCE_CODE, TARGET_CODE)
REQUIRED_COLUMNS = (CATEGORY, FLOW, SUMMARY, ARTIFACTS, DIFFICULTY, IMPACT)
# newlines in these cells are defects; in artifacts/references they just separate items
SINGLE_LINE_COLUMNS = (CATEGORY, FLOW, SUMMARY, DIFFICULTY, IMPACT)

_BR_RE = re.compile(r"<br\s*/?>", re.IGNORECASE)
_CELL_SPLIT_RE = re.compile(r"(?<!\\)\|")
_SEPARATOR_CELL_RE = re.compile(r"^:?-{3,}:?$")
_MD_LINK_RE = re.compile(r"\[[^\]]*\]\(([^)\s]+)\)")

_FACET_KEYS = {label.casefold(): attr for attr, label in FACET_LABELS.items()}
_FACET_KEYS.update({"language shift": "language_shift", "change type": "change_type", "se": "se_refactoring"})


@dataclass(frozen=True)
class Violation:
    row_index: int
    column: str
    kind: str
    detail: str
    severity: str = "error"

    def __post_init__(self) -> None:
        if self.kind not in VIOLATION_KINDS:
            raise InvalidInputError(f"unknown violation kind {self.kind!r}")
        if self.severity not in ("error", "warning"):
            raise InvalidInputError(f"unknown severity {self.severity!r}")

    def __str__(self) -> str:
        where = "header" if self.row_index == 0 else f"row {self.row_index}"
        return f"{self.severity}: {where}, {self.column}: {self.kind}: {self.detail}"


def errors_only(violations) -> list[Violation]:
    return [v for v in violations if v.severity == "error"]


# --------------------------------------------------------------------------
# rendering
# --------------------------------------------------------------------------


def _escape(text: str) -> str:
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    return text.replace("|", "\\|").replace("\n", "<br>")


def render_category(c: Classification) -> str:
    return "; ".join(f"{FACET_LABELS[name]}: {value}" for name, value in c.facets().items())


def render_cells(s: Scenario) -> list[str]:
    return [
        render_category(s.classification),
        str(s.flow),
        s.summary,
        ", ".join(s.artifacts),
        s.source_example,
        s.target_example,
        str(s.difficulty),
        str(s.impact),
        ", ".join(s.references),
    ]


def render_row(s: Scenario) -> str:
    """One physical markdown row; line breaks become ``<br>``, pipes are escaped."""
    return "| " + " | ".join(_escape(c) for c in render_cells(s)) + " |"


def serialize_markdown(tax: Taxonomy) -> str:
    problems = errors_only(validate(tax))
    if problems:
        raise SerializationError(
            "refusing to serialize a taxonomy with errors:\n" + "\n".join(map(str, problems)),
            problems,
        )
    lines = [HEADER_ROW, SEPARATOR_ROW]
    lines.extend(render_row(s) for s in tax.scenarios)
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# parsing helpers
# --------------------------------------------------------------------------


def _split_cells(line: str) -> list[str]:
    body = line.strip()
    if body.startswith("|"):
        body = body[1:]
    if body.endswith("|") and not body.endswith("\\|"):
        body = body[:-1]
    return [c.strip() for c in _CELL_SPLIT_RE.split(body)]


def _unescape(cell: str) -> str:
    return cell.replace("\\|", "|")


def _column_key(text: str) -> str:
    return re.sub(r"\s+", " ", text.replace("*", "").replace("`", "")).strip().casefold()


_COLUMN_BY_KEY = {_column_key(c): c for c in TABLE_COLUMNS}


def _match_header(line: str) -> Optional[list[Optional[str]]]:
    if "|" not in line:
        return None
    names = [_COLUMN_BY_KEY.get(_column_key(c)) for c in _split_cells(line)]
    if SUMMARY in names and FLOW in names:
        return names
    return None


def _is_separator(line: str) -> bool:
    cells = _split_cells(line)
    return bool(cells) and all(_SEPARATOR_CELL_RE.match(c.replace(" ", "")) for c in cells)


def _terminated(line: str) -> bool:
    s = line.rstrip()
    return s.endswith("|") and not s.endswith("\\|")


def parse_category(cell: str) -> Classification:
    """``"Structure: Module; Type: deprecation"``.

    Unkeyed labels (common in model output) go to the first free facet among
    change type, implication and structure, in that order, unless they match
    a facet's suggested vocabulary.
    """
    values: dict[str, str] = {}
    loose: list[str] = []
    for part in re.split(r"[;\n]", cell):
        part = part.strip()
        if not part:
            continue
        key, sep, value = part.partition(":")
        attr = _FACET_KEYS.get(_column_key(key)) if sep else None
        if attr and value.strip():
            values[attr] = value.strip()
        else:
            loose.append(part)
    for label in loose:
        folded = label.casefold()
        target = next(
            (a for a, vocab in SUGGESTED_LABELS.items() if folded in vocab and a not in values),
            None,
        )
        if target is None:
            target = next(
                (a for a in ("change_type", "implication", "structure") if a not in values),
                None,
            )
        if target is None:
            raise InvalidInputError(f"cannot place category label {label!r}")
        values[target] = label
    return Classification(**values)


def _parse_references(cell: str) -> tuple[str, ...]:
    links = _MD_LINK_RE.findall(cell)
    rest = _MD_LINK_RE.sub(" ", cell)
    refs = list(links) + [r for r in re.split(r"[\s,;]+", rest) if r]
    seen, out = set(), []
    for r in refs:
        r = r.strip("<>")
        if r and r not in seen:
            seen.add(r)
            out.append(r)
    return tuple(out)


@dataclass
class _RawRow:
    index: int
    text: str
    continued: bool


def _table_blocks(lines: list[str]):
    """Yield (header_names, header_line, rows) for every recognizable table."""
    i = 0
    n = len(lines)
    while i < n:
        header = lines[i]
        names = _match_header(header)
        if names is None:
            i += 1
            continue
        i += 1
        if i < n and _is_separator(lines[i]):
            i += 1
        rows: list[_RawRow] = []
        while i < n:
            line = lines[i]
            if rows and not _terminated(rows[-1].text) and line.strip():
                rows[-1].text += "\n" + line
                rows[-1].continued = True
                i += 1
                continue
            if not line.strip() or "|" not in line or _match_header(line) is not None:
                break
            rows.append(_RawRow(0, line, False))
            i += 1
        yield names, header, rows


# --------------------------------------------------------------------------
# markdown parsing
# --------------------------------------------------------------------------


def _header_violations(names: list[Optional[str]], raw_cells: list[str]) -> list[Violation]:
    out = []
    for col in TABLE_COLUMNS:
        if col not in names:
            out.append(Violation(0, col, "missing-column", f"header lacks column {col!r}"))
    for name, raw in zip(names, raw_cells):
        if name is None:
            out.append(Violation(0, raw or "(blank)", "extra-column", f"unrecognized column {raw!r}"))
    dupes = [c for c, k in Counter(n for n in names if n).items() if k > 1]
    for col in dupes:
        out.append(Violation(0, col, "extra-column", f"column {col!r} appears more than once"))
    return out


def _row_cells(raw: _RawRow, names: list[Optional[str]]) -> tuple[Optional[dict[str, str]], list[Violation]]:
    text = raw.text
    cells = _split_cells(text) if not raw.continued else _split_cells(text.replace("\n", "\x00"))
    if len(cells) != len(names):
        return None, [
            Violation(raw.index, "row", "unparseable-row", f"expected {len(names)} cells, found {len(cells)}")
        ]
    out: dict[str, str] = {}
    problems: list[Violation] = []
    for name, cell in zip(names, cells):
        if name is None or name in out:
            continue
        physical_break = "\x00" in cell
        cell = _BR_RE.sub("\n", _unescape(cell.replace("\x00", "\n")))
        if name in CODE_COLUMNS:
            if physical_break:
                problems.append(
                    Violation(raw.index, name, "multiline-cell", "cell breaks across physical lines")
                )
            out[name] = cell.strip()
        elif name in SINGLE_LINE_COLUMNS and "\n" in cell:
            problems.append(Violation(raw.index, name, "multiline-cell", "line break inside a single-line cell"))
            out[name] = re.sub(r"\s*\n\s*", " ", cell).strip()
        else:
            out[name] = cell.strip()
    return out, problems


def _build_scenario(row: int, cells: dict[str, str], provenance: Provenance):
    """Returns (scenario or None, flow or None, violations)."""
    problems: list[Violation] = []
    for col in REQUIRED_COLUMNS:
        if col not in cells:
            problems.append(Violation(row, col, "unparseable-row", f"required column {col!r} is absent"))
    if problems:
        return None, None, problems

    for col in REQUIRED_COLUMNS:
        if not cells[col]:
            problems.append(Violation(row, col, "empty-cell", f"{col} is empty"))

    flow = classification = difficulty = impact = None
    artifacts: list[str] = []
    if cells[FLOW]:
        try:
            flow = VersionFlow.parse(cells[FLOW])
        except InvalidInputError as exc:
            problems.append(Violation(row, FLOW, "bad-flow", str(exc)))
    if cells[CATEGORY]:
        try:
            classification = parse_category(cells[CATEGORY])
        except InvalidInputError as exc:
            problems.append(Violation(row, CATEGORY, "bad-enum", str(exc)))
    if cells[DIFFICULTY]:
        try:
            difficulty = Difficulty.parse(cells[DIFFICULTY])
        except InvalidInputError:
            problems.append(
                Violation(row, DIFFICULTY, "bad-enum", f"{cells[DIFFICULTY]!r} is not one of Minimal/Low/Moderate/High")
            )
    if cells[IMPACT]:
        try:
            impact = ImpactDomain.parse(cells[IMPACT])
        except InvalidInputError:
            problems.append(
                Violation(row, IMPACT, "bad-enum", f"{cells[IMPACT]!r} is not a subset of {'/'.join(IMPACT_DOMAINS)}")
            )
    if cells[ARTIFACTS]:
        artifacts = split_keywords(cells[ARTIFACTS])
        if not artifacts:
            problems.append(Violation(row, ARTIFACTS, "empty-cell", "no artifact keywords"))
    if problems:
        return None, flow, problems

    try:
        scenario = Scenario(
            classification=classification,
            flow=flow,
            summary=cells[SUMMARY],
            artifacts=tuple(artifacts),
            difficulty=difficulty,
            impact=impact,
            source_example=cells.get(SOURCE_CODE, ""),
            target_example=cells.get(TARGET_CODE, ""),
            references=_parse_references(cells.get(REFERENCES, "")),
            provenance=provenance,
        )
    except InvalidInputError as exc:
        return None, flow, [Violation(row, "row", "unparseable-row", str(exc))]
    return scenario, flow, []


def parse_markdown(
    text: str,
    *,
    flow: Optional[VersionFlow] = None,
    provenance: Optional[Provenance] = None,
    meta: Optional[TaxonomyMeta] = None,
) -> tuple[Taxonomy, list[Violation]]:
    """Parse every recognizable taxonomy table in ``text``.

    Rows are numbered from 1 across all tables; header problems use row 0.
    When ``flow`` is not given, the most common flow among viable rows wins
    and rows with any other flow are reported as ``bad-flow``.
    """
    provenance = provenance or Provenance.manual()
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    blocks = list(_table_blocks(lines))
    if not blocks:
        raise NoTableError("no taxonomy header row found")

    violations: list[Violation] = []
    candidates: list[tuple[int, Scenario]] = []
    seen_flows: list[VersionFlow] = []
    row_no = 0
    for names, raw_header, rows in blocks:
        violations.extend(_header_violations(names, _split_cells(raw_header)))
        for raw in rows:
            row_no += 1
            raw.index = row_no
            cells, problems = _row_cells(raw, names)
            violations.extend(problems)
            if cells is None:
                continue
            scenario, row_flow, problems = _build_scenario(row_no, cells, provenance)
            violations.extend(problems)
            if row_flow is not None:
                seen_flows.append(row_flow)
            if scenario is not None:
                candidates.append((row_no, scenario))

    if flow is None:
        pool = [s.flow for _, s in candidates] or seen_flows
        if not pool:
            raise InvalidInputError("cannot infer the version flow of an empty table; pass flow=")
        counts = Counter(pool)
        top = max(counts.values())
        flow = next(f for f in pool if counts[f] == top)

    kept: list[Scenario] = []
    first_row: dict[str, int] = {}
    for row, s in candidates:
        if s.flow != flow:
            violations.append(Violation(row, FLOW, "bad-flow", f"flow {s.flow} differs from table flow {flow}"))
        elif s.id in first_row:
            violations.append(
                Violation(row, "row", "duplicate-row", f"same scenario as row {first_row[s.id]} (id {s.id})")
            )
        else:
            first_row[s.id] = row
            kept.append(s)

    violations.sort(key=lambda v: v.row_index)
    return Taxonomy(flow, tuple(kept), meta or TaxonomyMeta(generator=str(provenance))), violations


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


def validate(tax: Taxonomy) -> list[Violation]:
    """Re-check every scenario against the schema.

    Error-level findings cannot occur on objects built through the public
    constructors; they catch values patched after construction. Empty
    references and out-of-vocabulary category labels are warnings.
    """
    out: list[Violation] = []
    seen: dict[str, int] = {}
    for row, s in enumerate(tax.scenarios, start=1):
        if not isinstance(s.difficulty, Difficulty):
            out.append(Violation(row, DIFFICULTY, "bad-enum", f"{s.difficulty!r} is not a difficulty level"))
        if not isinstance(s.impact, ImpactDomain) or not s.impact.domains or not s.impact.domains <= set(IMPACT_DOMAINS):
            out.append(Violation(row, IMPACT, "bad-enum", f"{s.impact!r} is not a subset of SE/QSE"))
        if not s.artifacts or any(not a.strip() for a in s.artifacts):
            out.append(Violation(row, ARTIFACTS, "empty-cell", "artifacts are empty"))
        if not s.summary.strip():
            out.append(Violation(row, SUMMARY, "empty-cell", "summary is empty"))
        elif "\n" in s.summary or "\r" in s.summary:
            out.append(Violation(row, SUMMARY, "multiline-cell", "summary spans several lines"))
        if s.flow != tax.flow:
            out.append(Violation(row, FLOW, "bad-flow", f"flow {s.flow} differs from taxonomy flow {tax.flow}"))
        if s.id in seen:
            out.append(Violation(row, "row", "duplicate-row", f"same scenario as row {seen[s.id]}"))
        else:
            seen[s.id] = row
        if not s.references:
            out.append(Violation(row, REFERENCES, "empty-cell", "no references given", "warning"))
        for facet, label in s.classification.out_of_vocabulary():
            out.append(
                Violation(row, CATEGORY, "bad-enum", f"{FACET_LABELS[facet]} label {label!r} is not a suggested value", "warning")
            )
    return out


def validate_markdown(text: str, **kwargs) -> tuple[Taxonomy, list[Violation]]:
    """Parse then validate; parse findings first, duplicates removed."""
    tax, found = parse_markdown(text, **kwargs)
    extra = [v for v in validate(tax) if v not in found]
    return tax, found + extra


# --------------------------------------------------------------------------
# structured records
# --------------------------------------------------------------------------


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "id": s.id,
        "classification": s.classification.facets(),
        "flow": {"source": s.flow.source, "target": s.flow.target},
        "summary": s.summary,
        "artifacts": list(s.artifacts),
        "source_example": s.source_example,
        "target_example": s.target_example,
        "difficulty": s.difficulty.value,
        "impact": [d for d in IMPACT_DOMAINS if d in s.impact.domains],
        "references": list(s.references),
        "provenance": s.provenance.to_dict(),
    }


def scenario_from_dict(d: dict) -> Scenario:
    s = Scenario(
        classification=Classification(**d["classification"]),
        flow=VersionFlow(d["flow"]["source"], d["flow"]["target"]),
        summary=d["summary"],
        artifacts=tuple(d["artifacts"]),
        difficulty=Difficulty.parse(d["difficulty"]),
        impact=ImpactDomain(frozenset(d["impact"])),
        source_example=d.get("source_example", ""),
        target_example=d.get("target_example", ""),
        references=tuple(d.get("references", ())),
        provenance=Provenance.from_dict(d["provenance"]),
    )
    if d.get("id") not in (None, s.id):
        raise RecordError(f"stored id {d['id']} does not match recomputed id {s.id}")
    return s


def taxonomy_to_dict(tax: Taxonomy) -> dict:
    return {
        "schema": RECORD_SCHEMA,
        "schema_version": RECORD_SCHEMA_VERSION,
        "flow": {"source": tax.flow.source, "target": tax.flow.target},
        "meta": {
            "created_at": tax.meta.created_at.isoformat(),
            "generator": tax.meta.generator,
            "source_checksum": tax.meta.source_checksum,
        },
        "scenarios": [scenario_to_dict(s) for s in tax.scenarios],
    }


def taxonomy_from_dict(data: dict) -> Taxonomy:
    if not isinstance(data, dict) or data.get("schema") != RECORD_SCHEMA:
        raise RecordError("not a taxonomy record")
    if data.get("schema_version") != RECORD_SCHEMA_VERSION:
        raise SchemaVersionError(
            f"record schema version {data.get('schema_version')!r} is not supported "
            f"(expected {RECORD_SCHEMA_VERSION})"
        )
    try:
        meta = data["meta"]
        return Taxonomy(
            VersionFlow(data["flow"]["source"], data["flow"]["target"]),
            tuple(scenario_from_dict(s) for s in data["scenarios"]),
            TaxonomyMeta(
                created_at=datetime.fromisoformat(meta["created_at"]),
                generator=meta["generator"],
                source_checksum=meta.get("source_checksum"),
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordError(f"malformed taxonomy record: {exc}") from exc


def serialize_record(tax: Taxonomy) -> str:
    problems = errors_only(validate(tax))
    if problems:
        raise SerializationError("refusing to serialize a taxonomy with errors", problems)
    return json.dumps(taxonomy_to_dict(tax), indent=2, ensure_ascii=False, sort_keys=True) + "\n"


def parse_record(text: str) -> Taxonomy:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RecordError(f"malformed taxonomy record: {exc}") from exc
    return taxonomy_from_dict(data)


def record_filename(tax: Taxonomy) -> str:
    return f"taxonomy.{tax.flow.slug}.record"
