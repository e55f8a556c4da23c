"""Comparison of a manual taxonomy against an automatically generated one.

Scenarios are paired one-to-one by a weighted similarity (artifact keywords,
classification facets, summary words), the pairing yields recall and
novelty, and those two numbers place the comparison in one of three phases.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from typing import Optional

from .errors import FlowMismatchError, InvalidInputError, MergeError, RecordError, SchemaVersionError
from .model import Provenance, Scenario, Taxonomy, TaxonomyMeta, VersionFlow
from .parser import taxonomy_from_dict, taxonomy_to_dict

DEFAULT_THRESHOLD = 0.5
REPORT_SCHEMA = "qmigtax.comparison"
REPORT_SCHEMA_VERSION = 1


class Phase(str, enum.Enum):
    INITIAL = "Initial"
    INTERMEDIATE = "Intermediate"
    FUTURE = "Future"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SimilarityWeights:
    artifacts: float = 0.6
    classification: float = 0.25
    summary: float = 0.15

    def __post_init__(self) -> None:
        parts = (self.artifacts, self.classification, self.summary)
        if any(w < 0 for w in parts) or abs(sum(parts) - 1.0) > 1e-9:
            raise InvalidInputError(f"similarity weights must be non-negative and sum to 1, got {parts}")


DEFAULT_WEIGHTS = SimilarityWeights()


def jaccard(a: set, b: set) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def summary_words(text: str) -> set[str]:
    return set(re.findall(r"\w+", text.casefold()))


def facet_agreement(a: Scenario, b: Scenario) -> float:
    """Share of facets (present on either side) carrying the same label on both."""
    fa, fb = a.classification.folded(), b.classification.folded()
    keys = fa.keys() | fb.keys()
    return sum(1 for k in keys if k in fa and k in fb and fa[k] == fb[k]) / len(keys)


def similarity(a: Scenario, b: Scenario, weights: SimilarityWeights = DEFAULT_WEIGHTS) -> float:
    if a.flow != b.flow:
        return 0.0
    score = (
        weights.artifacts * jaccard({x.casefold() for x in a.artifacts}, {x.casefold() for x in b.artifacts})
        + weights.classification * facet_agreement(a, b)
        + weights.summary * jaccard(summary_words(a.summary), summary_words(b.summary))
    )
    return min(1.0, max(0.0, score))


@dataclass(frozen=True)
class MatchPair:
    manual_id: str
    auto_id: str
    score: float


@dataclass(frozen=True)
class ComparisonReport:
    flow: VersionFlow
    pairs: tuple[MatchPair, ...]
    manual_only: tuple[str, ...]
    auto_only: tuple[str, ...]
    recall: float
    novelty: float
    threshold: float
    phase: Optional[Phase] = None
    model: str = ""

    @property
    def manual_count(self) -> int:
        return len(self.pairs) + len(self.manual_only)

    @property
    def auto_count(self) -> int:
        return len(self.pairs) + len(self.auto_only)


def _check_threshold(threshold: float) -> None:
    if not 0 < threshold <= 1:
        raise InvalidInputError(f"threshold must be in (0, 1], got {threshold}")


def match(
    manual: Taxonomy,
    auto: Taxonomy,
    threshold: float = DEFAULT_THRESHOLD,
    weights: SimilarityWeights = DEFAULT_WEIGHTS,
) -> ComparisonReport:
    """Greedy one-to-one pairing, best score first.

    Ties are broken by manual order, then auto order. Pairs scoring below
    ``threshold`` are never formed. The returned report has no phase yet.
    """
    if manual.flow != auto.flow:
        raise FlowMismatchError(f"cannot compare {manual.flow} with {auto.flow}")
    _check_threshold(threshold)

    candidates = []
    for i, m in enumerate(manual.scenarios):
        for j, a in enumerate(auto.scenarios):
            score = similarity(m, a, weights)
            if score >= threshold:
                candidates.append((-score, i, j))
    candidates.sort()

    used_m: set[int] = set()
    used_a: set[int] = set()
    chosen: list[tuple[int, int, float]] = []
    for neg, i, j in candidates:
        if i in used_m or j in used_a:
            continue
        used_m.add(i)
        used_a.add(j)
        chosen.append((i, j, -neg))
    chosen.sort()

    pairs = tuple(MatchPair(manual.scenarios[i].id, auto.scenarios[j].id, s) for i, j, s in chosen)
    manual_only = tuple(s.id for i, s in enumerate(manual.scenarios) if i not in used_m)
    auto_only = tuple(s.id for j, s in enumerate(auto.scenarios) if j not in used_a)
    # an empty manual taxonomy has nothing left to retrieve
    recall = len(pairs) / len(manual) if len(manual) else 1.0
    novelty = len(auto_only) / len(auto) if len(auto) else 0.0
    return ComparisonReport(manual.flow, pairs, manual_only, auto_only, recall, novelty, threshold)


def phase_for(recall: float, novelty: float) -> Phase:
    if recall == 1.0:
        return Phase.FUTURE
    if recall >= 0.5 or novelty > 0:
        return Phase.INTERMEDIATE
    return Phase.INITIAL


def classify_phase(report: ComparisonReport) -> Phase:
    return phase_for(report.recall, report.novelty)


def compare(
    manual: Taxonomy,
    auto: Taxonomy,
    threshold: float = DEFAULT_THRESHOLD,
    weights: SimilarityWeights = DEFAULT_WEIGHTS,
    model: str = "",
) -> ComparisonReport:
    """``match`` followed by ``classify_phase``."""
    report = match(manual, auto, threshold, weights)
    return ComparisonReport(
        report.flow,
        report.pairs,
        report.manual_only,
        report.auto_only,
        report.recall,
        report.novelty,
        report.threshold,
        classify_phase(report),
        model or auto.meta.generator,
    )


# --------------------------------------------------------------------------
# merge
# --------------------------------------------------------------------------


def _longer(preferred: str, other: str) -> str:
    return other if len(other.strip()) > len(preferred.strip()) else preferred


def fuse(manual: Scenario, auto: Scenario) -> Scenario:
    """Manual wins on identity and judgement fields; richer code examples win."""
    refs = list(manual.references) + [r for r in auto.references if r not in manual.references]
    return Scenario(
        classification=manual.classification,
        flow=manual.flow,
        summary=manual.summary,
        artifacts=manual.artifacts,
        difficulty=manual.difficulty,
        impact=manual.impact,
        source_example=_longer(manual.source_example, auto.source_example),
        target_example=_longer(manual.target_example, auto.target_example),
        references=tuple(refs),
        provenance=Provenance.merged(manual.provenance, auto.provenance),
    )


def merge(manual: Taxonomy, auto: Taxonomy, report: ComparisonReport) -> Taxonomy:
    """Unified taxonomy: fused pairs in manual order, then auto-only scenarios."""
    m_by, a_by = manual.by_id(), auto.by_id()
    unknown = [p.manual_id for p in report.pairs if p.manual_id not in m_by]
    unknown += [i for i in report.manual_only if i not in m_by]
    unknown += [p.auto_id for p in report.pairs if p.auto_id not in a_by]
    unknown += [i for i in report.auto_only if i not in a_by]
    if unknown or report.flow != manual.flow or manual.flow != auto.flow:
        raise MergeError(f"report does not belong to these taxonomies (unknown ids: {unknown})")

    partner = {p.manual_id: p.auto_id for p in report.pairs}
    out: dict[str, Scenario] = {}
    for s in manual.scenarios:
        out[s.id] = fuse(s, a_by[partner[s.id]]) if s.id in partner else s
    for aid in report.auto_only:
        a = a_by[aid]
        # an unmatched auto row may still restate a manual scenario verbatim
        out[a.id] = fuse(out[a.id], a) if a.id in out else a

    generator = f"merged({manual.meta.generator}+{auto.meta.generator})"
    return Taxonomy(manual.flow, tuple(out.values()), TaxonomyMeta(generator=generator))


# --------------------------------------------------------------------------
# rendering and records
# --------------------------------------------------------------------------


def _pct(x: float) -> str:
    return f"{100 * x:.1f}%"


def render_report(report: ComparisonReport, manual: Taxonomy, auto: Taxonomy) -> str:
    m_by, a_by = manual.by_id(), auto.by_id()
    phase = report.phase or classify_phase(report)
    lines = [
        f"Taxonomy comparison for {report.flow}",
        f"manual: {len(manual)} scenarios ({manual.meta.generator})",
        f"auto:   {len(auto)} scenarios ({auto.meta.generator})",
        f"threshold: {report.threshold:.2f}",
        "",
        f"recall:  {_pct(report.recall)} ({len(report.pairs)}/{len(manual)} manual scenarios matched)",
        f"novelty: {_pct(report.novelty)} ({len(report.auto_only)}/{len(auto)} auto scenarios unmatched)",
        f"phase:   {phase}",
        "",
        "Matched pairs",
    ]
    if report.pairs:
        lines.append("| score | manual | auto |")
        lines.append("|---|---|---|")
        for p in report.pairs:
            lines.append(
                f"| {p.score:.3f} | {p.manual_id} {m_by[p.manual_id].summary} | {p.auto_id} {a_by[p.auto_id].summary} |"
            )
    else:
        lines.append("(none)")
    for title, ids, lookup in (
        ("Manual only", report.manual_only, m_by),
        ("Auto only", report.auto_only, a_by),
    ):
        lines += ["", title]
        lines += [f"- {i} {lookup[i].summary}" for i in ids] or ["(none)"]
    return "\n".join(lines) + "\n"


def report_to_dict(report: ComparisonReport, manual: Optional[Taxonomy] = None, auto: Optional[Taxonomy] = None) -> dict:
    d = {
        "schema": REPORT_SCHEMA,
        "schema_version": REPORT_SCHEMA_VERSION,
        "flow": {"source": report.flow.source, "target": report.flow.target},
        "model": report.model,
        "threshold": report.threshold,
        "recall": report.recall,
        "novelty": report.novelty,
        "phase": report.phase.value if report.phase else None,
        "pairs": [{"manual_id": p.manual_id, "auto_id": p.auto_id, "score": p.score} for p in report.pairs],
        "manual_only": list(report.manual_only),
        "auto_only": list(report.auto_only),
    }
    if manual is not None:
        d["manual"] = taxonomy_to_dict(manual)
    if auto is not None:
        d["auto"] = taxonomy_to_dict(auto)
    return d


def serialize_report(report: ComparisonReport, manual: Optional[Taxonomy] = None, auto: Optional[Taxonomy] = None) -> str:
    """Record text; embedding both taxonomies makes the report self-contained."""
    return json.dumps(report_to_dict(report, manual, auto), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


@dataclass
class LoadedReport:
    report: ComparisonReport
    manual: Optional[Taxonomy] = None
    auto: Optional[Taxonomy] = None


def parse_report(text: str) -> LoadedReport:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RecordError(f"malformed comparison record: {exc}") from exc
    if not isinstance(d, dict) or d.get("schema") != REPORT_SCHEMA:
        raise RecordError("not a comparison record")
    if d.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise SchemaVersionError(f"comparison record schema version {d.get('schema_version')!r} is not supported")
    try:
        report = ComparisonReport(
            VersionFlow(d["flow"]["source"], d["flow"]["target"]),
            tuple(MatchPair(p["manual_id"], p["auto_id"], p["score"]) for p in d["pairs"]),
            tuple(d["manual_only"]),
            tuple(d["auto_only"]),
            d["recall"],
            d["novelty"],
            d["threshold"],
            Phase(d["phase"]) if d.get("phase") else None,
            d.get("model", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordError(f"malformed comparison record: {exc}") from exc
    return LoadedReport(
        report,
        taxonomy_from_dict(d["manual"]) if "manual" in d else None,
        taxonomy_from_dict(d["auto"]) if "auto" in d else None,
    )
