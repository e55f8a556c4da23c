"""Taxonomies of Qiskit migration scenarios from release notes.

The pipeline: ingest release notes, prompt a model for a markdown taxonomy,
parse and validate it, then compare and merge it with a manual taxonomy.
"""

__version__ = "0.1.0"

from .diff import ComparisonReport, MatchPair, Phase, classify_phase, compare, match, merge, render_report, similarity
from .errors import QmigtaxError
from .gateway import GenerationLog, ModelEndpoint, generate, replay
from .ingest import (
    ReleaseDoc,
    VerificationReport,
    estimate_tokens,
    fetch_release_notes,
    load_release_notes,
    release_in_scope,
    size_distribution,
    verify_extraction,
)
from .model import (
    TABLE_COLUMNS,
    Classification,
    Difficulty,
    ImpactDomain,
    Provenance,
    Scenario,
    Taxonomy,
    TaxonomyMeta,
    VersionFlow,
    compare_difficulty,
    normalize_keywords,
    scenario_id,
)
from .parser import (
    Violation,
    parse_markdown,
    parse_record,
    serialize_markdown,
    serialize_record,
    validate,
)
from .prompts import PromptBundle, assemble, build_system_prompt, build_user_prompt, extract_body
