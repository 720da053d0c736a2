"""Corpus pipeline: manifest ingestion, parallel scan, aggregation, reports.

Manifest format (tab separated, `#` comments, blank lines ignored):

    id<TAB>source|bytecode<TAB>path-or-address[<TAB>label]

Paths are relative to the manifest file. Per-entry problems (missing file,
provider failure) are recorded on the artifact and surface as an
"unanalyzable" report; only a malformed manifest line aborts ingestion.
"""

import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from config import TOOL_VERSION, ToolConfig
from services.cache_manager import CacheManager
from services.source_fetcher import FetchError, InvalidAddressError, SourceFetcher
from src.classifier import (
    ADMINISTRATED,
    EFFECTIVELY_UNGOVERNED,
    UNANALYZABLE,
    Classification,
    RiskWeights,
    classify,
    featurize,
)
from src.detectors import PATTERNS, Analysis, DetectorSettings, analyze_bytecode, analyze_source
from src.evm_disasm import HexDecodeError

logger = logging.getLogger(__name__)

KIND_SOURCE = "source"
KIND_BYTECODE = "bytecode"
LABELS = (ADMINISTRATED, EFFECTIVELY_UNGOVERNED)

CSV_COLUMNS = ["id", "verdict", "risk_score"] + list(PATTERNS) + ["guard_count"]


class ManifestError(ValueError):
    """Malformed manifest line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"manifest line {line}: {message}")
        self.line = line


# ========== Data types ==========

@dataclass(frozen=True)
class ManifestEntry:
    id: str
    kind: str
    path: Optional[str] = None
    address: Optional[str] = None
    label: Optional[str] = None


@dataclass
class ContractArtifact:
    id: str
    kind: str
    path: Optional[str] = None
    address: Optional[str] = None
    label: Optional[str] = None
    source_text: Optional[str] = None
    bytecode: Optional[str] = None
    contract_name: Optional[str] = None
    digest: str = ""
    error: Optional[str] = None

    @property
    def content(self) -> str:
        return (self.source_text if self.kind == KIND_SOURCE else self.bytecode) or ""


@dataclass
class RiskReport:
    contract_id: str
    verdict: str
    classification: Optional[Classification]
    findings: List[dict]
    guards: List[dict]
    diagnostics: dict
    tool_version: str
    input_digest: str
    frontend: str
    label: Optional[str] = None

    def to_dict(self) -> dict:
        # fixed key order; the JSON schema depends on it
        return {
            "contract_id": self.contract_id,
            "verdict": self.verdict,
            "classification": self.classification.to_dict() if self.classification else None,
            "findings": self.findings,
            "guards": self.guards,
            "diagnostics": self.diagnostics,
            "tool_version": self.tool_version,
            "input_digest": self.input_digest,
            "frontend": self.frontend,
            "label": self.label,
        }


@dataclass
class AggregateStats:
    total: int = 0
    administrated: int = 0
    ungoverned: int = 0
    unanalyzable: int = 0
    prevalence: Dict[str, int] = field(default_factory=lambda: {p: 0 for p in PATTERNS})
    label_matches: int = 0
    label_mismatches: int = 0

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.administrated, self.total) if self.total else Fraction(0)

    @property
    def accuracy(self) -> Optional[Fraction]:
        labelled = self.label_matches + self.label_mismatches
        return Fraction(self.label_matches, labelled) if labelled else None

    def to_dict(self) -> dict:
        accuracy = self.accuracy
        return {
            "total": self.total,
            "administrated": self.administrated,
            "ungoverned": self.ungoverned,
            "unanalyzable": self.unanalyzable,
            "administrated_fraction": f"{float(self.fraction):.4f}",
            "prevalence": dict(self.prevalence),
            "label_agreement": {
                "matches": self.label_matches,
                "mismatches": self.label_mismatches,
                "accuracy": f"{float(accuracy):.4f}" if accuracy is not None else None,
            },
        }

    def summary_line(self) -> str:
        percent = float(self.fraction) * 100
        return (f"analyzed {self.total}, administrated {self.administrated} ({percent:.2f}%), "
                f"ungoverned {self.ungoverned}, unanalyzable {self.unanalyzable}")


def digest_of(content: str) -> str:
    return hashlib.sha256(content.encode("utf-8")).hexdigest()


# ========== Ingestion ==========

def parse_manifest(text: str) -> List[ManifestEntry]:
    """Parse manifest text.

    Raises:
        ManifestError: On a wrong column count, unknown kind or label, or a
            duplicate id.
    """
    entries: List[ManifestEntry] = []
    seen = set()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        columns = [column.strip() for column in line.split("\t")]
        if len(columns) not in (3, 4):
            raise ManifestError(f"expected 3 or 4 tab-separated columns, got {len(columns)}", number)
        entry_id, kind, location = columns[:3]
        label = columns[3] if len(columns) == 4 and columns[3] else None
        if not entry_id:
            raise ManifestError("empty id", number)
        if entry_id in seen:
            raise ManifestError(f"duplicate id '{entry_id}'", number)
        if kind not in (KIND_SOURCE, KIND_BYTECODE):
            raise ManifestError(f"unknown kind '{kind}'", number)
        if label is not None and label not in LABELS:
            raise ManifestError(f"unknown label '{label}'", number)
        if not location:
            raise ManifestError("missing path or address", number)
        seen.add(entry_id)
        if location.lower().startswith("0x") and "/" not in location and "." not in location:
            entries.append(ManifestEntry(entry_id, kind, address=location, label=label))
        else:
            entries.append(ManifestEntry(entry_id, kind, path=location, label=label))
    return entries


def fetch_source(address: str, config: ToolConfig, entry_id: Optional[str] = None,
                 fetcher: Optional[SourceFetcher] = None) -> ContractArtifact:
    """Fetch verified source for an address into a ContractArtifact.

    Raises:
        InvalidAddressError, FetchError: See SourceFetcher.fetch.
    """
    fetcher = fetcher or SourceFetcher(config)
    fetched = fetcher.fetch(address, entry_id)
    return ContractArtifact(
        id=entry_id or address,
        kind=KIND_SOURCE,
        address=address,
        source_text=fetched.source_text,
        contract_name=fetched.contract_name or None,
        digest=digest_of(fetched.source_text),
    )


def _load_entry(entry: ManifestEntry, base: Path, config: ToolConfig,
                fetcher: Optional[SourceFetcher]) -> ContractArtifact:
    artifact = ContractArtifact(entry.id, entry.kind, path=entry.path, address=entry.address, label=entry.label)
    if entry.path is not None:
        file_path = base / entry.path
        if not file_path.is_file():
            artifact.error = f"file not found: {entry.path}"
            logger.warning(f"[{entry.id}] {artifact.error}")
            return artifact
        try:
            text = file_path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            artifact.error = f"unreadable file {entry.path}: {e}"
            logger.warning(f"[{entry.id}] {artifact.error}")
            return artifact
        if entry.kind == KIND_SOURCE:
            artifact.source_text = text
        else:
            artifact.bytecode = text.strip()
        artifact.digest = digest_of(artifact.content)
        return artifact

    if entry.kind == KIND_BYTECODE:
        artifact.error = "address entries must be of kind 'source'"
        return artifact
    try:
        fetched = fetch_source(entry.address, config, entry.id, fetcher)
    except (FetchError, InvalidAddressError) as e:
        artifact.error = f"{e.__class__.__name__}: {e}"
        logger.warning(f"[{entry.id}] {artifact.error}")
        return artifact
    artifact.source_text = fetched.source_text
    artifact.contract_name = fetched.contract_name
    artifact.digest = fetched.digest
    return artifact


def ingest(manifest_path: str, config: Optional[ToolConfig] = None) -> List[ContractArtifact]:
    """Load every manifest entry into an artifact.

    Raises:
        FileNotFoundError: If the manifest itself is missing.
        ManifestError: On a malformed line.
    """
    config = config or ToolConfig()
    path = Path(manifest_path)
    if not path.is_file():
        raise FileNotFoundError(f"Manifest not found: {manifest_path}")
    entries = parse_manifest(path.read_text(encoding="utf-8"))
    fetcher = SourceFetcher(config) if any(e.address for e in entries) else None

    # Fetches stay sequential so the provider rate limit holds.
    artifacts = [_load_entry(entry, path.parent, config, fetcher) for entry in entries]
    errors = sum(1 for a in artifacts if a.error)
    logger.info(f"Ingested {len(artifacts)} artifact(s) from {manifest_path}, {errors} error(s)")
    return artifacts


# ========== Scan ==========

class CorpusScanner:
    """Runs the analysis pipeline over artifacts and aggregates the results."""

    def __init__(self, config: Optional[ToolConfig] = None, cache: Optional[CacheManager] = None):
        self.config = config or ToolConfig()
        self.cache = cache or CacheManager()
        self.weights = RiskWeights.from_mapping(self.config.weights)
        self.settings = DetectorSettings(
            supply_markers=self.config.supply_markers,
            balance_markers=self.config.balance_markers,
        )

    def _analyze(self, artifact: ContractArtifact) -> Analysis:
        if artifact.kind == KIND_BYTECODE:
            return analyze_bytecode(artifact.bytecode, artifact.id)
        return analyze_source(artifact.source_text, self.config.target_contract, self.settings)

    def _report(self, artifact: ContractArtifact) -> RiskReport:
        frontend = "bytecode" if artifact.kind == KIND_BYTECODE else "ast"
        if artifact.error:
            return RiskReport(artifact.id, UNANALYZABLE, None, [], [], {"error": artifact.error},
                              TOOL_VERSION, artifact.digest, frontend, artifact.label)

        key = f"{artifact.kind}:{self.config.target_contract}:{artifact.digest}"
        try:
            analysis = self.cache.get_or_compute("analysis", key, lambda: self._analyze(artifact))
        except HexDecodeError as e:
            logger.warning(f"[{artifact.id}] bytecode rejected: {e}")
            return RiskReport(artifact.id, UNANALYZABLE, None, [], [], {"fatal": True, "error": str(e)},
                              TOOL_VERSION, artifact.digest, frontend, artifact.label)
        except Exception as e:
            # one artifact must never cost the others their reports
            logger.error(f"[{artifact.id}] analysis crashed: {e.__class__.__name__}: {e}", exc_info=True)
            return RiskReport(artifact.id, UNANALYZABLE, None, [], [],
                              {"fatal": True, "error": f"internal error: {e.__class__.__name__}: {e}"},
                              TOOL_VERSION, artifact.digest, frontend, artifact.label)

        if analysis.fatal:
            logger.warning(f"[{artifact.id}] unanalyzable: parse failed")
            return RiskReport(artifact.id, UNANALYZABLE, None, [], [], analysis.diagnostics,
                              TOOL_VERSION, artifact.digest, analysis.frontend, artifact.label)

        classification = classify(featurize(analysis.findings, analysis.guards), self.weights)
        logger.info(f"[{artifact.id}] {classification.verdict} (risk {classification.risk_score})")
        return RiskReport(
            contract_id=artifact.id,
            verdict=classification.verdict,
            classification=classification,
            findings=[finding.to_dict() for finding in analysis.findings],
            guards=[guard.to_dict() for guard in analysis.guards],
            diagnostics=analysis.diagnostics,
            tool_version=TOOL_VERSION,
            input_digest=artifact.digest,
            frontend=analysis.frontend,
            label=artifact.label,
        )

    def scan(self, artifacts: List[ContractArtifact]) -> Tuple[List[RiskReport], AggregateStats]:
        """Analyze artifacts (concurrently when jobs > 1) in manifest order."""
        if self.config.jobs > 1 and len(artifacts) > 1:
            with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
                reports = list(pool.map(self._report, artifacts))
        else:
            reports = [self._report(artifact) for artifact in artifacts]
        stats = aggregate(reports)
        logger.info(stats.summary_line())
        return reports, stats


def scan(artifacts: List[ContractArtifact], config: Optional[ToolConfig] = None,
         cache: Optional[CacheManager] = None) -> Tuple[List[RiskReport], AggregateStats]:
    return CorpusScanner(config, cache).scan(artifacts)


def aggregate(reports: List[RiskReport]) -> AggregateStats:
    """Counts over classified reports; unanalyzable ones are tallied apart."""
    stats = AggregateStats()
    for report in reports:
        if report.verdict == UNANALYZABLE:
            stats.unanalyzable += 1
            continue
        stats.total += 1
        if report.verdict == ADMINISTRATED:
            stats.administrated += 1
        else:
            stats.ungoverned += 1
        for pattern in PATTERNS:
            if report.classification.features.flag(pattern):
                stats.prevalence[pattern] += 1
        if report.label is not None:
            if report.label == report.verdict:
                stats.label_matches += 1
            else:
                stats.label_mismatches += 1
                logger.info(f"[{report.contract_id}] label {report.label} != verdict {report.verdict}")
    return stats


# ========== Reports ==========

def render_json(reports: List[RiskReport], stats: AggregateStats) -> str:
    document = {
        "version": TOOL_VERSION,
        "reports": [report.to_dict() for report in reports],
        "stats": stats.to_dict(),
    }
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


def render_csv(reports: List[RiskReport]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for report in reports:
        features = report.classification.features if report.classification else None
        flags = [int(features.flag(p)) if features else 0 for p in PATTERNS]
        writer.writerow([
            report.contract_id,
            report.verdict,
            report.classification.risk_score if report.classification else "",
            *flags,
            features.guard_count if features else "",
        ])
    return buffer.getvalue()


def emit_report(reports: List[RiskReport], stats: AggregateStats, fmt: str = "json",
                out_path: Optional[str] = None) -> str:
    """Render reports and optionally write them.

    Returns:
        The rendered text (also written to out_path when given).

    Raises:
        ValueError: On an unknown format.
        OSError: If out_path cannot be written.
    """
    if fmt == "json":
        text = render_json(reports, stats)
    elif fmt == "csv":
        text = render_csv(reports)
    else:
        raise ValueError(f"Unknown report format '{fmt}'")
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
        logger.info(f"Wrote {fmt} report for {len(reports)} contract(s) to {out_path}")
    return text
