"""
Integration test: scanning the labelled reference corpus end to end.

Covers manifest ingestion, classification of every entry, aggregate
statistics and both report formats:
1. Reference corpus: 9 administrated of 12, every label agrees
2. Full corpus: near misses stay ungoverned, one unparseable entry is
   reported apart and the run continues
3. Reports are byte-identical across runs and across job counts
4. Manifest errors abort; per-entry errors (missing or undecodable files,
   runaway nesting, a crashing analysis) do not
"""

import json
import sys
import time
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

import pytest  # noqa: E402

from config import ToolConfig  # noqa: E402
from services.cache_manager import CacheManager  # noqa: E402
from services.corpus_service import (  # noqa: E402
    CSV_COLUMNS,
    CorpusScanner,
    ManifestError,
    emit_report,
    ingest,
    parse_manifest,
    render_csv,
    render_json,
)
from src.classifier import ADMINISTRATED, EFFECTIVELY_UNGOVERNED, UNANALYZABLE  # noqa: E402
from tests.fixtures import fixture_path  # noqa: E402

REFERENCE = str(fixture_path("reference_corpus.manifest"))
FULL = str(fixture_path("full_corpus.manifest"))


def _scan(manifest, config=None):
    config = config or ToolConfig()
    return CorpusScanner(config).scan(ingest(manifest, config))


# ========== Reference corpus ==========

def test_reference_corpus_classification():
    reports, stats = _scan(REFERENCE)
    verdicts = {r.contract_id: r.verdict for r in reports}
    assert [r.contract_id for r in reports][:2] == ["issue_mint", "kill_selfdestruct"]
    assert sum(v == ADMINISTRATED for v in verdicts.values()) == 9
    assert verdicts["plain_erc20"] == EFFECTIVELY_UNGOVERNED
    assert verdicts["symbolic_owner"] == EFFECTIVELY_UNGOVERNED
    assert verdicts["pause_only"] == EFFECTIVELY_UNGOVERNED

    summary = stats.to_dict()
    assert summary["total"] == 12
    assert summary["administrated_fraction"] == "0.7500"
    assert summary["label_agreement"] == {"matches": 12, "mismatches": 0, "accuracy": "1.0000"}
    assert summary["prevalence"] == {
        "SelfDestruction": 2,
        "Deprecation": 3,
        "ChangeOfAddress": 2,
        "Minting": 3,
        "Burning": 1,
    }


def test_reference_report_contents():
    reports, _ = _scan(REFERENCE)
    by_id = {r.contract_id: r.to_dict() for r in reports}

    issue = by_id["issue_mint"]
    assert issue["classification"]["quadrant"] == ["administrated", "ownable"]
    assert issue["classification"]["risk_score"] == 20
    assert [(f["pattern"], f["function"], f["guard"]) for f in issue["findings"]] == [
        ("Minting", "issue", "onlyOwner")]

    bytecode = by_id["kill_bytecode"]
    assert bytecode["frontend"] == "bytecode"
    assert bytecode["findings"][0]["source"] == "bytecode"
    assert len(bytecode["input_digest"]) == 64

    symbolic = by_id["symbolic_owner"]
    assert symbolic["classification"]["quadrant"] == ["ungoverned", "ownable"]
    assert symbolic["findings"] == []


def test_reference_scan_is_fast():
    config = ToolConfig()
    artifacts = ingest(REFERENCE, config)
    start = time.monotonic()
    CorpusScanner(config).scan(artifacts)
    assert time.monotonic() - start < 1.0


# ========== Full corpus ==========

def test_full_corpus_with_unparseable_entry():
    reports, stats = _scan(FULL)
    assert len(reports) == 16
    verdicts = {r.contract_id: r.verdict for r in reports}
    assert verdicts["unparseable"] == UNANALYZABLE
    for near_miss in ("paired_transfer", "self_burn_only", "empty"):
        assert verdicts[near_miss] == EFFECTIVELY_UNGOVERNED

    summary = stats.to_dict()
    assert summary["total"] == 15
    assert summary["unanalyzable"] == 1
    assert summary["administrated_fraction"] == "0.6000"
    assert summary["label_agreement"]["accuracy"] == "1.0000"

    unparseable = next(r for r in reports if r.contract_id == "unparseable").to_dict()
    assert unparseable["classification"] is None
    assert unparseable["diagnostics"]["fatal"] is True


def test_missing_file_is_a_per_entry_error(tmp_path):
    manifest = tmp_path / "m.manifest"
    contracts = tmp_path / "contracts"
    contracts.mkdir()
    (contracts / "a.sol").write_text(
        fixture_path("contracts/issue_mint.sol").read_text(encoding="utf-8"), encoding="utf-8")
    manifest.write_text("a\tsource\tcontracts/a.sol\ngone\tsource\tcontracts/gone.sol\n", encoding="utf-8")

    reports, stats = _scan(str(manifest))
    assert [r.verdict for r in reports] == [ADMINISTRATED, UNANALYZABLE]
    assert reports[1].diagnostics == {"error": "file not found: contracts/gone.sol"}
    assert stats.total == 1


def test_invalid_address_entry_is_unanalyzable(tmp_path):
    manifest = tmp_path / "m.manifest"
    manifest.write_text("bad\tsource\t0x1234\n", encoding="utf-8")
    reports, _ = _scan(str(manifest))
    assert reports[0].verdict == UNANALYZABLE
    assert "InvalidAddressError" in reports[0].diagnostics["error"]


def test_malformed_bytecode_is_unanalyzable(tmp_path):
    manifest = tmp_path / "m.manifest"
    (tmp_path / "x.hex").write_text("0x33zz\n", encoding="utf-8")
    manifest.write_text("x\tbytecode\tx.hex\n", encoding="utf-8")
    reports, _ = _scan(str(manifest))
    assert reports[0].verdict == UNANALYZABLE
    assert "position 4" in reports[0].diagnostics["error"]


def test_undecodable_file_is_a_per_entry_error(tmp_path):
    manifest = tmp_path / "m.manifest"
    (tmp_path / "a.sol").write_text(
        fixture_path("contracts/issue_mint.sol").read_text(encoding="utf-8"), encoding="utf-8")
    (tmp_path / "b.sol").write_bytes(b"contract B { \xff\xfe }")
    manifest.write_text("a\tsource\ta.sol\nb\tsource\tb.sol\n", encoding="utf-8")

    artifacts = ingest(str(manifest), ToolConfig())
    assert artifacts[0].error is None
    assert artifacts[1].error.startswith("unreadable file b.sol")

    reports, stats = _scan(str(manifest))
    assert [r.verdict for r in reports] == [ADMINISTRATED, UNANALYZABLE]
    assert stats.total == 1


def test_deeply_nested_source_does_not_stop_the_run(tmp_path):
    manifest = tmp_path / "m.manifest"
    (tmp_path / "ok.sol").write_text(
        fixture_path("contracts/issue_mint.sol").read_text(encoding="utf-8"), encoding="utf-8")
    deep = "(" * 120 + "1" + ")" * 120
    (tmp_path / "deep.sol").write_text(
        f"contract Deep {{\n    function f() public {{ uint x = {deep}; }}\n}}\n", encoding="utf-8")
    manifest.write_text("ok\tsource\tok.sol\ndeep\tsource\tdeep.sol\n", encoding="utf-8")

    reports, _ = _scan(str(manifest))
    assert [r.contract_id for r in reports] == ["ok", "deep"]
    assert reports[0].verdict == ADMINISTRATED
    assert reports[1].verdict == EFFECTIVELY_UNGOVERNED
    assert reports[1].diagnostics["nesting_limit_hits"] >= 1


def test_crashing_analysis_is_isolated(tmp_path, monkeypatch):
    manifest = tmp_path / "m.manifest"
    source = fixture_path("contracts/issue_mint.sol")
    (tmp_path / "boom.sol").write_text("contract Boom { }\n", encoding="utf-8")
    manifest.write_text(f"a\tsource\t{source}\nboom\tsource\tboom.sol\n", encoding="utf-8")

    original = CorpusScanner._analyze

    def analyze(self, artifact):
        if artifact.id == "boom":
            raise RuntimeError("analyzer bug")
        return original(self, artifact)

    monkeypatch.setattr(CorpusScanner, "_analyze", analyze)
    reports, stats = _scan(str(manifest))
    assert reports[0].verdict == ADMINISTRATED
    assert reports[1].verdict == UNANALYZABLE
    assert reports[1].diagnostics["error"] == "internal error: RuntimeError: analyzer bug"
    assert stats.total == 1


# ========== Manifest errors ==========

@pytest.mark.parametrize("text,line", [
    ("a\tsource\n", 1),
    ("# c\na\tsource\tx.sol\na\tsource\ty.sol\n", 3),
    ("a\twasm\tx.sol\n", 1),
    ("a\tsource\tx.sol\tmaybe\n", 1),
    ("\ta\tsource\tx.sol\n", 1),
])
def test_malformed_manifest(text, line):
    with pytest.raises(ManifestError) as excinfo:
        parse_manifest(text)
    assert excinfo.value.line == line


def test_missing_manifest():
    with pytest.raises(FileNotFoundError):
        ingest("/nonexistent/corpus.manifest")


# ========== Reports ==========

def test_reports_are_byte_identical_across_runs(tmp_path):
    first_reports, first_stats = _scan(FULL)
    second_reports, second_stats = CorpusScanner(ToolConfig(jobs=4)).scan(ingest(FULL, ToolConfig()))

    assert render_json(first_reports, first_stats) == render_json(second_reports, second_stats)
    assert render_csv(first_reports) == render_csv(second_reports)

    out = tmp_path / "report.json"
    text = emit_report(first_reports, first_stats, "json", str(out))
    assert out.read_text(encoding="utf-8") == text
    document = json.loads(text)
    assert list(document) == ["version", "reports", "stats"]
    assert list(document["reports"][0]) == [
        "contract_id", "verdict", "classification", "findings", "guards",
        "diagnostics", "tool_version", "input_digest", "frontend", "label",
    ]


def test_csv_report():
    reports, _ = _scan(REFERENCE)
    lines = render_csv(reports).splitlines()
    assert len(lines) == 13
    assert lines[0].split(",") == CSV_COLUMNS
    assert lines[1] == "issue_mint,administrated,20,0,0,0,1,0,1"


def test_unknown_format():
    reports, stats = _scan(REFERENCE)
    with pytest.raises(ValueError):
        emit_report(reports, stats, "xml")


def test_duplicate_contracts_are_analyzed_once(tmp_path):
    manifest = tmp_path / "m.manifest"
    source = fixture_path("contracts/mint_burn.sol")
    manifest.write_text(f"a\tsource\t{source}\nb\tsource\t{source}\n", encoding="utf-8")
    cache = CacheManager()
    config = ToolConfig()
    reports, _ = CorpusScanner(config, cache).scan(ingest(str(manifest), config))
    assert reports[0].to_dict()["findings"] == reports[1].to_dict()["findings"]
    assert cache.get_stats()["hits"] == 1


def test_weights_change_scores_not_verdicts():
    config = ToolConfig(weights={"Minting": 50})
    reports, _ = _scan(REFERENCE, config)
    issue = next(r for r in reports if r.contract_id == "issue_mint")
    assert issue.verdict == ADMINISTRATED
    assert issue.classification.risk_score == 50
