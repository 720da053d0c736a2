"""Token auditor - command-line entry point.

Subcommands:
    scan      classify every contract in a manifest and report
    analyze   classify one Solidity file or bytecode hex file
    disasm    print an instruction listing for bytecode
    fetch     download verified source for an address
    simulate  run a SafelyAdministrated scenario and check user safety

Exit codes: 0 success, 1 input errors, 2 internal errors.
"""

import argparse
import json
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import List, Optional

from config import TOOL_VERSION, Config, ConfigError, ToolConfig, load_weights
from services.corpus_service import (
    KIND_BYTECODE,
    KIND_SOURCE,
    ContractArtifact,
    CorpusScanner,
    digest_of,
    emit_report,
    fetch_source,
    ingest,
)
from services.scenario import check_safety, parse_scenario, render_trace, run_scenario
from services.source_fetcher import FetchError
from src.evm_disasm import disassemble, format_listing
from src.solidity_ast import dump_ast
from src.solidity_parser import parse_source

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INTERNAL_ERROR = 2


def setup_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    """Configure logging to stderr and, optionally, a rotating file."""
    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    # Clear existing handlers to avoid duplicates
    root_logger.handlers.clear()

    # Console handler (stdout is reserved for report data)
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        # File handler with rotation (10MB, keep 5 backups)
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=10 * 1024 * 1024,  # 10 MB
            backupCount=5,
            encoding="utf-8"
        )
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)


class UsageError(Exception):
    """Bad command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="auditor",
        description="Detect administrated ERC-20 tokens and simulate safe administration",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {TOOL_VERSION}")
    parser.add_argument("--config", metavar="FILE", help="key = value config file")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help=f"Logging level (default: {Config.LOG_LEVEL})")
    parser.add_argument("--log-file", metavar="PATH", help="Also log to a rotating file")

    commands = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    commands.required = True

    scan = commands.add_parser("scan", help="Classify every contract in a manifest")
    scan.add_argument("manifest", help="Tab-separated manifest file")
    scan.add_argument("--format", choices=["json", "csv"], default="json", help="Report format (default: json)")
    scan.add_argument("--out", metavar="PATH", help="Write the report here instead of stdout")
    scan.add_argument("--weights", metavar="FILE", help="Risk weight overrides (pattern = 0-100)")
    scan.add_argument("--target-contract", metavar="NAME", help="Analyze this contract in every source")
    scan.add_argument("--jobs", type=int, metavar="N", help="Parallel workers (default: 1)")

    analyze = commands.add_parser("analyze", help="Classify one source or bytecode file")
    analyze.add_argument("path", help="Solidity source file (or hex file with --bytecode)")
    analyze.add_argument("--bytecode", action="store_true", help="Treat the file as bytecode hex")
    analyze.add_argument("--dump-ast", action="store_true", help="Print the parsed AST as JSON and exit")
    analyze.add_argument("--target-contract", metavar="NAME", help="Contract to analyze")
    analyze.add_argument("--weights", metavar="FILE", help="Risk weight overrides (pattern = 0-100)")

    disasm = commands.add_parser("disasm", help="Disassemble EVM bytecode")
    disasm.add_argument("hexfile", nargs="?", help="File containing bytecode hex")
    disasm.add_argument("--hex", metavar="STRING", help="Bytecode hex given inline")

    fetch = commands.add_parser("fetch", help="Download verified source for an address")
    fetch.add_argument("address", help="0x-prefixed contract address")
    fetch.add_argument("--provider", metavar="URL", help="Provider endpoint URL")
    fetch.add_argument("--out", metavar="PATH", help="Write the source here instead of stdout")

    simulate = commands.add_parser("simulate", help="Run a SafelyAdministrated scenario")
    simulate.add_argument("scenario", help="Scenario file")
    simulate.add_argument("--out", metavar="PATH", help="Write the trace here instead of stdout")
    return parser


def load_tool_config(args: argparse.Namespace) -> ToolConfig:
    """Defaults < environment < --config file < command-line flags."""
    config = ToolConfig.from_env()
    if args.config:
        config = config.with_file(args.config)
    weights = load_weights(args.weights) if getattr(args, "weights", None) else None
    return config.with_overrides(
        weights=weights,
        target_contract=getattr(args, "target_contract", None),
        jobs=getattr(args, "jobs", None),
        provider_url=getattr(args, "provider", None),
    )


def _write_or_print(text: str, out_path: Optional[str]) -> None:
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ========== Commands ==========

def cmd_scan(args: argparse.Namespace, config: ToolConfig) -> int:
    artifacts = ingest(args.manifest, config)
    scanner = CorpusScanner(config)
    reports, stats = scanner.scan(artifacts)
    text = emit_report(reports, stats, args.format, args.out)
    if not args.out:
        sys.stdout.write(text)
    scanner.cache.log_stats()
    print(stats.summary_line(), file=sys.stderr)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace, config: ToolConfig) -> int:
    path = Path(args.path)
    if not path.is_file():
        raise FileNotFoundError(f"File not found: {args.path}")
    text = path.read_text(encoding="utf-8")

    if args.dump_ast:
        if args.bytecode:
            raise UsageError("--dump-ast applies to Solidity sources only")
        ast, diagnostics = parse_source(text)
        sys.stdout.write(dump_ast(ast, diagnostics) + "\n")
        return EXIT_OK

    kind = KIND_BYTECODE if args.bytecode else KIND_SOURCE
    artifact = ContractArtifact(id=path.stem, kind=kind, path=str(path))
    if args.bytecode:
        artifact.bytecode = text.strip()
    else:
        artifact.source_text = text
    artifact.digest = digest_of(artifact.content)

    reports, stats = CorpusScanner(config).scan([artifact])
    sys.stdout.write(json.dumps(reports[0].to_dict(), indent=2, ensure_ascii=False) + "\n")
    print(stats.summary_line(), file=sys.stderr)
    return EXIT_OK


def cmd_disasm(args: argparse.Namespace, config: ToolConfig) -> int:
    if bool(args.hexfile) == bool(args.hex):
        raise UsageError("disasm needs exactly one of HEXFILE or --hex")
    if args.hexfile:
        path = Path(args.hexfile)
        if not path.is_file():
            raise FileNotFoundError(f"File not found: {args.hexfile}")
        bytecode = path.read_text(encoding="utf-8")
    else:
        bytecode = args.hex
    instructions = disassemble(bytecode)
    listing = format_listing(instructions)
    sys.stdout.write(listing + ("\n" if listing else ""))
    print(f"disassembled {len(instructions)} instruction(s)", file=sys.stderr)
    return EXIT_OK


def cmd_fetch(args: argparse.Namespace, config: ToolConfig) -> int:
    artifact = fetch_source(args.address, config)
    _write_or_print(artifact.source_text, args.out)
    name = artifact.contract_name or "unknown contract"
    print(f"fetched {name} ({len(artifact.source_text)} chars) for {args.address}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, config: ToolConfig) -> int:
    path = Path(args.scenario)
    if not path.is_file():
        raise FileNotFoundError(f"Scenario not found: {args.scenario}")
    scenario = parse_scenario(path.read_text(encoding="utf-8"))
    trace = run_scenario(scenario, delay=config.delay, window=config.window,
                         cap=config.cap, cap_percent=config.cap_percent)
    verdicts = check_safety(trace)
    _write_or_print(render_trace(trace, verdicts), args.out)

    failed = [v.name for v in verdicts if not v.holds]
    rejected = sum(1 for step in trace.steps if step.status != "applied")
    print(f"simulated {len(trace.steps)} event(s), {rejected} rejected, "
          f"{'all properties hold' if not failed else 'violated: ' + ', '.join(failed)}", file=sys.stderr)
    return EXIT_OK if not failed else EXIT_INPUT_ERROR


COMMANDS = {
    "scan": cmd_scan,
    "analyze": cmd_analyze,
    "disasm": cmd_disasm,
    "fetch": cmd_fetch,
    "simulate": cmd_simulate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_INPUT_ERROR
    except SystemExit as e:
        # --help / --version
        return int(e.code or 0)

    # Validate environment before it configures logging
    try:
        Config.validate()
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    setup_logging(args.log_level or Config.LOG_LEVEL, args.log_file or Config.LOG_FILE or None)

    try:
        config = load_tool_config(args)
        return COMMANDS[args.command](args, config)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_INPUT_ERROR
    except (ValueError, FetchError, OSError) as e:
        # OSError covers missing files and unwritable output paths
        logger.error(f"{args.command} failed: {e}")
        return EXIT_INPUT_ERROR
    except Exception:
        logger.exception(f"Internal error in {args.command}")
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
