"""Verified-source fetcher for block-explorer style providers.

One GET per address; the provider answers with JSON and the source text is
read from a configurable field path (default `result.0.SourceCode`). Requests
are spaced by a minimum interval and retried with exponential backoff on
connection errors, timeouts, HTTP 429 and 5xx.
"""

import json
import logging
import os
import re
import time
from dataclasses import dataclass
from threading import Lock
from typing import Any, Dict, Optional
from urllib.parse import parse_qsl

import backoff
import requests

from config import ToolConfig

logger = logging.getLogger(__name__)

ADDRESS_RE = re.compile(r"^0x[0-9a-fA-F]{40}$")
NOT_VERIFIED_MARKER = "Contract source code not verified"


# ========== Errors ==========

class FetchError(RuntimeError):
    """Base class for fetch failures."""


class InvalidAddressError(ValueError):
    """Address is not 0x followed by 40 hex digits."""


class ProviderConfigurationError(FetchError):
    """Provider URL or API key missing."""


class ProviderError(FetchError):
    """Provider answered with a non-retryable status or an unexpected body."""

    def __init__(self, message: str, status: Optional[int] = None, entry_id: Optional[str] = None):
        prefix = f"[{entry_id}] " if entry_id else ""
        suffix = f" (HTTP {status})" if status is not None else ""
        super().__init__(f"{prefix}{message}{suffix}")
        self.status = status
        self.entry_id = entry_id


class UnverifiedContractError(FetchError):
    """Provider has no verified source for the address."""


class RetryableFetchError(FetchError):
    """Network-level failure that persisted through every retry."""

    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} after {attempts} attempt(s)")
        self.attempts = attempts


class _TransientError(Exception):
    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


# ========== Helpers ==========

class RateLimiter:
    """Enforce a minimum delay between consecutive requests."""

    def __init__(self, min_interval: float):
        self.min_interval = min_interval
        self._last: Optional[float] = None
        self._lock = Lock()

    def wait_if_needed(self) -> None:
        with self._lock:
            now = time.monotonic()
            if self._last is not None:
                wait_time = self._last + self.min_interval - now
                if wait_time > 0:
                    logger.debug(f"Rate limit: waiting {wait_time:.2f}s")
                    time.sleep(wait_time)
            self._last = time.monotonic()


def validate_address(address: str) -> str:
    """Raises InvalidAddressError unless `address` is a 20-byte hex account."""
    if not ADDRESS_RE.match(address or ""):
        raise InvalidAddressError(f"Malformed address {address!r}: expected 0x followed by 40 hex digits")
    return address


def extract_field(document: Any, path: str) -> Any:
    """Follow a dotted path through dicts and lists (`result.0.SourceCode`).

    Raises:
        KeyError: If any step is missing.
    """
    current = document
    for step in path.split("."):
        if isinstance(current, list):
            try:
                current = current[int(step)]
            except (ValueError, IndexError):
                raise KeyError(path) from None
        elif isinstance(current, dict) and step in current:
            current = current[step]
        else:
            raise KeyError(path)
    return current


def flatten_source(source: str) -> str:
    """Join multi-file standard-JSON sources into one text, files in key order.

    Plain Solidity text is returned unchanged.
    """
    text = source.strip()
    if not text.startswith("{"):
        return source
    if text.startswith("{{") and text.endswith("}}"):
        text = text[1:-1]
    try:
        document = json.loads(text)
    except json.JSONDecodeError:
        return source
    files = document.get("sources", document) if isinstance(document, dict) else None
    if not isinstance(files, dict):
        return source
    parts = []
    for name in files:
        entry = files[name]
        content = entry.get("content") if isinstance(entry, dict) else None
        if isinstance(content, str):
            parts.append(f"// File: {name}\n{content}")
    return "\n\n".join(parts) if parts else source


@dataclass(frozen=True)
class FetchedSource:
    address: str
    contract_name: str
    source_text: str


# ========== Fetcher ==========

class SourceFetcher:
    """Sequential verified-source client for one provider."""

    def __init__(self, config: ToolConfig, session: Optional[requests.Session] = None):
        self.config = config
        self.session = session or requests.Session()
        self.limiter = RateLimiter(config.min_request_interval)

    def _api_key(self) -> str:
        if not self.config.provider_url:
            raise ProviderConfigurationError("No provider URL configured (--provider or provider_url)")
        api_key = os.getenv(self.config.api_key_env, "")
        if not api_key:
            raise ProviderConfigurationError(
                f"API key environment variable {self.config.api_key_env} is not set")
        return api_key

    def _params(self, address: str, api_key: str) -> Dict[str, str]:
        query = self.config.provider_query.format(address=address, api_key=api_key)
        return dict(parse_qsl(query, keep_blank_values=True))

    def _get_once(self, params: Dict[str, str], entry_id: Optional[str]) -> Any:
        self.limiter.wait_if_needed()
        try:
            response = self.session.get(self.config.provider_url, params=params,
                                        timeout=self.config.request_timeout)
        except (requests.exceptions.ConnectionError, requests.exceptions.Timeout) as e:
            raise _TransientError(f"network failure: {e.__class__.__name__}") from e

        if response.status_code == 429 or response.status_code >= 500:
            raise _TransientError(f"provider returned HTTP {response.status_code}")
        if response.status_code != 200:
            raise ProviderError("provider request failed", response.status_code, entry_id)
        try:
            return response.json()
        except ValueError:
            raise ProviderError("provider returned a non-JSON body", response.status_code, entry_id) from None

    def _get(self, params: Dict[str, str], entry_id: Optional[str]) -> Any:
        def give_up(details):
            error = details["exception"] if "exception" in details else None
            message = error.message if isinstance(error, _TransientError) else "request failed"
            raise RetryableFetchError(message, details["tries"])

        def log_retry(details):
            logger.warning(f"Fetch attempt {details['tries']} failed, retrying in {details['wait']:.2f}s")

        request = backoff.on_exception(
            backoff.expo,
            _TransientError,
            max_tries=self.config.max_retries + 1,
            factor=self.config.retry_backoff_factor,
            on_backoff=log_retry,
            on_giveup=give_up,
        )(self._get_once)
        return request(params, entry_id)

    def fetch(self, address: str, entry_id: Optional[str] = None) -> FetchedSource:
        """Download verified source for one address.

        Args:
            address: 0x-prefixed 20-byte account address.
            entry_id: Manifest id, used in error messages.

        Returns:
            FetchedSource with flattened source text and the provider's contract name.

        Raises:
            InvalidAddressError: Before any network call, on a malformed address.
            ProviderConfigurationError: Provider URL or API key missing.
            UnverifiedContractError: Provider has no source for the address.
            RetryableFetchError: Network failure persisted through all retries.
            ProviderError: Non-retryable HTTP status or unexpected body shape.
        """
        validate_address(address)
        api_key = self._api_key()
        logger.info(f"Fetching verified source for {address}")
        document = self._get(self._params(address, api_key), entry_id)

        try:
            source = extract_field(document, self.config.source_field)
        except KeyError:
            result = document.get("result") if isinstance(document, dict) else None
            if result == [] or result is None:
                raise UnverifiedContractError(f"No verified source for {address}") from None
            raise ProviderError(f"response has no field '{self.config.source_field}'",
                                entry_id=entry_id) from None
        if not isinstance(source, str) or not source.strip() or source.strip() == NOT_VERIFIED_MARKER:
            raise UnverifiedContractError(f"No verified source for {address}")

        try:
            name = extract_field(document, self.config.name_field)
        except KeyError:
            name = ""
        return FetchedSource(address, name if isinstance(name, str) else "", flatten_source(source))
