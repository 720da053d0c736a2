"""Content-addressed result cache.

Analysis results are pure functions of (tool version, input bytes, config),
so entries are keyed by digest and never expire. Duplicate contracts in a
corpus are analyzed once.

Structure: {namespace: {digest: value}}
"""

import logging
from threading import Lock
from typing import Any, Callable, Dict, Optional

logger = logging.getLogger(__name__)


class CacheManager:
    """Thread-safe in-memory cache shared by corpus workers."""

    def __init__(self):
        self._cache: Dict[str, Dict[str, Any]] = {}
        self._lock = Lock()
        self._stats = {
            "hits": 0,
            "misses": 0,
            "sets": 0,
        }

    def get(self, namespace: str, key: str) -> Optional[Any]:
        """Get value from cache.

        Args:
            namespace: Cache namespace (e.g., 'analysis')
            key: Content digest

        Returns:
            Cached value or None if not present
        """
        with self._lock:
            entry = self._cache.get(namespace, {})
            if key not in entry:
                self._stats["misses"] += 1
                return None
            self._stats["hits"] += 1
            return entry[key]

    def set(self, namespace: str, key: str, value: Any) -> None:
        with self._lock:
            self._cache.setdefault(namespace, {})[key] = value
            self._stats["sets"] += 1
            logger.debug(f"Cache SET: {namespace}[{key[:12]}]")

    def get_or_compute(self, namespace: str, key: str, compute: Callable[[], Any]) -> Any:
        """Return the cached value, computing and storing it on a miss.

        Two workers missing on the same key may both compute; the results are
        identical, so the later store is harmless.
        """
        value = self.get(namespace, key)
        if value is not None:
            return value
        value = compute()
        self.set(namespace, key, value)
        return value

    def get_stats(self) -> Dict[str, Any]:
        """Get cache statistics.

        Returns:
            Dictionary with cache stats (hits, misses, hit rate, etc.)
        """
        with self._lock:
            total_requests = self._stats["hits"] + self._stats["misses"]
            hit_rate = (
                (self._stats["hits"] / total_requests * 100)
                if total_requests > 0
                else 0.0
            )
            return {
                "hits": self._stats["hits"],
                "misses": self._stats["misses"],
                "hit_rate": f"{hit_rate:.1f}%",
                "sets": self._stats["sets"],
                "total_entries": sum(len(ns) for ns in self._cache.values()),
                "namespaces": sorted(self._cache.keys()),
            }

    def log_stats(self) -> None:
        """Log current cache statistics."""
        stats = self.get_stats()
        logger.info(f"Cache Stats: {stats['hits']} hits, {stats['misses']} misses, "
                    f"{stats['hit_rate']} hit rate, {stats['total_entries']} entries")
