"""Service layer: corpus pipeline, source fetcher, cache, safe-administration simulator."""
