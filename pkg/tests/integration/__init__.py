"""Integration tests: corpus acceptance runs, CLI, simulator suite."""
