"""Test suite for the token auditor."""
