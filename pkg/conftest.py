"""Shared pytest fixtures."""

from pathlib import Path

import pytest


REPO_ROOT = Path(__file__).resolve().parent


@pytest.fixture(autouse=True)
def repo_cwd(monkeypatch):
    """Run every test from the repository root so configs/ and data/ resolve."""
    monkeypatch.chdir(REPO_ROOT)
