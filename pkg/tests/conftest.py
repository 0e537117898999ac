from __future__ import annotations

from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return REPO_ROOT / "fixtures"


@pytest.fixture(scope="session")
def ten_manifests(fixtures_dir) -> list[str]:
    return [str(fixtures_dir / "tenimages" / f"ten{k:02d}.json")
            for k in range(10)]
