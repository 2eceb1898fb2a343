from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]
IMAGE_DIR = REPO_ROOT / "src" / "homkit" / "assets" / "images"


@pytest.fixture(scope="session")
def image_dir():
    assert IMAGE_DIR.is_dir() and any(IMAGE_DIR.glob("*.png"))
    return str(IMAGE_DIR)
