from __future__ import annotations

import json
from pathlib import Path

import pytest

from mrtrainer import manuals

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def manual_dir() -> Path:
    return FIXTURES / "manuals"


@pytest.fixture(scope="session")
def backend_dir() -> Path:
    return FIXTURES / "backends"


@pytest.fixture(scope="session")
def fixture_manuals(manual_dir) -> list[manuals.InstructionManual]:
    return manuals.load_manual_dir(manual_dir)


def make_manual(manual_id: str = "toy", steps: int = 3, piece_prefix: str = "piece") -> manuals.InstructionManual:
    """Small synthetic manual; step i carries piece ids and an image ref."""
    doc = {
        "id": manual_id,
        "title": manual_id.title(),
        "summary": f"Build the [[{manual_id}]] in {steps} steps.",
        "steps": [
            {
                "index": i,
                "instructions": [f"Attach the [[{piece_prefix} {i}]] to the build."],
                "image_ref": f"{manual_id}/step-{i}.png",
                "piece_ids": [f"{piece_prefix}-{i}"],
            }
            for i in range(1, steps + 1)
        ],
    }
    return manuals.parse_manual(doc)


@pytest.fixture
def toy_manual() -> manuals.InstructionManual:
    return make_manual()


def load_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))
