from __future__ import annotations

from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def conformance_vectors():
    """Parsed rows from conformance/wire_frames.txt."""
    rows = []
    path = REPO_ROOT / "conformance" / "wire_frames.txt"
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, hexbytes, nframes, errs = (part.strip() for part in line.split("|"))
        kinds = [] if errs == "-" else [k.strip() for k in errs.split(",")]
        rows.append((name, bytes.fromhex(hexbytes), int(nframes), kinds))
    assert rows, "conformance file is empty"
    return rows
