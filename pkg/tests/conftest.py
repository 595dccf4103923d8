"""Shared fixtures for the blockload test suite."""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Sequence

import pytest

from blockload.constants import PRESETS
from blockload.manifest import (
    SHAPE_HEAVY_TAILED,
    Manifest,
    SyntheticSpec,
    generate_synthetic,
    serialize_manifest,
)

# generator seed documented for the Action-Genome-shaped manifest
AG_SEED = 17


def make_manifest(lengths: Sequence[int], prefix: str = "V") -> Manifest:
    """A manifest with ids V1, V2, ... and the given lengths."""
    return Manifest.from_lengths(lengths, prefix=prefix)


@pytest.fixture(scope="session")
def ag_spec() -> SyntheticSpec:
    return SyntheticSpec(shape=SHAPE_HEAVY_TAILED, **PRESETS["action-genome-train"])


@pytest.fixture(scope="session")
def ag_manifest(ag_spec: SyntheticSpec) -> Manifest:
    return generate_synthetic(ag_spec, AG_SEED)


@pytest.fixture
def write_manifest(tmp_path: Path) -> Callable[..., Path]:
    """Writes a manifest built from lengths (or given as text) and returns its path."""

    def _write(lengths: Sequence[int] = (), name: str = "manifest.jsonl", text: str | None = None) -> Path:
        path = tmp_path / name
        if text is None:
            text = serialize_manifest(make_manifest(lengths))
        path.write_text(text, encoding="utf-8")
        return path

    return _write
