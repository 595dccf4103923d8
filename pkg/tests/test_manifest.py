"""Tests for manifest parsing, summaries and synthetic generation."""

from __future__ import annotations

from fractions import Fraction

import pytest

from blockload.manifest import (
    SHAPE_HEAVY_TAILED,
    SHAPE_UNIFORM,
    Manifest,
    SequenceRecord,
    SyntheticSpec,
    generate_synthetic,
    load_manifest,
    parse_manifest,
    serialize_manifest,
    summarize,
)
from blockload.utils.types import ManifestError

from tests.conftest import make_manifest


def test_parse_preserves_order_and_values() -> None:
    lines = [
        '{"id": "V1", "frames": 2}\n',
        '{"id": "V2", "frames": 3}\n',
        '{"id": "V3", "frames": 6}\n',
    ]
    manifest = parse_manifest(lines)
    assert [record.id for record in manifest] == ["V1", "V2", "V3"]
    assert manifest.lengths == (2, 3, 6)
    assert manifest.total_frames == 11


def test_parse_skips_blank_lines_and_accepts_bytes() -> None:
    manifest = parse_manifest([b'{"id": "a", "frames": 4}\n', b"\n", b"   \n", b'{"id": "b", "frames": 1}'])
    assert manifest.lengths == (4, 1)


def test_parse_rejects_invalid_utf8_with_line_number() -> None:
    with pytest.raises(ManifestError, match="not valid UTF-8") as info:
        parse_manifest([b'{"id": "a", "frames": 4}', b'{"id": "\xff", "frames": 2}'])
    assert info.value.line_number == 2


def test_parse_rejects_zero_frames_with_line_number() -> None:
    with pytest.raises(ManifestError, match="frames must be ≥ 1") as info:
        parse_manifest(['{"id": "V1", "frames": 3}', '{"id": "V2", "frames": 0}'])
    assert info.value.line_number == 2


def test_parse_rejects_duplicate_ids() -> None:
    with pytest.raises(ManifestError, match="duplicate id 'V1'") as info:
        parse_manifest(['{"id": "V1", "frames": 3}', "", '{"id": "V1", "frames": 4}'])
    assert info.value.line_number == 3


@pytest.mark.parametrize(
    "line",
    [
        "not json",
        '{"id": "V1"}',
        '{"id": "V1", "frames": 2, "extra": 1}',
        '["V1", 2]',
        '{"id": "", "frames": 2}',
        '{"id": 7, "frames": 2}',
        '{"id": "V1", "frames": 2.5}',
        '{"id": "V1", "frames": true}',
    ],
)
def test_parse_rejects_malformed_lines(line: str) -> None:
    with pytest.raises(ManifestError) as info:
        parse_manifest(['{"id": "ok", "frames": 1}', line])
    assert info.value.line_number == 2
    assert str(info.value).startswith("line 2:")


@pytest.mark.parametrize("lines", [[], ["", "  "]])
def test_parse_rejects_empty_input(lines: list) -> None:
    with pytest.raises(ManifestError, match="empty"):
        parse_manifest(lines)


def test_manifest_rejects_duplicates_on_construction() -> None:
    with pytest.raises(ManifestError, match="duplicate"):
        Manifest((SequenceRecord("a", 1), SequenceRecord("a", 2)))


def test_serialize_emits_id_then_frames() -> None:
    text = serialize_manifest(make_manifest([5, 1]))
    assert text == '{"id":"V1","frames":5}\n{"id":"V2","frames":1}\n'


def test_round_trip_through_file(tmp_path) -> None:
    manifest = make_manifest([9, 3, 3, 12])
    path = tmp_path / "m.jsonl"
    path.write_text(serialize_manifest(manifest), encoding="utf-8")
    assert load_manifest(path) == manifest


def test_summarize_small_manifest() -> None:
    stats = summarize(make_manifest([2, 3, 6]))
    assert stats.count == 3
    assert stats.total_frames == 11
    assert stats.min_len == 2
    assert stats.max_len == 6
    assert stats.mean_len == Fraction(11, 3)


def test_summarize_singleton() -> None:
    stats = summarize(make_manifest([5]))
    assert (stats.count, stats.min_len, stats.max_len, stats.mean_len) == (1, 5, 5, 5)


def test_summarize_empty_manifest() -> None:
    with pytest.raises(ManifestError, match="empty"):
        summarize(Manifest(()))


def test_generate_matches_action_genome_statistics(ag_manifest) -> None:
    stats = summarize(ag_manifest)
    assert stats.count == 7464
    assert stats.total_frames == 166785
    assert stats.max_len == 94
    assert stats.min_len >= 3


def test_generate_forced_by_bounds() -> None:
    manifest = generate_synthetic(SyntheticSpec(4, 4, 1, 1, SHAPE_UNIFORM), seed=3)
    assert manifest.lengths == (1, 1, 1, 1)


@pytest.mark.parametrize("shape", [SHAPE_UNIFORM, SHAPE_HEAVY_TAILED])
@pytest.mark.parametrize(
    "count,total,min_len,max_len",
    [(1, 7, 1, 7), (10, 10, 1, 1), (10, 100, 10, 10), (50, 400, 2, 30), (200, 1000, 1, 90), (30, 800, 3, 94)],
)
def test_generate_conserves_frames_and_bounds(shape, count, total, min_len, max_len) -> None:
    spec = SyntheticSpec(count, total, min_len, max_len, shape)
    for seed in range(5):
        manifest = generate_synthetic(spec, seed)
        stats = summarize(manifest)
        assert stats.count == count
        assert stats.total_frames == total
        assert stats.max_len == max_len
        assert stats.min_len >= min_len


def test_generate_is_deterministic(ag_spec) -> None:
    first = serialize_manifest(generate_synthetic(ag_spec, 5))
    second = serialize_manifest(generate_synthetic(ag_spec, 5))
    assert first == second
    assert serialize_manifest(generate_synthetic(ag_spec, 6)) != first


def test_generated_manifest_round_trips(ag_manifest) -> None:
    assert parse_manifest(serialize_manifest(ag_manifest).splitlines()) == ag_manifest


def test_heavy_tailed_has_many_short_sequences(ag_manifest) -> None:
    lengths = ag_manifest.lengths
    assert sum(1 for length in lengths if length <= 10) > len(lengths) // 5


@pytest.mark.parametrize(
    "spec",
    [
        SyntheticSpec(0, 10, 1, 5),
        SyntheticSpec(3, 10, 0, 5),
        SyntheticSpec(3, 10, 6, 5),
        SyntheticSpec(3, 2, 1, 5),
        SyntheticSpec(3, 16, 1, 5),
        SyntheticSpec(3, 6, 1, 5),
        SyntheticSpec(3, 9, 1, 5, shape="bimodal"),
    ],
)
def test_generate_rejects_infeasible_specs(spec) -> None:
    with pytest.raises(ManifestError):
        generate_synthetic(spec, seed=0)
