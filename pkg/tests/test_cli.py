"""End-to-end tests of the command line through run()."""

from __future__ import annotations

from pathlib import Path

import orjson
import pytest
import yaml

from blockload.cli import run
from blockload.constants import (
    EXIT_INFEASIBLE,
    EXIT_INVALID_MANIFEST,
    EXIT_OK,
    EXIT_USAGE,
    REFERENCE_DELETED,
    REFERENCE_PADDING,
)
from blockload.packing import calibrate_t_mix, load_plan

from tests.conftest import make_manifest


@pytest.fixture
def small_manifest(write_manifest) -> Path:
    return write_manifest([2, 2, 6, 6])


def test_gen_manifest_to_stdout(capsys) -> None:
    code = run(["gen-manifest", "--count", "5", "--total-frames", "20", "--min-len", "1", "--max-len", "9", "--seed", "3"])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    records = [orjson.loads(line) for line in lines]
    assert len(records) == 5
    assert sum(record["frames"] for record in records) == 20


def test_gen_manifest_preset_to_file(tmp_path, capsys) -> None:
    out = tmp_path / "ag.jsonl"
    code = run(["gen-manifest", "--preset", "action-genome-test", "--seed", "2", "--out", str(out)])
    assert code == EXIT_OK
    summary = yaml.safe_load(capsys.readouterr().out)
    assert summary["count"] == 1737
    assert summary["total_frames"] == 54371
    assert len(out.read_text().splitlines()) == 1737
    assert [path.name for path in tmp_path.iterdir()] == ["ag.jsonl"]


def test_gen_manifest_needs_bounds_without_preset(capsys) -> None:
    assert run(["gen-manifest", "--count", "5", "--seed", "3"]) == EXIT_USAGE
    assert "--total-frames" in capsys.readouterr().err


def test_gen_manifest_infeasible_spec(capsys) -> None:
    code = run(["gen-manifest", "--count", "5", "--total-frames", "2", "--min-len", "1", "--max-len", "9", "--seed", "3"])
    assert code == EXIT_INVALID_MANIFEST


def test_pack_is_byte_identical_across_runs(small_manifest, tmp_path) -> None:
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    for out in (first, second):
        args = ["pack", "--manifest", str(small_manifest), "--strategy", "bload", "--seed", "7", "--out", str(out)]
        assert run(args) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    assert len(load_plan(first).blocks) == 3


def test_pack_uses_global_seed(small_manifest, capsys) -> None:
    assert run(["--seed", "7", "pack", "--manifest", str(small_manifest), "--strategy", "bload"]) == EXIT_OK
    plan = orjson.loads(capsys.readouterr().out)
    assert plan["seed"] == 7


def test_pack_requires_a_seed(small_manifest, capsys) -> None:
    assert run(["pack", "--manifest", str(small_manifest), "--strategy", "bload"]) == EXIT_USAGE
    assert "--seed is required" in capsys.readouterr().err


def test_pack_rejects_unknown_strategy(small_manifest) -> None:
    assert run(["pack", "--manifest", str(small_manifest), "--strategy", "greedy", "--seed", "1"]) == EXIT_USAGE


def test_pack_reports_sequence_longer_than_block(write_manifest, capsys) -> None:
    manifest = write_manifest([3, 6, 2])
    code = run(["pack", "--manifest", str(manifest), "--strategy", "bload", "--t-max", "4", "--seed", "1"])
    assert code == EXIT_INFEASIBLE
    assert "V2" in capsys.readouterr().err


def test_pack_chunks_with_nothing_to_keep(write_manifest) -> None:
    manifest = write_manifest([2, 3])
    code = run(["pack", "--manifest", str(manifest), "--strategy", "chunks", "--t-block", "5", "--seed", "1"])
    assert code == EXIT_INFEASIBLE


def test_invalid_manifest_exit_code(write_manifest, capsys) -> None:
    manifest = write_manifest(text='{"id": "V1", "frames": 3}\n{"id": "V2", "frames": 0}\n')
    code = run(["pack", "--manifest", str(manifest), "--strategy", "naive", "--seed", "1"])
    assert code == EXIT_INVALID_MANIFEST
    assert "line 2" in capsys.readouterr().err


def test_missing_manifest_file(tmp_path) -> None:
    assert run(["pack", "--manifest", str(tmp_path / "nope.jsonl"), "--strategy", "naive", "--seed", "1"]) == EXIT_USAGE


def write_plans(manifest: Path, tmp_path: Path) -> list:
    paths = []
    for strategy in ["naive", "chunks", "mixed", "bload"]:
        out = tmp_path / f"{strategy}.json"
        args = ["pack", "--manifest", str(manifest), "--strategy", strategy, "--seed", "5", "--out", str(out)]
        assert run(args) == EXIT_OK
        paths.append(str(out))
    return paths


def test_report_renders_table(small_manifest, tmp_path, capsys) -> None:
    plans = write_plans(small_manifest, tmp_path)
    capsys.readouterr()
    assert run(["report", "--plans", ",".join(plans)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "padding amount" in text
    assert "# frames deleted" in text
    assert "block_pad" in text


def test_report_is_a_function_of_its_plans(small_manifest, tmp_path, capsys) -> None:
    plans = ",".join(write_plans(small_manifest, tmp_path))
    capsys.readouterr()
    run(["--format", "json", "report", "--plans", plans])
    first = capsys.readouterr().out
    small_manifest.unlink()
    run(["--format", "json", "report", "--plans", plans])
    assert capsys.readouterr().out == first


def test_report_rejects_missing_plan(tmp_path) -> None:
    assert run(["report", "--plans", str(tmp_path / "missing.json")]) == EXIT_USAGE


def test_report_rejects_malformed_plan(tmp_path) -> None:
    plan = tmp_path / "plan.json"
    plan.write_text('{"strategy": "bload"}')
    assert run(["report", "--plans", str(plan)]) == EXIT_USAGE


def test_oracle_json(small_manifest, capsys) -> None:
    assert run(["--format", "json", "oracle", "--manifest", str(small_manifest), "--capacity", "6"]) == EXIT_OK
    result = orjson.loads(capsys.readouterr().out)
    assert result["min_blocks"] == 3
    assert result["min_padding"] == 2
    assert result["witness"] == [["V1", "V2"], ["V3"], ["V4"]]


def test_oracle_too_large(write_manifest) -> None:
    manifest = write_manifest([1] * 13)
    assert run(["oracle", "--manifest", str(manifest), "--capacity", "4"]) == EXIT_USAGE


def test_simulate_raw_sequences_can_deadlock(write_manifest, capsys) -> None:
    manifest = write_manifest([3, 8])
    args = ["--format", "json", "simulate", "--manifest", str(manifest), "--raw", "--world-size", "2", "--seed", "0"]
    assert run(args) == EXIT_OK
    trace = orjson.loads(capsys.readouterr().out)
    assert trace["deadlock"]["iteration"] == 4
    assert trace["round_iterations"] in ([[3, 8]], [[8, 3]])


def test_simulate_plan_never_deadlocks(small_manifest, tmp_path, capsys) -> None:
    plan = tmp_path / "plan.json"
    run(["pack", "--manifest", str(small_manifest), "--strategy", "bload", "--seed", "2", "--out", str(plan)])
    capsys.readouterr()
    args = ["simulate", "--plan", str(plan), "--world-size", "3", "--cost-per-frame", "1/2", "--seed", "4"]
    assert run(args) == EXIT_OK
    summary = yaml.safe_load(capsys.readouterr().out)
    assert summary["deadlock"] is False
    assert summary["simulated_time"] == 3.0


def test_simulate_needs_one_source(small_manifest) -> None:
    assert run(["simulate", "--manifest", str(small_manifest), "--seed", "1"]) == EXIT_USAGE
    assert run(["simulate", "--seed", "1"]) == EXIT_USAGE


def test_simulate_without_a_complete_round(small_manifest) -> None:
    args = ["simulate", "--manifest", str(small_manifest), "--raw", "--world-size", "5", "--seed", "1"]
    assert run(args) == EXIT_USAGE


def test_masks_of_one_block(tmp_path, capsys) -> None:
    plan = tmp_path / "plan.json"
    plan.write_bytes(
        orjson.dumps(
            {
                "strategy": "bload",
                "capacity": 6,
                "seed": 0,
                "blocks": [
                    {
                        "entries": [
                            {"id": "V3", "source_start": 0, "length": 3, "block_offset": 0},
                            {"id": "V7", "source_start": 0, "length": 2, "block_offset": 3},
                        ],
                        "pad_frames": 1,
                    }
                ],
            }
        )
    )
    assert run(["masks", "--plan", str(plan), "--block", "0"]) == EXIT_OK
    assert capsys.readouterr().out == "reset: [1,0,0,1,0,0]\nvalid: [1,1,1,1,1,0]\n"
    assert run(["masks", "--plan", str(plan), "--block", "1"]) == EXIT_USAGE


def test_compare_writes_json_artifact(small_manifest, tmp_path, capsys) -> None:
    out = tmp_path / "report.json"
    args = ["compare", "--manifest", str(small_manifest), "--seed", "1", "--t-max", "6", "--out", str(out)]
    assert run(args) == EXIT_OK
    assert "0 padding" in capsys.readouterr().out
    document = orjson.loads(out.read_bytes())
    assert document["padding_reduction"] == "4"


def test_settings_from_environment(small_manifest, tmp_path, capsys, monkeypatch) -> None:
    plan = tmp_path / "plan.json"
    run(["pack", "--manifest", str(small_manifest), "--strategy", "naive", "--seed", "2", "--out", str(plan)])
    capsys.readouterr()
    monkeypatch.setenv("BLOCKLOAD_OUTPUT_FORMAT", "json")
    monkeypatch.setenv("BLOCKLOAD_WORLD_SIZE", "4")
    assert run(["simulate", "--plan", str(plan), "--seed", "0"]) == EXIT_OK
    trace = orjson.loads(capsys.readouterr().out)
    assert trace["world_size"] == 4


def test_invalid_log_level_warns(small_manifest, capsys) -> None:
    code = run(["--log-level", "LOUD", "pack", "--manifest", str(small_manifest), "--strategy", "naive", "--seed", "1"])
    assert code == EXIT_OK
    assert "Invalid log level" in capsys.readouterr().err


def test_manifest_with_invalid_utf8(tmp_path) -> None:
    manifest = tmp_path / "bad.jsonl"
    manifest.write_bytes(b'{"id": "V1", "frames": 3}\n{"id": "\xff\xfe", "frames": 2}\n')
    code = run(["pack", "--manifest", str(manifest), "--strategy", "naive", "--seed", "1"])
    assert code == EXIT_INVALID_MANIFEST


def test_unwritable_out_path(small_manifest, tmp_path, capsys) -> None:
    blocker = tmp_path / "not-a-directory"
    blocker.write_text("")
    out = blocker / "plan.json"
    code = run(["pack", "--manifest", str(small_manifest), "--strategy", "naive", "--seed", "1", "--out", str(out)])
    assert code == EXIT_USAGE
    assert "cannot access" in capsys.readouterr().err


def test_pack_records_the_given_seed(small_manifest, capsys) -> None:
    for strategy in ["naive", "chunks", "mixed", "bload"]:
        assert run(["pack", "--manifest", str(small_manifest), "--strategy", strategy, "--seed", "7"]) == EXIT_OK
        assert orjson.loads(capsys.readouterr().out)["seed"] == 7


def test_pack_with_calibrated_t_mix(write_manifest, capsys) -> None:
    lengths = [3, 10, 25, 40, 60, 94, 12, 7]
    manifest = write_manifest(lengths)
    args = ["pack", "--manifest", str(manifest), "--strategy", "mixed", "--calibrate-mix", "--seed", "1"]
    assert run(args) == EXIT_OK
    plan = orjson.loads(capsys.readouterr().out)
    expected = calibrate_t_mix(make_manifest(lengths), REFERENCE_PADDING["mixed"], REFERENCE_DELETED["mixed"])
    assert plan["capacity"] == expected


def test_calibrated_t_mix_excludes_explicit_t_mix(small_manifest, capsys) -> None:
    args = ["pack", "--manifest", str(small_manifest), "--strategy", "mixed", "--calibrate-mix", "--t-mix", "4", "--seed", "1"]
    assert run(args) == EXIT_USAGE
    assert "mutually exclusive" in capsys.readouterr().err


def test_compare_with_calibrated_t_mix(small_manifest, capsys) -> None:
    args = ["--format", "json", "compare", "--manifest", str(small_manifest), "--calibrate-mix", "--seed", "1"]
    assert run(args) == EXIT_OK
    document = orjson.loads(capsys.readouterr().out)
    mixed = [entry for entry in document["strategies"] if entry["strategy"] == "mixed"][0]
    assert mixed["capacity"] == calibrate_t_mix(make_manifest([2, 2, 6, 6]), 37712, 40289)


def test_debug_log_lists_default_settings(small_manifest, capsys) -> None:
    code = run(["--log-level", "DEBUG", "pack", "--manifest", str(small_manifest), "--strategy", "naive", "--seed", "1"])
    assert code == EXIT_OK
    err = capsys.readouterr().err
    assert "Default settings:" in err
    assert "'world_size': 8" in err
