#
# packing.py
#
# Copyright 2024 The blockload authors. All rights reserved.
#

"""
Batching strategies for variable-length sequences. Each strategy turns a
manifest into a PackingPlan: an ordered list of equally sized blocks, each
holding contiguous pieces of sequences followed by tail padding.

- naive: one block per sequence, padded to the longest sequence
- chunks: fixed-size chunks cut from each sequence, remainders dropped
- mixed: one block per sequence, trimmed or padded to a fixed size
- bload: blocks of t_max frames filled with randomly drawn whole sequences
"""

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import orjson

from blockload.manifest import Manifest, require_records
from blockload.utils import log
from blockload.utils.types import (
    InfeasiblePackingError,
    PackingError,
    PlanFormatError,
)


class Strategy(Enum):
    """The batching strategies"""

    NAIVE = "naive"
    CHUNKS = "chunks"
    MIXED = "mixed"
    BLOAD = "bload"

    def __str__(self) -> str:
        return self.value


class Sampling(Enum):
    """How bload picks the next sequence among those that still fit"""

    # uniform over eligible sequences
    SEQUENCE = "sequence"
    # uniform over eligible lengths, then uniform within that length
    LENGTH = "length"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class BlockEntry:
    """A contiguous piece of one sequence placed inside a block"""

    sequence_id: str
    source_start: int
    length: int
    block_offset: int

    def as_dict(self) -> dict:
        """Returns the entry in plan file key order"""
        return {
            "id": self.sequence_id,
            "source_start": self.source_start,
            "length": self.length,
            "block_offset": self.block_offset,
        }


@dataclass(frozen=True)
class Block:
    """
    A fixed-capacity container: entries packed from offset 0 without gaps,
    then pad_frames of padding at the tail. Every block is exactly full and
    holds at least one entry.
    """

    entries: Tuple[BlockEntry, ...]
    capacity: int
    pad_frames: int

    def __post_init__(self):
        if self.capacity < 1:
            raise PackingError("block capacity must be ≥ 1")
        if not self.entries:
            raise PackingError("a block must hold at least one entry")
        if self.pad_frames < 0:
            raise PackingError("pad_frames must be ≥ 0")
        offset = 0
        for entry in self.entries:
            if entry.length < 1:
                raise PackingError(f"entry {entry.sequence_id} has length < 1")
            if entry.source_start < 0:
                raise PackingError(f"entry {entry.sequence_id} has negative source_start")
            if entry.block_offset != offset:
                raise PackingError(
                    f"entry {entry.sequence_id} starts at {entry.block_offset}, expected {offset}"
                )
            offset += entry.length
        if offset + self.pad_frames != self.capacity:
            raise PackingError(
                f"block holds {offset} frames and {self.pad_frames} padding, "
                f"but its capacity is {self.capacity}"
            )

    @property
    def used_frames(self) -> int:
        """Frames of real data in the block"""
        return self.capacity - self.pad_frames

    @staticmethod
    def fill(capacity: int, pieces: Sequence[Tuple[str, int, int]]) -> "Block":
        """Builds a block from (sequence_id, source_start, length) pieces, padding the tail"""
        entries = []
        offset = 0
        for sequence_id, source_start, length in pieces:
            entries.append(BlockEntry(sequence_id, source_start, length, offset))
            offset += length
        return Block(tuple(entries), capacity, capacity - offset)

    def as_dict(self) -> dict:
        """Returns the block in plan file key order"""
        return {
            "entries": [entry.as_dict() for entry in self.entries],
            "pad_frames": self.pad_frames,
        }


@dataclass(frozen=True)
class SourceSummary:
    """The size of the manifest a plan was built from"""

    count: int
    total_frames: int


@dataclass(frozen=True)
class PackingPlan:
    """The ordered blocks produced by one strategy, with its parameters"""

    strategy: Strategy
    capacity: int
    seed: int
    blocks: Tuple[Block, ...]
    source: Optional[SourceSummary] = None

    def __post_init__(self):
        if not self.blocks:
            raise PackingError("a plan must hold at least one block")
        for index, block in enumerate(self.blocks):
            if block.capacity != self.capacity:
                raise PackingError(
                    f"block {index} has capacity {block.capacity}, plan capacity is {self.capacity}"
                )

    def __len__(self) -> int:
        return len(self.blocks)

    def as_dict(self) -> dict:
        """Returns the plan document"""
        data = {
            "strategy": self.strategy.value,
            "capacity": self.capacity,
            "seed": self.seed,
            "blocks": [block.as_dict() for block in self.blocks],
        }
        if self.source is not None:
            data["source"] = {
                "count": self.source.count,
                "total_frames": self.source.total_frames,
            }
        return data


@dataclass(frozen=True)
class PackingMetrics:
    """The cost of a plan: padding added and frames lost"""

    padding_frames: int
    frames_deleted: int
    block_count: int
    processed_frames: int
    utilization: Fraction

    def as_dict(self) -> dict:
        """Returns the metrics, utilization as an exact fraction plus a float"""
        return {
            "padding_frames": self.padding_frames,
            "frames_deleted": self.frames_deleted,
            "block_count": self.block_count,
            "processed_frames": self.processed_frames,
            "utilization": str(self.utilization),
            "utilization_float": float(self.utilization),
        }


@dataclass(frozen=True)
class StartIndexTable:
    """Per block, the offsets at which each sequence piece begins"""

    rows: Tuple[Tuple[Tuple[int, str], ...], ...]

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, block_index: int) -> Tuple[Tuple[int, str], ...]:
        return self.rows[block_index]

    def as_list(self) -> List[List[list]]:
        """Returns the table as nested JSON-friendly lists"""
        return [[[offset, sequence_id] for offset, sequence_id in row] for row in self.rows]


def _source(manifest: Manifest) -> SourceSummary:
    return SourceSummary(len(manifest), manifest.total_frames)


def _require_positive(name: str, value: int) -> None:
    if value < 1:
        raise PackingError(f"{name} must be ≥ 1 (got {value})")


def pack_naive(manifest: Manifest, seed: int = 0) -> PackingPlan:
    """
    One block per sequence, in manifest order, padded to the longest sequence.
    Nothing is random; seed is only recorded in the plan.
    """
    require_records(manifest)
    capacity = manifest.max_len
    blocks = tuple(
        Block.fill(capacity, [(record.id, 0, record.frames)]) for record in manifest
    )
    log.debug(f"naive: {len(blocks)} blocks of {capacity} frames")
    return PackingPlan(Strategy.NAIVE, capacity, seed, blocks, _source(manifest))


def pack_chunks(manifest: Manifest, t_block: int, seed: int = 0) -> PackingPlan:
    """
    Cuts every sequence into consecutive chunks of exactly t_block frames.
    The remainder of each sequence is deleted, as are sequences shorter
    than t_block. There is never any padding.
    """
    require_records(manifest)
    _require_positive("t_block", t_block)
    blocks = []
    for record in manifest:
        for chunk in range(record.frames // t_block):
            blocks.append(Block.fill(t_block, [(record.id, chunk * t_block, t_block)]))
    if not blocks:
        raise InfeasiblePackingError(
            f"no packable sequences: every sequence is shorter than {t_block} frames"
        )
    log.debug(f"chunks: {len(blocks)} blocks of {t_block} frames")
    return PackingPlan(Strategy.CHUNKS, t_block, seed, tuple(blocks), _source(manifest))


def pack_mixed(manifest: Manifest, t_mix: int, seed: int = 0) -> PackingPlan:
    """
    One block of t_mix frames per sequence: longer sequences keep their
    first t_mix frames, shorter ones are padded.
    """
    require_records(manifest)
    _require_positive("t_mix", t_mix)
    blocks = tuple(
        Block.fill(t_mix, [(record.id, 0, min(record.frames, t_mix))]) for record in manifest
    )
    log.debug(f"mixed: {len(blocks)} blocks of {t_mix} frames")
    return PackingPlan(Strategy.MIXED, t_mix, seed, blocks, _source(manifest))


def pack_bload(
    manifest: Manifest,
    t_max: Optional[int] = None,
    seed: int = 0,
    sampling: Sampling = Sampling.SEQUENCE,
) -> PackingPlan:
    """
    Greedy block construction. A block starts with t_max free frames; while
    some unplaced sequence fits in what is left, one of them is drawn at
    random and appended. When nothing fits the rest is padded and the next
    block opens. Sequences are never split, every one is placed exactly once,
    and the result is a pure function of (manifest, t_max, seed, sampling).
    """
    require_records(manifest)
    if t_max is None:
        t_max = manifest.max_len
    _require_positive("t_max", t_max)
    for record in manifest:
        if record.frames > t_max:
            raise InfeasiblePackingError(
                f"sequence {record.id} has {record.frames} frames, more than t_max={t_max}",
                sequence_id=record.id,
            )

    records = manifest.records
    # unplaced record indices, bucketed by length
    buckets: Dict[int, List[int]] = {}
    for index, record in enumerate(records):
        buckets.setdefault(record.frames, []).append(index)
    lengths = sorted(buckets)
    rng = np.random.default_rng(seed)
    draw = _draw_by_sequence if sampling == Sampling.SEQUENCE else _draw_by_length

    blocks = []
    unplaced = len(records)
    while unplaced:
        remaining = t_max
        pieces = []
        while True:
            index = draw(buckets, lengths, remaining, rng)
            if index is None:
                break
            record = records[index]
            pieces.append((record.id, 0, record.frames))
            remaining -= record.frames
            unplaced -= 1
        blocks.append(Block.fill(t_max, pieces))

    log.debug(f"bload: {len(blocks)} blocks of {t_max} frames, seed {seed}, {sampling}")
    return PackingPlan(Strategy.BLOAD, t_max, seed, tuple(blocks), _source(manifest))


def _take(bucket: List[int], position: int) -> int:
    """Removes and returns bucket[position], moving the last item into its place"""
    item = bucket[position]
    bucket[position] = bucket[-1]
    bucket.pop()
    return item


def _draw_by_sequence(
    buckets: Dict[int, List[int]],
    lengths: List[int],
    remaining: int,
    rng: np.random.Generator,
) -> Optional[int]:
    eligible = 0
    for length in lengths:
        if length > remaining:
            break
        eligible += len(buckets[length])
    if eligible == 0:
        return None
    position = int(rng.integers(eligible))
    for length in lengths:
        bucket = buckets[length]
        if position < len(bucket):
            return _take(bucket, position)
        position -= len(bucket)
    raise AssertionError("draw position beyond the eligible sequences")


def _draw_by_length(
    buckets: Dict[int, List[int]],
    lengths: List[int],
    remaining: int,
    rng: np.random.Generator,
) -> Optional[int]:
    eligible = [length for length in lengths if length <= remaining and buckets[length]]
    if not eligible:
        return None
    bucket = buckets[eligible[int(rng.integers(len(eligible)))]]
    return _take(bucket, int(rng.integers(len(bucket))))


def pack(  # pylint: disable=too-many-arguments
    manifest: Manifest,
    strategy: Strategy,
    seed: int = 0,
    t_max: Optional[int] = None,
    t_block: Optional[int] = None,
    t_mix: Optional[int] = None,
    sampling: Sampling = Sampling.SEQUENCE,
) -> PackingPlan:
    """
    Dispatches to a strategy. Missing t_block and t_mix default to the
    average sequence length, missing t_max to the longest sequence.
    """
    if strategy == Strategy.NAIVE:
        return pack_naive(manifest, seed)
    if strategy == Strategy.CHUNKS:
        if t_block is None:
            t_block = default_block_length(manifest)
        return pack_chunks(manifest, t_block, seed)
    if strategy == Strategy.MIXED:
        if t_mix is None:
            t_mix = default_block_length(manifest)
        return pack_mixed(manifest, t_mix, seed)
    return pack_bload(manifest, t_max, seed, sampling)


def default_block_length(manifest: Manifest) -> int:
    """The length of the average sequence, rounded down"""
    require_records(manifest)
    return max(1, manifest.total_frames // len(manifest))


def calibrate_t_mix(manifest: Manifest, padding_target: int, deleted_target: int) -> int:
    """
    Finds the t_mix within the manifest's length range whose padding and
    deleted frames are jointly closest to the targets; ties go to the
    smaller t_mix.
    """
    require_records(manifest)
    counts = Counter(manifest.lengths)
    best_t_mix, best_gap = 0, None
    for t_mix in range(min(counts), max(counts) + 1):
        padding = sum(n * (t_mix - length) for length, n in counts.items() if length < t_mix)
        deleted = sum(n * (length - t_mix) for length, n in counts.items() if length > t_mix)
        gap = abs(padding - padding_target) + abs(deleted - deleted_target)
        if best_gap is None or gap < best_gap:
            best_t_mix, best_gap = t_mix, gap
    log.debug(f"calibrated t_mix={best_t_mix}, distance {best_gap}")
    return best_t_mix


def _metrics(plan: PackingPlan, total_frames: int) -> PackingMetrics:
    padding = sum(block.pad_frames for block in plan.blocks)
    used = sum(entry.length for block in plan.blocks for entry in block.entries)
    processed = len(plan.blocks) * plan.capacity
    return PackingMetrics(
        padding_frames=padding,
        frames_deleted=total_frames - used,
        block_count=len(plan.blocks),
        processed_frames=processed,
        utilization=1 - Fraction(padding, processed),
    )


def compute_metrics(plan: PackingPlan, manifest: Manifest) -> PackingMetrics:
    """Padding, deleted frames and block counts of a plan over its manifest"""
    by_id = manifest.by_id
    for block in plan.blocks:
        for entry in block.entries:
            record = by_id.get(entry.sequence_id)
            if record is None:
                raise PackingError(f"plan references unknown sequence {entry.sequence_id!r}")
            if entry.source_start + entry.length > record.frames:
                raise PackingError(
                    f"entry for {entry.sequence_id} covers frames "
                    f"{entry.source_start}..{entry.source_start + entry.length - 1}, "
                    f"but the sequence has {record.frames}"
                )
    return _metrics(plan, manifest.total_frames)


def plan_metrics(plan: PackingPlan) -> PackingMetrics:
    """Metrics from the source totals recorded in the plan itself"""
    if plan.source is None:
        raise PackingError("plan does not record the manifest it was built from")
    return _metrics(plan, plan.source.total_frames)


def verify_unsplit(plan: PackingPlan, manifest: Manifest) -> None:
    """
    Checks that every sequence of the manifest appears in exactly one entry,
    whole and from its first frame, as naive and bload plans guarantee
    """
    placed: Dict[str, int] = {}
    for block in plan.blocks:
        for entry in block.entries:
            if entry.sequence_id in placed:
                raise PackingError(f"sequence {entry.sequence_id} is placed twice")
            if entry.source_start != 0:
                raise PackingError(f"sequence {entry.sequence_id} does not start at frame 0")
            placed[entry.sequence_id] = entry.length
    for record in manifest:
        if placed.get(record.id) != record.frames:
            raise PackingError(f"sequence {record.id} is missing or split")
    if len(placed) != len(manifest):
        raise PackingError("plan holds sequences that are not in the manifest")


def start_index_table(plan: PackingPlan) -> StartIndexTable:
    """Reads off where each piece starts within its block"""
    rows = []
    for block in plan.blocks:
        assert block.entries, "blocks always hold at least one entry"
        rows.append(tuple((entry.block_offset, entry.sequence_id) for entry in block.entries))
    return StartIndexTable(tuple(rows))


def plan_to_json(plan: PackingPlan) -> bytes:
    """Encodes a plan document"""
    return orjson.dumps(plan.as_dict()) + b"\n"


def plan_from_json(data: Union[bytes, str]) -> PackingPlan:
    """Decodes and validates a plan document"""
    try:
        document = orjson.loads(data)
        blocks = tuple(
            Block(
                tuple(
                    BlockEntry(
                        sequence_id=_expect(entry["id"], str),
                        source_start=_expect(entry["source_start"], int),
                        length=_expect(entry["length"], int),
                        block_offset=_expect(entry["block_offset"], int),
                    )
                    for entry in block["entries"]
                ),
                _expect(document["capacity"], int),
                _expect(block["pad_frames"], int),
            )
            for block in document["blocks"]
        )
        source = None
        if document.get("source") is not None:
            source = SourceSummary(
                _expect(document["source"]["count"], int),
                _expect(document["source"]["total_frames"], int),
            )
        return PackingPlan(
            strategy=Strategy(document["strategy"]),
            capacity=_expect(document["capacity"], int),
            seed=_expect(document["seed"], int),
            blocks=blocks,
            source=source,
        )
    except orjson.JSONDecodeError as exc:
        raise PlanFormatError(f"plan is not valid JSON: {exc}") from exc
    except KeyError as exc:
        raise PlanFormatError(f"plan is missing key: {exc}") from exc
    except (TypeError, ValueError, PackingError) as exc:
        raise PlanFormatError(f"invalid plan: {exc}") from exc


def _expect(value, kind: type):
    if isinstance(value, bool) or not isinstance(value, kind):
        raise TypeError(f"expected {kind.__name__}, got {value!r}")
    return value


def load_plan(path: Path) -> PackingPlan:
    """Reads and decodes a plan file"""
    log.info(f"Reading plan from {path}")
    return plan_from_json(Path(path).read_bytes())
