#
# oracle.py
#
# Copyright 2024 The blockload authors. All rights reserved.
#

"""
Exact minimum-padding packing for small instances, used as ground truth
for the greedy strategies.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

from blockload.constants import ORACLE_MAX_SEQUENCES
from blockload.manifest import Manifest, require_records
from blockload.packing import Block
from blockload.utils import log
from blockload.utils.types import InfeasiblePackingError, OracleError

# a packing: blocks of manifest indices, each ascending, blocks ordered by first index
Partition = Tuple[Tuple[int, ...], ...]


@dataclass(frozen=True)
class OptimalResult:
    """The fewest blocks any unsplit packing needs, with one witness packing"""

    capacity: int
    min_blocks: int
    min_padding: int
    witness: Tuple[Tuple[str, ...], ...]

    def witness_blocks(self, manifest: Manifest) -> List[Block]:
        """The witness as full blocks, sequences in witness order"""
        by_id = manifest.by_id
        return [
            Block.fill(
                self.capacity,
                [(sequence_id, 0, by_id[sequence_id].frames) for sequence_id in block],
            )
            for block in self.witness
        ]

    def as_dict(self) -> dict:
        """Returns the result as a dictionary"""
        return {
            "capacity": self.capacity,
            "min_blocks": self.min_blocks,
            "min_padding": self.min_padding,
            "witness": [list(block) for block in self.witness],
        }


def optimal_packing(manifest: Manifest, capacity: int) -> OptimalResult:
    """
    Memoized dynamic programming over the 2^n subsets of sequences. For each
    subset the best packing is built from a feasible block holding its
    lowest-indexed sequence plus the best packing of what is left, so
    packings compare as sorted block lists and the witness is the
    lexicographically least among those with the fewest blocks.
    """
    require_records(manifest)
    if capacity < 1:
        raise OracleError("capacity must be ≥ 1")
    count = len(manifest)
    if count > ORACLE_MAX_SEQUENCES:
        raise OracleError(
            f"instance too large: {count} sequences, the exhaustive search "
            f"accepts at most {ORACLE_MAX_SEQUENCES}"
        )
    lengths = manifest.lengths
    for record in manifest:
        if record.frames > capacity:
            raise InfeasiblePackingError(
                f"sequence {record.id} has {record.frames} frames, more than capacity {capacity}",
                sequence_id=record.id,
            )

    full = (1 << count) - 1
    subset_frames = [0] * (full + 1)
    for mask in range(1, full + 1):
        low_bit = mask & -mask
        subset_frames[mask] = subset_frames[mask ^ low_bit] + lengths[low_bit.bit_length() - 1]

    members = [_indices(mask) for mask in range(full + 1)]

    best: List[Optional[Tuple[int, Partition]]] = [None] * (full + 1)
    best[0] = (0, ())
    for mask in range(1, full + 1):
        low_bit = mask & -mask
        rest = mask ^ low_bit
        candidate: Optional[Tuple[int, Partition]] = None
        # walk every subset of rest, joined with the lowest sequence
        sub = rest
        while True:
            block = sub | low_bit
            if subset_frames[block] <= capacity:
                remainder = best[mask ^ block]
                assert remainder is not None
                option = (remainder[0] + 1, (members[block],) + remainder[1])
                if candidate is None or option < candidate:
                    candidate = option
            if sub == 0:
                break
            sub = (sub - 1) & rest
        best[mask] = candidate

    result = best[full]
    assert result is not None
    min_blocks, partition = result
    witness = tuple(
        tuple(manifest.records[index].id for index in block) for block in partition
    )
    log.debug(f"oracle: {count} sequences fit in {min_blocks} blocks of {capacity}")
    return OptimalResult(
        capacity=capacity,
        min_blocks=min_blocks,
        min_padding=min_blocks * capacity - manifest.total_frames,
        witness=witness,
    )


def _indices(mask: int) -> Tuple[int, ...]:
    return tuple(index for index in range(mask.bit_length()) if mask >> index & 1)
