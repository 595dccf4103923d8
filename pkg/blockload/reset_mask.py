#
# reset_mask.py
#
# Copyright 2024 The blockload authors. All rights reserved.
#

"""
Per-frame control masks for recurrent training over packed blocks.
A recurrent model that carries state from frame t-1 into frame t has to
drop that state wherever a new sequence begins and ignore padding frames.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from blockload.packing import Block, PackingPlan


@dataclass(frozen=True)
class FrameMasks:
    """
    reset[t] is set where a sequence begins, valid[t] on real frames.
    Arrays are (capacity,) for one block or (blocks, capacity) for a plan.
    """

    reset: np.ndarray
    valid: np.ndarray

    def as_dict(self) -> dict:
        """Returns both masks as nested lists of 0/1"""
        return {
            "reset": self.reset.astype(np.uint8).tolist(),
            "valid": self.valid.astype(np.uint8).tolist(),
        }


def build_masks(block: Block) -> FrameMasks:
    """
    Marks the first frame of every entry as a reset point and the tail
    padding as invalid. Padding is never a reset point.
    """
    reset = np.zeros(block.capacity, dtype=bool)
    reset[[entry.block_offset for entry in block.entries]] = True
    valid = np.zeros(block.capacity, dtype=bool)
    valid[: block.used_frames] = True
    return FrameMasks(reset=reset, valid=valid)


def masks_for_plan(plan: PackingPlan) -> FrameMasks:
    """Masks of every block of a plan, stacked block-major"""
    per_block = [build_masks(block) for block in plan.blocks]
    return FrameMasks(
        reset=np.stack([masks.reset for masks in per_block]),
        valid=np.stack([masks.valid for masks in per_block]),
    )


def run_accumulator(masks: FrameMasks, values: Sequence[float]) -> np.ndarray:
    """
    A toy recurrent carry over the masks of one block:
    s[t] = (0 if reset[t] else s[t-1]) + x[t] on valid frames. Padding
    frames neither read nor change the state and report 0.
    """
    frames = np.asarray(values)
    if frames.shape != masks.reset.shape:
        raise ValueError(f"expected {masks.reset.shape} values, got {frames.shape}")
    states = np.zeros(frames.shape, dtype=frames.dtype)
    state = frames.dtype.type(0)
    for step, value in enumerate(frames):
        if not masks.valid[step]:
            continue
        if masks.reset[step]:
            state = frames.dtype.type(0)
        state = state + value
        states[step] = state
    return states
