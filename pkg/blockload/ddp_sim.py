#
# ddp_sim.py
#
# Copyright 2024 The blockload authors. All rights reserved.
#

"""
A deterministic interpreter of distributed data-parallel training over
variable-length work. Every rank runs one iteration per frame of the
longest unit in its batch, and every iteration ends in a gradient
all-reduce that needs all ranks. New batches are only fetched once every
rank has finished its current one. If the ranks of a round disagree on how
many iterations they run, the rank that finishes first never shows up at
the next all-reduce and the others wait forever.

Ranks are numbered from 1, rounds from 0 and iterations within a round
from 1.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from blockload.manifest import Manifest, require_records
from blockload.packing import PackingPlan
from blockload.utils import fraction_str, log
from blockload.utils.types import SimulationError


@dataclass(frozen=True)
class WorkUnit:
    """What one rank consumes in one batch slot: a raw sequence or a packed block"""

    unit_id: str
    length: int
    block_index: Optional[int] = None

    def __post_init__(self):
        if self.length < 1:
            raise SimulationError(f"unit {self.unit_id} has length < 1")


# one batch per round, per rank
Batch = Tuple[WorkUnit, ...]


@dataclass(frozen=True)
class RankAssignment:
    """The batches each rank will process, round by round"""

    world_size: int
    batch_size: int
    queues: Tuple[Tuple[Batch, ...], ...]
    dropped_units: int = 0

    def __post_init__(self):
        if self.world_size < 1 or self.batch_size < 1:
            raise SimulationError("world_size and batch_size must be ≥ 1")
        if len(self.queues) != self.world_size:
            raise SimulationError(f"expected {self.world_size} rank queues")
        rounds = {len(queue) for queue in self.queues}
        if len(rounds) != 1:
            raise SimulationError("every rank must receive the same number of batches")
        for queue in self.queues:
            for batch in queue:
                if len(batch) != self.batch_size:
                    raise SimulationError(f"batches must hold exactly {self.batch_size} units")

    @property
    def rounds(self) -> int:
        """Number of batch rounds"""
        return len(self.queues[0])

    def batch(self, rank: int, round_index: int) -> Batch:
        """The batch of a rank (numbered from 1) in a round"""
        return self.queues[rank - 1][round_index]

    def iterations(self, round_index: int) -> List[int]:
        """Per-rank iteration counts of a round, rank 1 first"""
        return [max(unit.length for unit in queue[round_index]) for queue in self.queues]

    def as_dict(self) -> dict:
        """Returns the assignment with units by id"""
        return {
            "world_size": self.world_size,
            "batch_size": self.batch_size,
            "dropped_units": self.dropped_units,
            "queues": [
                [[unit.unit_id for unit in batch] for batch in queue] for queue in self.queues
            ],
        }


@dataclass(frozen=True)
class SyncEvent:
    """A gradient all-reduce that every rank reached"""

    round_index: int
    iteration: int
    ranks: Tuple[int, ...]


@dataclass(frozen=True)
class Deadlock:
    """Where the simulated epoch stalled"""

    round_index: int
    iteration: int
    stalled_ranks: Tuple[int, ...]
    exhausted_ranks: Tuple[int, ...]

    def as_dict(self) -> dict:
        """Returns the deadlock location"""
        return {
            "round": self.round_index,
            "iteration": self.iteration,
            "stalled_ranks": list(self.stalled_ranks),
            "exhausted_ranks": list(self.exhausted_ranks),
        }


@dataclass
class StepTrace:
    """What happened during one simulated epoch"""

    world_size: int
    round_iterations: List[List[int]] = field(default_factory=list)
    sync_events: List[SyncEvent] = field(default_factory=list)
    deadlock: Optional[Deadlock] = None
    simulated_time: Fraction = Fraction(0)

    @property
    def deadlocked(self) -> bool:
        """Whether the epoch stalled"""
        return self.deadlock is not None

    def as_dict(self) -> dict:
        """Returns the trace; sync events are listed compactly as [round, iteration, ranks]"""
        return {
            "world_size": self.world_size,
            "round_iterations": self.round_iterations,
            "sync_events": [
                [event.round_index, event.iteration, list(event.ranks)]
                for event in self.sync_events
            ],
            "deadlock": self.deadlock.as_dict() if self.deadlock else None,
            "simulated_time": fraction_str(self.simulated_time),
        }

    def summary(self) -> dict:
        """A short human-oriented verdict"""
        data = {
            "deadlock": self.deadlocked,
            "rounds_completed": len(self.round_iterations) - (1 if self.deadlocked else 0),
            "sync_events": len(self.sync_events),
            "simulated_time": float(self.simulated_time),
        }
        if self.deadlock is not None:
            data.update(
                {
                    "deadlock_round": self.deadlock.round_index,
                    "deadlock_iteration": self.deadlock.iteration,
                    "stalled_ranks": list(self.deadlock.stalled_ranks),
                    "exhausted_ranks": list(self.deadlock.exhausted_ranks),
                }
            )
        return data


def units_from_manifest(manifest: Manifest) -> List[WorkUnit]:
    """Raw sequences as work units, one per record"""
    require_records(manifest)
    return [WorkUnit(record.id, record.frames) for record in manifest]


def units_from_plan(plan: PackingPlan) -> List[WorkUnit]:
    """Packed blocks as work units; every unit is plan.capacity long"""
    return [
        WorkUnit(f"block-{index}", plan.capacity, block_index=index)
        for index in range(len(plan.blocks))
    ]


def assign_to_ranks(
    units: Sequence[WorkUnit], world_size: int, batch_size: int, seed: int
) -> RankAssignment:
    """
    Shuffles the units with the seed, cuts them into batches of batch_size
    and deals the batches round-robin, rank 1 first. Units that do not fill
    a whole round are dropped, as a distributed sampler with drop_last does.
    """
    if world_size < 1 or batch_size < 1:
        raise SimulationError("world_size and batch_size must be ≥ 1")
    if not units:
        raise SimulationError("no units to assign")
    per_round = world_size * batch_size
    rounds = len(units) // per_round
    if rounds == 0:
        raise SimulationError(
            f"no complete round: {len(units)} units, {world_size} ranks × {batch_size} per batch"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(units))
    shuffled = [units[int(index)] for index in order[: rounds * per_round]]

    queues: List[List[Batch]] = [[] for _ in range(world_size)]
    for batch_index in range(rounds * world_size):
        start = batch_index * batch_size
        queues[batch_index % world_size].append(tuple(shuffled[start : start + batch_size]))

    dropped = len(units) - rounds * per_round
    if dropped:
        log.info(f"Dropped {dropped} units that do not fill a round")
    return RankAssignment(
        world_size=world_size,
        batch_size=batch_size,
        queues=tuple(tuple(queue) for queue in queues),
        dropped_units=dropped,
    )


def simulate_epoch(
    assignment: RankAssignment, cost_per_frame: Fraction = Fraction(1)
) -> StepTrace:
    """
    Runs the epoch round by round. Each synced iteration costs cost_per_frame;
    the epoch halts at the first iteration some rank has no gradient for.
    """
    ranks = tuple(range(1, assignment.world_size + 1))
    trace = StepTrace(world_size=assignment.world_size)
    for round_index in range(assignment.rounds):
        counts = assignment.iterations(round_index)
        trace.round_iterations.append(counts)
        shortest = min(counts)
        for iteration in range(1, shortest + 1):
            trace.sync_events.append(SyncEvent(round_index, iteration, ranks))
        trace.simulated_time += shortest * cost_per_frame
        if shortest != max(counts):
            stall = shortest + 1
            trace.deadlock = Deadlock(
                round_index=round_index,
                iteration=stall,
                stalled_ranks=tuple(rank for rank in ranks if counts[rank - 1] >= stall),
                exhausted_ranks=tuple(rank for rank in ranks if counts[rank - 1] < stall),
            )
            log.warn(
                f"Deadlock in round {round_index} at iteration {stall}: ranks "
                f"{list(trace.deadlock.stalled_ranks)} wait on "
                f"{list(trace.deadlock.exhausted_ranks)}"
            )
            return trace
    log.info(f"Epoch completed: {assignment.rounds} rounds, {len(trace.sync_events)} syncs")
    return trace


class RankState(Enum):
    """What a rank is blocked on in the lockstep interpreter"""

    ALLREDUCE = "allreduce"
    FETCH = "fetch"
    DONE = "done"


def run_lockstep(assignment: RankAssignment) -> Tuple[bool, List[Tuple[int, int]]]:
    """
    A step-by-step interpreter that keeps no notion of rounds: each rank is a
    program counter over its own stream of iterations and batch fetches. At
    every step the ranks post their next operation; an all-reduce completes
    only if all ranks posted one, a fetch only if all ranks posted a fetch.
    Returns (deadlocked, completed all-reduces as (round, iteration)).
    """
    programs: Dict[int, List[Tuple[RankState, int, int]]] = {}
    for rank in range(1, assignment.world_size + 1):
        program = []
        for round_index, batch in enumerate(assignment.queues[rank - 1]):
            for iteration in range(1, max(unit.length for unit in batch) + 1):
                program.append((RankState.ALLREDUCE, round_index, iteration))
            program.append((RankState.FETCH, round_index, 0))
        program.append((RankState.DONE, assignment.rounds, 0))
        programs[rank] = program

    counters = {rank: 0 for rank in programs}
    completed: List[Tuple[int, int]] = []
    while True:
        posted = [programs[rank][counters[rank]] for rank in programs]
        kinds = {operation for operation, _, _ in posted}
        if kinds == {RankState.DONE}:
            return False, completed
        if len(kinds) > 1:
            return True, completed
        if RankState.ALLREDUCE in kinds:
            completed.append((posted[0][1], posted[0][2]))
        for rank in counters:
            counters[rank] += 1


def epoch_time_estimate(
    plan: PackingPlan, world_size: int, cost_per_frame: Fraction = Fraction(1)
) -> Fraction:
    """
    Frames-processed time model: ranks run in lockstep, so the epoch takes
    as many block-steps as the busiest rank and padded frames cost as much
    as real ones.
    """
    if world_size < 1:
        raise SimulationError("world_size must be ≥ 1")
    if cost_per_frame <= 0:
        raise SimulationError("cost_per_frame must be > 0")
    steps = -(-len(plan.blocks) // world_size)
    time = steps * plan.capacity * Fraction(cost_per_frame)
    log.debug(
        f"{plan.strategy} epoch estimate: {steps} steps × {plan.capacity} frames = "
        f"{fraction_str(time)}"
    )
    return time
