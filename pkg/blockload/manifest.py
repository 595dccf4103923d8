#
# manifest.py
#
# Copyright 2024 The blockload authors. All rights reserved.
#

"""
Sequence-length manifests: parsing, validation, summaries and seeded
synthetic generation. Only the number of frames of each sequence is
modelled; nothing here ever touches video data.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, Iterator, Tuple, Union

import numpy as np
import orjson

from blockload.config.settings import DEFAULT_SETTINGS
from blockload.utils import log
from blockload.utils.types import ManifestError

SHAPE_UNIFORM = "uniform"
SHAPE_HEAVY_TAILED = "heavy-tailed"
SHAPES = (SHAPE_UNIFORM, SHAPE_HEAVY_TAILED)

# bisection steps when fitting the heavy-tailed location parameter
_FIT_ITERATIONS = 64


@dataclass(frozen=True)
class SequenceRecord:
    """One logical sequence (a video) and its length in frames"""

    id: str  # pylint: disable=invalid-name
    frames: int

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ManifestError("id must be a non-empty string")
        if isinstance(self.frames, bool) or not isinstance(self.frames, int):
            raise ManifestError(f"frames of {self.id} must be an integer")
        if self.frames < 1:
            raise ManifestError(f"frames must be ≥ 1 (got {self.frames} for {self.id})")

    def as_dict(self) -> dict:
        """Returns the record in manifest file key order"""
        return {"id": self.id, "frames": self.frames}


@dataclass(frozen=True)
class Manifest:
    """An ordered collection of sequence records with unique ids"""

    records: Tuple[SequenceRecord, ...]

    def __post_init__(self):
        seen = set()
        for record in self.records:
            if record.id in seen:
                raise ManifestError(f"duplicate id {record.id!r}")
            seen.add(record.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[SequenceRecord]:
        return iter(self.records)

    @cached_property
    def by_id(self) -> Dict[str, SequenceRecord]:
        """Records indexed by id"""
        return {record.id: record for record in self.records}

    @property
    def lengths(self) -> Tuple[int, ...]:
        """The frame counts, in manifest order"""
        return tuple(record.frames for record in self.records)

    @property
    def total_frames(self) -> int:
        """Sum of frames over all records"""
        return sum(self.lengths)

    @property
    def max_len(self) -> int:
        """The longest sequence; requires a non-empty manifest"""
        require_records(self)
        return max(self.lengths)

    @staticmethod
    def from_lengths(lengths: Iterable[int], prefix: str = "V") -> "Manifest":
        """Builds a manifest with ids prefix1, prefix2, ... from bare lengths"""
        return Manifest(
            tuple(
                SequenceRecord(f"{prefix}{index}", frames)
                for index, frames in enumerate(lengths, start=1)
            )
        )


@dataclass(frozen=True)
class ManifestStats:
    """Summary quantities of a manifest"""

    count: int
    total_frames: int
    min_len: int
    max_len: int
    mean_len: Fraction

    def as_dict(self) -> dict:
        """Returns the stats as a dictionary, the mean as an exact fraction string"""
        return {
            "count": self.count,
            "total_frames": self.total_frames,
            "min_len": self.min_len,
            "max_len": self.max_len,
            "mean_len": str(self.mean_len),
            "mean_len_float": float(self.mean_len),
        }


@dataclass(frozen=True)
class SyntheticSpec:
    """The target distribution of a synthetic manifest"""

    count: int
    total_frames: int
    min_len: int
    max_len: int
    shape: str = SHAPE_HEAVY_TAILED

    def validate(self):
        """Raises a ManifestError if no manifest can satisfy the spec"""
        if self.shape not in SHAPES:
            raise ManifestError(f"unknown shape {self.shape!r}, expected one of {SHAPES}")
        if self.count < 1:
            raise ManifestError("count must be ≥ 1")
        if self.min_len < 1:
            raise ManifestError("min_len must be ≥ 1")
        if self.min_len > self.max_len:
            raise ManifestError("min_len must not exceed max_len")
        if not self.count * self.min_len <= self.total_frames <= self.count * self.max_len:
            raise ManifestError(
                f"total_frames {self.total_frames} is not reachable with {self.count} "
                f"sequences of {self.min_len}..{self.max_len} frames"
            )
        # one record is pinned to max_len, the rest can go no lower than min_len
        if self.total_frames < self.max_len + (self.count - 1) * self.min_len:
            raise ManifestError(
                f"total_frames {self.total_frames} leaves no room for a sequence of "
                f"{self.max_len} frames"
            )


def require_records(manifest: Manifest) -> None:
    """Raises a ManifestError for an empty manifest"""
    if len(manifest) == 0:
        raise ManifestError("manifest is empty")


def parse_manifest(lines: Iterable[Union[str, bytes]]) -> Manifest:
    """
    Parses a JSON Lines manifest, one {"id": ..., "frames": ...} object per
    line. Blank lines are skipped; errors report the 1-based line number.
    """
    records = []
    seen: Dict[str, int] = {}
    for line_number, line in enumerate(lines, start=1):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ManifestError(f"not valid UTF-8: {exc}", line_number) from exc
        if not line.strip():
            continue
        try:
            data = orjson.loads(line)
        except orjson.JSONDecodeError as exc:
            raise ManifestError(f"malformed JSON: {exc}", line_number) from exc
        if not isinstance(data, dict) or set(data.keys()) != {"id", "frames"}:
            raise ManifestError(
                'expected an object with exactly the keys "id" and "frames"',
                line_number,
            )
        try:
            record = SequenceRecord(data["id"], data["frames"])
        except ManifestError as exc:
            raise ManifestError(str(exc), line_number) from exc
        if record.id in seen:
            raise ManifestError(
                f"duplicate id {record.id!r} (first seen on line {seen[record.id]})",
                line_number,
            )
        seen[record.id] = line_number
        records.append(record)

    if not records:
        raise ManifestError("manifest is empty")
    log.debug(f"Parsed manifest with {len(records)} records")
    return Manifest(tuple(records))


def load_manifest(path: Path) -> Manifest:
    """Reads and parses a manifest file"""
    log.info(f"Reading manifest from {path}")
    with open(path, "rb") as file:
        return parse_manifest(file)


def serialize_manifest(manifest: Manifest) -> str:
    """Encodes a manifest as JSON Lines, keys in id, frames order"""
    return "".join(
        orjson.dumps(record.as_dict()).decode("utf-8") + "\n" for record in manifest
    )


def summarize(manifest: Manifest) -> ManifestStats:
    """Computes the summary statistics of a non-empty manifest"""
    require_records(manifest)
    lengths = manifest.lengths
    total = sum(lengths)
    return ManifestStats(
        count=len(lengths),
        total_frames=total,
        min_len=min(lengths),
        max_len=max(lengths),
        mean_len=Fraction(total, len(lengths)),
    )


def generate_synthetic(
    spec: SyntheticSpec, seed: int, sigma: float = DEFAULT_SETTINGS.sigma
) -> Manifest:
    """
    Generates a manifest matching spec exactly: `count` records whose frames
    sum to `total_frames`, every length within [min_len, max_len] and at
    least one of max_len. Lengths are sampled from the requested shape, one
    record is pinned to max_len, and the sum is then repaired with ±1 steps
    on randomly chosen records. The result depends only on (spec, seed, sigma).
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    if spec.shape == SHAPE_HEAVY_TAILED:
        lengths = _sample_heavy_tailed(spec, rng, sigma)
    else:
        lengths = _sample_uniform(spec, rng)

    anchor = int(rng.integers(spec.count))
    lengths[anchor] = spec.max_len
    _repair_total(lengths, spec, rng, anchor)

    width = len(str(spec.count - 1))
    records = tuple(
        SequenceRecord(f"seq{index:0{width}d}", int(frames))
        for index, frames in enumerate(lengths)
    )
    log.info(
        f"Generated {spec.shape} manifest: {spec.count} sequences, "
        f"{spec.total_frames} frames, seed {seed}"
    )
    return Manifest(records)


def _sample_uniform(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """Uniform lengths over the widest sub-range of the bounds centred on the target mean"""
    mean = spec.total_frames / spec.count
    low, high = spec.min_len, spec.max_len
    if 2 * mean - low <= high:
        high = int(round(2 * mean - low))
    else:
        low = int(round(2 * mean - high))
    low = min(max(low, spec.min_len), spec.max_len)
    high = max(min(high, spec.max_len), low)
    return rng.integers(low, high + 1, size=spec.count, dtype=np.int64)


def _sample_heavy_tailed(
    spec: SyntheticSpec, rng: np.random.Generator, sigma: float
) -> np.ndarray:
    """
    Log-normal excess lengths over min_len, clipped to max_len. The location
    is fitted by bisection so the clipped sum lands next to total_frames.
    """
    normals = rng.standard_normal(spec.count)

    def lengths_for(location: float) -> np.ndarray:
        excess = np.floor(np.exp(location + sigma * normals))
        return np.clip(spec.min_len + excess, spec.min_len, spec.max_len).astype(np.int64)

    low, high = -20.0, float(np.log(spec.max_len)) + 20.0
    for _ in range(_FIT_ITERATIONS):
        middle = (low + high) / 2
        if int(lengths_for(middle).sum()) < spec.total_frames:
            low = middle
        else:
            high = middle
    low_gap = abs(int(lengths_for(low).sum()) - spec.total_frames)
    high_gap = abs(int(lengths_for(high).sum()) - spec.total_frames)
    return lengths_for(low if low_gap <= high_gap else high)


def _repair_total(
    lengths: np.ndarray, spec: SyntheticSpec, rng: np.random.Generator, anchor: int
) -> None:
    """Moves the sum of lengths onto total_frames with ±1 steps, never touching anchor"""
    difference = spec.total_frames - int(lengths.sum())
    log.debug(f"Repairing synthetic total by {difference} frames")
    while difference != 0:
        if difference > 0:
            eligible = np.flatnonzero(lengths < spec.max_len)
        else:
            eligible = np.flatnonzero(lengths > spec.min_len)
            eligible = eligible[eligible != anchor]
        # validate() guarantees that a step in the needed direction exists
        steps = min(abs(difference), eligible.size)
        picks = rng.choice(eligible, size=steps, replace=False)
        if difference > 0:
            lengths[picks] += 1
            difference -= steps
        else:
            lengths[picks] -= 1
            difference += steps
