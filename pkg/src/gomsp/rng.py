"""Deterministic named substreams for reproducible experiments.

Every random draw in the problem generators comes from a substream addressed
by (master_seed, stream name, sample index, slot). Because the address never
involves the algorithm under test, swapping algorithms (or rerunning with a
different worker count) cannot shift the environment's randomness.

Streams:

``coefficient-noise``
    per-slot uniform perturbations of the cost coefficients a_t, b_t
``observation-noise``
    Gaussian disturbance applied to the coefficients the learner observes
``constraint-draw``
    the one-time draw of the constraint curvature/slope matrices
``demand``
    per-slot uniform perturbation of the demand level
``thresholds``
    per-slot uniform perturbation of the constraint thresholds

With ``shared_environment`` (the default) every stream except
``observation-noise`` is keyed by index 0 instead of ``sample_index``, so a
multi-sample experiment reuses one environment realization and varies only
the gradient noise across samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

_STREAM_IDS = {
    "coefficient-noise": 1,
    "observation-noise": 2,
    "constraint-draw": 3,
    "demand": 4,
    "thresholds": 5,
}

# Streams that describe the environment itself (as opposed to what the
# learner observes); these collapse onto index 0 under shared_environment.
_ENVIRONMENT_STREAMS = frozenset(
    ["coefficient-noise", "constraint-draw", "demand", "thresholds"]
)


@dataclass(frozen=True)
class RngStreams:
    """Addressable family of deterministic generators.

    Identical (master_seed, stream, effective index, slot) always yields an
    identical generator; distinct addresses are statistically independent.
    """

    master_seed: int
    sample_index: int = 0
    shared_environment: bool = True

    def __post_init__(self) -> None:
        if not (0 <= int(self.master_seed) < 2 ** 64):
            raise InvalidInputError("master_seed must be a u64")
        if self.sample_index < 0:
            raise InvalidInputError("sample_index must be nonnegative")

    def generator(self, stream: str, slot: int = 0) -> np.random.Generator:
        """Fresh generator for one (stream, slot) address."""
        try:
            stream_id = _STREAM_IDS[stream]
        except KeyError:
            raise InvalidInputError(f"unknown stream name: {stream!r}") from None
        if slot < 0:
            raise InvalidInputError("slot must be nonnegative")
        index = self.sample_index
        if self.shared_environment and stream in _ENVIRONMENT_STREAMS:
            index = 0
        seq = np.random.SeedSequence(
            [int(self.master_seed), stream_id, int(index), int(slot)]
        )
        return np.random.Generator(np.random.PCG64(seq))

    def for_sample(self, sample_index: int) -> "RngStreams":
        """Same master seed, different sample index."""
        return RngStreams(self.master_seed, sample_index, self.shared_environment)
