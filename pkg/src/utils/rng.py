"""Counter-based random streams keyed by (seed, replica, stream).

Every random quantity in the library is drawn from a Philox stream whose key
is derived from the experiment seed, the replica id and a stream tag. Draw i of
a stream is addressable directly: Philox produces four 64-bit words per
counter value, so draw i sits in lane i % 4 of counter block i // 4.
"""

from enum import IntEnum
from typing import NamedTuple

import numpy as np


class Stream(IntEnum):
    """Stream tags separating independent uses of one (seed, replica) pair."""
    ENVIRONMENT = 1
    WALK = 2
    CLOUD = 3
    BOOTSTRAP = 4
    APPENDIX = 5
    RESAMPLE = 6
    BRIDGE = 7


class StreamKey(NamedTuple):
    """Reproducibility key for one random stream."""
    seed: int
    replica: int = 0
    stream: int = Stream.ENVIRONMENT

    def philox_key(self) -> np.ndarray:
        """128-bit Philox key derived from the three components."""
        seq = np.random.SeedSequence([int(self.seed), int(self.replica), int(self.stream)])
        return seq.generate_state(2, dtype=np.uint64)

    def child(self, stream: int) -> "StreamKey":
        """Same seed and replica on another stream."""
        return StreamKey(self.seed, self.replica, int(stream))

    def for_replica(self, replica: int) -> "StreamKey":
        return StreamKey(self.seed, int(replica), self.stream)

    def as_dict(self) -> dict:
        return {"seed": int(self.seed), "replica": int(self.replica), "stream": int(self.stream)}


_TINY = np.finfo(float).tiny


def generator(key: StreamKey, block: int = 0) -> np.random.Generator:
    """Generator positioned at the start of counter block ``block``."""
    return np.random.Generator(np.random.Philox(key=key.philox_key(), counter=int(block)))


def uniforms(key: StreamKey, start: int, count: int) -> np.ndarray:
    """Draws start .. start+count-1 of the stream, mapped into the open interval (0, 1)."""
    if count <= 0:
        return np.empty(0)
    block, lane = divmod(int(start), 4)
    draws = generator(key, block).random(lane + int(count))[lane:]
    return np.maximum(draws, _TINY)


def uniform_at(key: StreamKey, index: int) -> float:
    """Single draw ``index`` of the stream in O(1)."""
    return float(uniforms(key, index, 1)[0])
