import zlib
from typing import Tuple, Union

import numpy as np

Label = Union[int, str]

_MASK64 = (1 << 64) - 1


def lane_label(label: Label) -> int:
    """Integer form of a lane label; strings hash through CRC-32"""
    if isinstance(label, (bool, np.bool_)):
        raise TypeError("boolean lane labels are ambiguous")
    if isinstance(label, str):
        return zlib.crc32(label.encode("utf-8"))
    value = int(label)
    if value < 0 or value > _MASK64:
        raise ValueError(f"lane label {label} outside the unsigned 64-bit range")
    return value


class RngStream:
    """Counter-based random stream keyed by (master_seed, lane).

    The generator is Philox seeded through ``SeedSequence(master_seed,
    spawn_key=lane)``; output depends only on the key and counter, never on
    which process asks for it or in what order.
    """

    __slots__ = ("master_seed", "lane", "counter")

    def __init__(self, master_seed: int, lane: Tuple[Label, ...] = (), counter: int = 0):
        if not 0 <= int(master_seed) <= _MASK64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        self.master_seed = int(master_seed)
        self.lane = tuple(lane)
        self.counter = int(counter)
        for label in self.lane:
            lane_label(label)

    def child(self, *labels: Label) -> "RngStream":
        return RngStream(self.master_seed, self.lane + tuple(labels), 0)

    def key(self) -> Tuple[int, ...]:
        return tuple(lane_label(label) for label in self.lane)

    def generator(self) -> np.random.Generator:
        seed = np.random.SeedSequence(self.master_seed, spawn_key=self.key())
        return np.random.Generator(np.random.Philox(seed, counter=self.counter))

    def describe(self) -> str:
        return "/".join([str(self.master_seed)] + [str(label) for label in self.lane])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RngStream)
            and (self.master_seed, self.key(), self.counter) == (other.master_seed, other.key(), other.counter)
        )

    def __hash__(self) -> int:
        return hash((self.master_seed, self.key(), self.counter))

    def __repr__(self) -> str:
        return f"RngStream({self.describe()}, counter={self.counter})"
