"""Round-Robin and Try-Once-Discard scheduling protocols.

Node indices are 1-based throughout, matching the usual protocol notation;
``NodePartition.slices`` gives the 0-based array slices.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Protocol(str, enum.Enum):
    ROUND_ROBIN = "RR"
    TRY_ONCE_DISCARD = "TOD"

    @classmethod
    def parse(cls, value) -> "Protocol":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("-", "_")
        aliases = {"RR": cls.ROUND_ROBIN, "ROUND_ROBIN": cls.ROUND_ROBIN, "ROUNDROBIN": cls.ROUND_ROBIN,
                   "TOD": cls.TRY_ONCE_DISCARD, "TRY_ONCE_DISCARD": cls.TRY_ONCE_DISCARD,
                   "TRYONCEDISCARD": cls.TRY_ONCE_DISCARD}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown protocol {value!r}") from None


@dataclass(frozen=True)
class NodePartition:
    dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.dims) < 1 or any(d < 1 for d in self.dims):
            raise ValueError(f"node dims must be positive and non-empty, got {self.dims}")

    @property
    def size(self) -> int:
        return sum(self.dims)

    @property
    def ell(self) -> int:
        return len(self.dims)

    @property
    def slices(self) -> list[slice]:
        out, start = [], 0
        for d in self.dims:
            out.append(slice(start, start + d))
            start += d
        return out

    def blocks(self, v) -> list[np.ndarray]:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.size,):
            raise ValueError(f"vector of length {v.size} does not match partition {self.dims}")
        return [v[s] for s in self.slices]


def rr_select(kappa: int, ell: int) -> int:
    return (int(kappa) - 1) % ell + 1


def tod_select(e_blocks) -> int:
    norms = [float(np.linalg.norm(b)) for b in e_blocks]
    if not norms:
        raise ValueError("TOD needs at least one node")
    # np.argmax returns the first maximiser, i.e. the minimum index on ties
    return int(np.argmax(norms)) + 1


def select_node(protocol: Protocol, kappa: int, e, partition: NodePartition) -> int:
    if protocol is Protocol.ROUND_ROBIN:
        return rr_select(kappa, partition.ell)
    return tod_select(partition.blocks(e))


def protocol_update(protocol, kappa: int, e, eps_q, partition: NodePartition) -> np.ndarray:
    """Post-transmission error: the granted block takes its quantization error."""
    protocol = Protocol.parse(protocol)
    e = np.asarray(e, dtype=float)
    eps_q = np.asarray(eps_q, dtype=float)
    if e.shape != (partition.size,) or eps_q.shape != e.shape:
        raise ValueError(
            f"dimension mismatch: e {e.shape}, eps_q {eps_q.shape}, partition {partition.dims}"
        )
    l = select_node(protocol, kappa, e, partition)
    h = e.copy()
    s = partition.slices[l - 1]
    h[s] = eps_q[s]
    return h


def rr_weights(kappa: int, ell: int) -> np.ndarray:
    """Transmissions left until each node is served, counting the next one as 1."""
    l = np.arange(1, ell + 1)
    return (l - int(kappa)) % ell + 1
