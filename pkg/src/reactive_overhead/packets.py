"""Packet model shared by the protocol agents and the simulator."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple


class Kind(str, Enum):
    RREQ = "RREQ"
    RREP = "RREP"
    RERR = "RERR"
    HELLO = "HELLO"
    ACK = "ACK"
    DATA = "DATA"


ROUTING_KINDS = (Kind.RREQ, Kind.RREP, Kind.RERR, Kind.HELLO, Kind.ACK)
ALL_KINDS = ROUTING_KINDS + (Kind.DATA,)

DATA_SIZE = 512
# control sizes include a 20-byte IP header
CONTROL_SIZE = {Kind.RREQ: 44, Kind.RREP: 40, Kind.RERR: 32, Kind.HELLO: 32, Kind.ACK: 32}
ADDRESS_BYTES = 4


@dataclass(frozen=True)
class Packet:
    """One packet copy on the air or in a buffer.

    ``origin``/``dst`` depend on ``kind``: for RREQ and DATA they are the
    requesting/sending source and the target; for RREP ``origin`` is the node
    the advertised route leads to and ``dst`` the node that asked; for RERR
    ``dst`` is the source being notified.
    """

    kind: Kind
    origin: int
    dst: int
    uid: int = 0
    ttl: int = 0
    hops: int = 0
    seq: int = 0
    dst_seq: int = 0
    record: Optional[Tuple[int, ...]] = None
    created: float = 0.0
    payload: int = 0
    gratuitous: bool = False
    ack_request: bool = False
    unreachable: Optional[int] = None
    link: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if self.ttl < 0:
            raise ValueError("ttl must be >= 0")

    @property
    def size(self) -> int:
        extra = ADDRESS_BYTES * len(self.record) if self.record else 0
        if self.kind is Kind.DATA:
            return self.payload + extra
        return CONTROL_SIZE[self.kind] + extra

    def forwarded(self, **changes) -> "Packet":
        return replace(self, **changes)


def data_packet(src: int, dst: int, uid: int, created: float, size: int = DATA_SIZE) -> Packet:
    return Packet(Kind.DATA, src, dst, uid=uid, created=created, payload=size)
