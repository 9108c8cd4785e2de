"""Packet model, address predicates and the JSON-lines trace format.

Addresses are ``ipaddress.IPv6Address`` values: they already compare and
hash on the 128-bit integer and print in RFC 5952 canonical form.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from ipaddress import AddressValueError, IPv6Address
from typing import Optional, Union

Ipv6Addr = IPv6Address

UNSPECIFIED = IPv6Address("::")
ALL_NODES = IPv6Address("ff02::1")

ICMP6_ECHO_REQUEST = 128
ICMP6_NEIGHBOR_SOLICIT = 135
ICMP6_NEIGHBOR_ADVERT = 136


class PortRole(enum.Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"


class Vector(enum.Enum):
    EXT_SPOOF = "ext_spoof"
    INT_SPOOF = "int_spoof"
    EXT_FLOOD = "ext_flood"
    INT_FLOOD = "int_flood"


@dataclass(frozen=True)
class Truth:
    """Ground-truth label. ``vector`` is None for benign packets."""

    vector: Optional[Vector] = None

    @property
    def is_attack(self) -> bool:
        return self.vector is not None


BENIGN = Truth()


@dataclass(frozen=True)
class Tcp:
    src_port: int
    dst_port: int
    syn: bool = False


@dataclass(frozen=True)
class Udp:
    src_port: int
    dst_port: int


@dataclass(frozen=True)
class Icmpv6:
    type: int
    ns_target: Optional[IPv6Address] = None

    def __post_init__(self):
        if (self.type == ICMP6_NEIGHBOR_SOLICIT) != (self.ns_target is not None):
            raise ValueError("ns_target must be present exactly for Neighbor Solicitation")


@dataclass(frozen=True)
class OtherL4:
    pass


L4 = Union[Tcp, Udp, Icmpv6, OtherL4]


@dataclass(frozen=True)
class Packet:
    timestamp: int  # ns since stream start
    ingress_port: int
    src: IPv6Address
    dst: IPv6Address
    hop_limit: int
    l4: L4
    truth: Optional[Truth] = None

    def __post_init__(self):
        if not 0 <= self.hop_limit <= 255:
            raise ValueError(f"hop_limit {self.hop_limit} outside 0..255")
        if self.timestamp < 0:
            raise ValueError("timestamp must be non-negative")

    def without_truth(self) -> "Packet":
        if self.truth is None:
            return self
        return replace(self, truth=None)


@dataclass(frozen=True)
class FlowKey:
    src: IPv6Address
    dst: IPv6Address

    def to_bytes(self) -> bytes:
        return self.src.packed + self.dst.packed


def is_multicast(addr: IPv6Address) -> bool:
    return addr.packed[0] == 0xFF


def is_dad_ns(pkt: Packet) -> bool:
    l4 = pkt.l4
    return (
        isinstance(l4, Icmpv6)
        and l4.type == ICMP6_NEIGHBOR_SOLICIT
        and l4.ns_target is not None
        and pkt.src == UNSPECIFIED
    )


def registered_address(pkt: Packet) -> IPv6Address:
    """Address a DAD probe is claiming: the NS target, since the source is ``::``."""
    if not is_dad_ns(pkt):
        raise ValueError("registered_address() requires a DAD Neighbor Solicitation")
    return pkt.l4.ns_target


def flow_key(pkt: Packet) -> FlowKey:
    return FlowKey(pkt.src, pkt.dst)


def solicited_node(addr: IPv6Address) -> IPv6Address:
    """ff02::1:ffXX:XXXX for the low 24 bits of ``addr``."""
    return IPv6Address(int(IPv6Address("ff02::1:ff00:0")) | (int(addr) & 0xFFFFFF))


# --- trace records -------------------------------------------------------


class TraceError(ValueError):
    """Base class for trace record errors."""


class MalformedRecord(TraceError):
    pass


class MissingField(TraceError):
    pass


class UnknownField(TraceError):
    pass


class AddressError(TraceError):
    pass


class RangeError(TraceError):
    pass


_TOP_FIELDS = {"ts_ns", "port", "src", "dst", "hl", "l4"}
_L4_FIELDS = {
    "tcp": ({"src_port", "dst_port"}, {"syn"}),
    "udp": ({"src_port", "dst_port"}, set()),
    "icmpv6": ({"type"}, {"ns_target"}),
    "other": (set(), set()),
}


def _require(obj: dict, keys, where: str) -> None:
    for k in keys:
        if k not in obj:
            raise MissingField(f"missing field {where}{k!r}")


def _reject_unknown(obj: dict, allowed, where: str) -> None:
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise UnknownField(f"unknown field(s) {where}{', '.join(extra)}")


def _int(obj: dict, key: str, lo: int, hi: int) -> int:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise MalformedRecord(f"field {key!r} must be an integer")
    if not lo <= v <= hi:
        raise RangeError(f"field {key!r}={v} outside {lo}..{hi}")
    return v


def _addr(text) -> IPv6Address:
    if not isinstance(text, str):
        raise AddressError(f"address must be a string, got {text!r}")
    try:
        return IPv6Address(text)
    except AddressValueError as exc:
        raise AddressError(f"invalid IPv6 address {text!r}: {exc}") from None


def _parse_truth(obj) -> Truth:
    if not isinstance(obj, dict):
        raise MalformedRecord("truth must be an object")
    _reject_unknown(obj, {"label", "vector"}, "truth.")
    _require(obj, ["label"], "truth.")
    label = obj["label"]
    if label == "benign":
        if "vector" in obj:
            raise MalformedRecord("benign truth must not carry a vector")
        return BENIGN
    if label != "attack":
        raise MalformedRecord(f"unknown truth label {label!r}")
    _require(obj, ["vector"], "truth.")
    try:
        return Truth(Vector(obj["vector"]))
    except ValueError:
        raise MalformedRecord(f"unknown attack vector {obj['vector']!r}") from None


def _parse_l4(obj) -> L4:
    if not isinstance(obj, dict):
        raise MalformedRecord("l4 must be an object")
    _require(obj, ["kind"], "l4.")
    kind = obj["kind"]
    if kind not in _L4_FIELDS:
        raise MalformedRecord(f"unknown l4 kind {kind!r}")
    required, optional = _L4_FIELDS[kind]
    _reject_unknown(obj, required | optional | {"kind"}, "l4.")
    _require(obj, sorted(required), "l4.")
    if kind == "tcp":
        syn = obj.get("syn", False)
        if not isinstance(syn, bool):
            raise MalformedRecord("l4.syn must be a boolean")
        return Tcp(_int(obj, "src_port", 0, 65535), _int(obj, "dst_port", 0, 65535), syn)
    if kind == "udp":
        return Udp(_int(obj, "src_port", 0, 65535), _int(obj, "dst_port", 0, 65535))
    if kind == "icmpv6":
        icmp_type = _int(obj, "type", 0, 255)
        target = _addr(obj["ns_target"]) if "ns_target" in obj else None
        try:
            return Icmpv6(icmp_type, target)
        except ValueError as exc:
            raise MalformedRecord(str(exc)) from None
    return OtherL4()


def parse_trace_record(line: str) -> Packet:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise MalformedRecord("record must be a JSON object")
    _reject_unknown(obj, _TOP_FIELDS | {"truth"}, "")
    _require(obj, ["ts_ns", "port", "src", "dst", "hl", "l4"], "")
    truth = _parse_truth(obj["truth"]) if "truth" in obj else None
    return Packet(
        timestamp=_int(obj, "ts_ns", 0, 2**63 - 1),
        ingress_port=_int(obj, "port", 0, 2**32 - 1),
        src=_addr(obj["src"]),
        dst=_addr(obj["dst"]),
        hop_limit=_int(obj, "hl", 0, 255),
        l4=_parse_l4(obj["l4"]),
        truth=truth,
    )


def _l4_to_dict(l4: L4) -> dict:
    if isinstance(l4, Tcp):
        return {"kind": "tcp", "src_port": l4.src_port, "dst_port": l4.dst_port, "syn": l4.syn}
    if isinstance(l4, Udp):
        return {"kind": "udp", "src_port": l4.src_port, "dst_port": l4.dst_port}
    if isinstance(l4, Icmpv6):
        d = {"kind": "icmpv6", "type": l4.type}
        if l4.ns_target is not None:
            d["ns_target"] = str(l4.ns_target)
        return d
    return {"kind": "other"}


def serialize_record(pkt: Packet) -> str:
    rec = {
        "ts_ns": pkt.timestamp,
        "port": pkt.ingress_port,
        "src": str(pkt.src),
        "dst": str(pkt.dst),
        "hl": pkt.hop_limit,
        "l4": _l4_to_dict(pkt.l4),
    }
    if pkt.truth is not None:
        if pkt.truth.vector is None:
            rec["truth"] = {"label": "benign"}
        else:
            rec["truth"] = {"label": "attack", "vector": pkt.truth.vector.value}
    return json.dumps(rec, separators=(",", ":"))


def read_trace(lines):
    """Parse an iterable of lines, skipping blanks; errors cite the 1-based line number."""
    packets = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            packets.append(parse_trace_record(line))
        except TraceError as exc:
            raise type(exc)(f"line {lineno}: {exc}") from None
    return packets
