"""Address-to-port bindings learned from DAD, with a per-port cap."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from ipaddress import IPv6Address
from typing import Dict, List, Optional, Tuple

DEFAULT_CAP_K = 8


class BindOutcome(enum.Enum):
    REGISTERED = "registered"
    CAP_EXCEEDED = "cap_exceeded"
    ALREADY_BOUND = "already_bound"


@dataclass(frozen=True)
class BindResult:
    outcome: BindOutcome
    existing_port: Optional[int] = None


class BindingCheck(enum.Enum):
    MATCH = "match"
    MISMATCH = "mismatch"
    UNKNOWN = "unknown"


class BindingTable:
    """First-writer-wins map of address -> port. Bindings never expire."""

    def __init__(self, cap_k: int = DEFAULT_CAP_K):
        if cap_k < 1:
            raise ValueError("cap_k must be positive")
        self.cap_k = cap_k
        self._bindings: Dict[IPv6Address, Tuple[int, int]] = {}  # addr -> (port, ts_ns)
        self._count: Counter = Counter()

    def try_register(self, addr: IPv6Address, port: int, timestamp: int = 0) -> BindResult:
        bound = self._bindings.get(addr)
        if bound is not None:
            return BindResult(BindOutcome.ALREADY_BOUND, bound[0])
        if self._count[port] >= self.cap_k:
            return BindResult(BindOutcome.CAP_EXCEEDED)
        self._bindings[addr] = (port, timestamp)
        self._count[port] += 1
        return BindResult(BindOutcome.REGISTERED)

    def check(self, addr: IPv6Address, port: int) -> BindingCheck:
        bound = self._bindings.get(addr)
        if bound is None:
            return BindingCheck.UNKNOWN
        return BindingCheck.MATCH if bound[0] == port else BindingCheck.MISMATCH

    def port_of(self, addr: IPv6Address) -> Optional[int]:
        bound = self._bindings.get(addr)
        return None if bound is None else bound[0]

    def addr_count(self, port: int) -> int:
        return self._count[port]

    def port_utilization(self, ports=()) -> Dict[int, Tuple[int, int]]:
        """(count, cap) per port; ``ports`` are reported even when still empty."""
        keys = sorted(set(ports) | {p for p, n in self._count.items() if n})
        return {p: (self._count[p], self.cap_k) for p in keys}

    def dump(self) -> List[dict]:
        """Bindings ordered by registration time, then address."""
        rows = sorted(self._bindings.items(), key=lambda kv: (kv[1][1], int(kv[0])))
        return [{"address": str(a), "port": p, "registered_ns": ts} for a, (p, ts) in rows]

    def __len__(self):
        return len(self._bindings)
