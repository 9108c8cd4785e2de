"""Longest-prefix-match table of Hop Limit plausibility bands.

Entries are kept in one exact-match dict per prefix length. A lookup masks
the address at each configured length, longest first, and stops at the
first hit; tables in practice carry only a handful of distinct lengths.
"""

from __future__ import annotations

from dataclasses import dataclass
from ipaddress import IPv6Address, IPv6Network
from typing import Dict, Iterable, List, Optional, Tuple

_ALL_ONES = (1 << 128) - 1


class PrefixTableError(ValueError):
    pass


def _mask(length: int) -> int:
    return _ALL_ONES ^ ((1 << (128 - length)) - 1)


@dataclass(frozen=True)
class PrefixEntry:
    prefix: IPv6Address
    length: int
    hl_min: int
    hl_max: int

    def __post_init__(self):
        if not 0 <= self.length <= 128:
            raise PrefixTableError(f"prefix length {self.length} outside 0..128")
        for v in (self.hl_min, self.hl_max):
            if not 0 <= v <= 255:
                raise PrefixTableError(f"hop limit bound {v} outside 0..255")
        if self.hl_min > self.hl_max:
            raise PrefixTableError(f"inverted band [{self.hl_min},{self.hl_max}]")
        if int(self.prefix) & ~_mask(self.length) & _ALL_ONES:
            raise PrefixTableError(f"{self.prefix}/{self.length} has host bits set")

    @classmethod
    def parse(cls, row: str) -> "PrefixEntry":
        """Parse a config row ``prefix/length hl_min hl_max``."""
        parts = row.split()
        if len(parts) != 3:
            raise PrefixTableError(f"expected 'prefix/length hl_min hl_max', got {row!r}")
        text, lo, hi = parts
        if "/" not in text:
            raise PrefixTableError(f"missing prefix length in {text!r}")
        addr, _, length = text.partition("/")
        try:
            return cls(IPv6Address(addr), int(length), int(lo), int(hi))
        except ValueError as exc:
            if isinstance(exc, PrefixTableError):
                raise
            raise PrefixTableError(f"bad prefix row {row!r}: {exc}") from None

    @property
    def key(self) -> Tuple[int, int]:
        return int(self.prefix), self.length

    @property
    def network(self) -> IPv6Network:
        return IPv6Network((self.prefix, self.length))

    def contains(self, addr: IPv6Address) -> bool:
        return int(addr) & _mask(self.length) == int(self.prefix)

    def admits(self, hop_limit: int) -> bool:
        return self.hl_min <= hop_limit <= self.hl_max

    def key_bytes(self) -> bytes:
        """Sketch key: prefix bytes followed by the length byte."""
        return self.prefix.packed + bytes([self.length])

    def __str__(self):
        return f"{self.prefix}/{self.length} {self.hl_min} {self.hl_max}"


class PrefixTable:
    def __init__(self):
        self._by_len: Dict[int, Dict[int, PrefixEntry]] = {}
        self._lengths: List[Tuple[int, int]] = []  # (length, mask), longest first

    @classmethod
    def load_from_config(cls, entries: Iterable[PrefixEntry]) -> "PrefixTable":
        table = cls()
        for e in entries:
            if table.get(e.prefix, e.length) is not None:
                raise PrefixTableError(f"duplicate prefix {e.prefix}/{e.length}")
            table.insert(e)
        return table

    def insert(self, entry: PrefixEntry) -> None:
        if not isinstance(entry, PrefixEntry):
            raise TypeError("insert() expects a PrefixEntry")
        bucket = self._by_len.get(entry.length)
        if bucket is None:
            bucket = self._by_len[entry.length] = {}
            self._lengths = sorted(
                ((n, _mask(n)) for n in self._by_len), reverse=True
            )
        bucket[int(entry.prefix)] = entry

    def get(self, prefix: IPv6Address, length: int) -> Optional[PrefixEntry]:
        return self._by_len.get(length, {}).get(int(prefix))

    def lookup(self, addr: IPv6Address) -> Optional[PrefixEntry]:
        value = int(addr)
        for length, mask in self._lengths:
            hit = self._by_len[length].get(value & mask)
            if hit is not None:
                return hit
        return None

    def entries(self) -> List[PrefixEntry]:
        return sorted(
            (e for bucket in self._by_len.values() for e in bucket.values()),
            key=lambda e: (int(e.prefix), e.length),
        )

    def __len__(self):
        return sum(len(b) for b in self._by_len.values())

    def __iter__(self):
        return iter(self.entries())
