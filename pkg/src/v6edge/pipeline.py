"""Four-stage edge defense: identity checks first, rate checks second.

Stage order is fixed: external spoofing (prefix Hop Limit band), internal
spoofing (DAD-learned address/port binding), external flooding (per-prefix
sketch), internal flooding (per-flow sketch). The first failing stage
decides the verdict, so spoofed packets never reach the flooding sketches.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Sequence

from .bindings import DEFAULT_CAP_K, BindingCheck, BindingTable, BindOutcome
from .lpm import PrefixEntry, PrefixTable
from .packet import Packet, PortRole, flow_key, is_dad_ns, is_multicast, registered_address
from .sketches import (
    DEFAULT_BLOOM_BITS,
    DEFAULT_BLOOM_SEEDS,
    DEFAULT_CMS_WIDTH,
    DEFAULT_EXT_SEEDS,
    DEFAULT_INT_SEEDS,
    BloomFilter,
    CountMinSketch,
)

NS_PER_S = 1_000_000_000


class Action(enum.Enum):
    ACCEPT = "accept"
    DROP = "drop"


class Stage(enum.Enum):
    EXT_SPOOF = "ext_spoof"
    INT_SPOOF = "int_spoof"
    EXT_FLOOD = "ext_flood"
    INT_FLOOD = "int_flood"
    NONE = "none"


class Reason(enum.Enum):
    HL_OUT_OF_BAND = "hl_out_of_band"
    NO_PREFIX_MATCH = "no_prefix_match"
    BINDING_MISMATCH = "binding_mismatch"
    UNKNOWN_UNBOUND = "unknown_unbound"
    CAP_EXCEEDED = "cap_exceeded"
    PREFIX_RATE_EXCEEDED = "prefix_rate_exceeded"
    FLOW_RATE_EXCEEDED_UNICAST = "flow_rate_exceeded_unicast"
    FLOW_RATE_EXCEEDED_MULTICAST = "flow_rate_exceeded_multicast"
    ACCEPTED = "accepted"


STAGE_OF = {
    Reason.HL_OUT_OF_BAND: Stage.EXT_SPOOF,
    Reason.NO_PREFIX_MATCH: Stage.EXT_SPOOF,
    Reason.BINDING_MISMATCH: Stage.INT_SPOOF,
    Reason.UNKNOWN_UNBOUND: Stage.INT_SPOOF,
    Reason.CAP_EXCEEDED: Stage.INT_SPOOF,
    Reason.PREFIX_RATE_EXCEEDED: Stage.EXT_FLOOD,
    Reason.FLOW_RATE_EXCEEDED_UNICAST: Stage.INT_FLOOD,
    Reason.FLOW_RATE_EXCEEDED_MULTICAST: Stage.INT_FLOOD,
    Reason.ACCEPTED: Stage.NONE,
}


@dataclass(frozen=True)
class Verdict:
    action: Action
    stage: Stage
    reason: Reason

    @classmethod
    def drop(cls, reason: Reason) -> "Verdict":
        return _DROPS[reason]

    @property
    def accepted(self) -> bool:
        return self.action is Action.ACCEPT

    def to_json(self, ts_ns: int) -> str:
        return json.dumps(
            {"ts_ns": ts_ns, "action": self.action.value, "stage": self.stage.value, "reason": self.reason.value},
            separators=(",", ":"),
        )


ACCEPT = Verdict(Action.ACCEPT, Stage.NONE, Reason.ACCEPTED)
_DROPS = {r: Verdict(Action.DROP, s, r) for r, s in STAGE_OF.items() if r is not Reason.ACCEPTED}


class ConfigError(ValueError):
    pass


class StreamOrderError(ValueError):
    """A packet's timestamp went backwards."""


def compute_threshold(rate, n, window_s, epsilon=Fraction(1, 10)) -> int:
    """Per-key packet budget ceil((rate / n) * window * (1 + epsilon)).

    Arguments are converted through their decimal text so that e.g. 0.1
    means exactly one tenth.
    """
    r, w, eps = (Fraction(str(x)) for x in (rate, window_s, epsilon))
    if n == 0:
        raise ZeroDivisionError("number of active keys n must be at least 1")
    if r <= 0 or n < 1 or w <= 0 or eps < 0:
        raise ValueError("need rate > 0, n >= 1, window > 0, epsilon >= 0")
    return math.ceil(r / Fraction(str(n)) * w * (1 + eps))


@dataclass(frozen=True)
class SketchParams:
    width: int = DEFAULT_CMS_WIDTH
    seeds: Sequence[int] = DEFAULT_EXT_SEEDS


@dataclass
class PipelineConfig:
    port_roles: Dict[int, PortRole]
    hl_table: PrefixTable
    theta_ext: int
    theta_u: int
    theta_m: int
    window_ext_ns: int = NS_PER_S
    window_int_ns: int = NS_PER_S
    cap_k: int = DEFAULT_CAP_K
    ext_sketch: SketchParams = field(default_factory=SketchParams)
    int_sketch: SketchParams = field(default_factory=lambda: SketchParams(seeds=DEFAULT_INT_SEEDS))
    bloom_bits: int = DEFAULT_BLOOM_BITS
    bloom_seeds: Sequence[int] = DEFAULT_BLOOM_SEEDS

    def __post_init__(self):
        for name in ("theta_ext", "theta_u", "theta_m", "window_ext_ns", "window_int_ns", "cap_k"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not self.theta_m < self.theta_u:
            raise ConfigError(f"multicast budget theta_m={self.theta_m} must be below theta_u={self.theta_u}")
        for port, role in self.port_roles.items():
            if not isinstance(role, PortRole):
                raise ConfigError(f"port {port} has no valid role")


@dataclass
class WindowState:
    """Tumbling window clock for one flooding stage; rotation zeroes the whole sketch."""

    length_ns: int
    start_ns: int = 0

    def maybe_rotate(self, sketch: CountMinSketch, now: int) -> bool:
        elapsed = now - self.start_ns
        if elapsed < self.length_ns:
            return False
        self.start_ns += (elapsed // self.length_ns) * self.length_ns
        sketch.reset()
        return True


class DefensePipeline:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.roles = dict(config.port_roles)
        self.hl_table = config.hl_table
        self.bindings = BindingTable(config.cap_k)
        self.learned = BloomFilter(config.bloom_bits, config.bloom_seeds)
        self.ext_cms = CountMinSketch(config.ext_sketch.width, config.ext_sketch.seeds)
        self.int_cms = CountMinSketch(config.int_sketch.width, config.int_sketch.seeds)
        self.ext_window = WindowState(config.window_ext_ns)
        self.int_window = WindowState(config.window_int_ns)
        self.drops: Dict[Reason, int] = {}
        self.accepted = 0
        self._last_ts = 0

    def _role(self, port: int) -> PortRole:
        try:
            return self.roles[port]
        except KeyError:
            raise ConfigError(f"ingress port {port} has no configured role") from None

    def maybe_rotate_window(self, module: Stage, now: int) -> bool:
        if module is Stage.EXT_FLOOD:
            return self.ext_window.maybe_rotate(self.ext_cms, now)
        if module is Stage.INT_FLOOD:
            return self.int_window.maybe_rotate(self.int_cms, now)
        raise ValueError(f"{module} has no window")

    # Each check returns None to pass the packet on, or the drop reason.

    def external_spoof_check(self, pkt: Packet, entry: Optional[PrefixEntry] = None) -> Optional[Reason]:
        if self._role(pkt.ingress_port) is PortRole.INTERNAL:
            return None
        if entry is None:
            entry = self.hl_table.lookup(pkt.src)
        if entry is None:
            return Reason.NO_PREFIX_MATCH
        if not entry.hl_min <= pkt.hop_limit <= entry.hl_max:
            return Reason.HL_OUT_OF_BAND
        return None

    def internal_spoof_check(self, pkt: Packet) -> Optional[Reason]:
        port = pkt.ingress_port
        if self._role(port) is PortRole.EXTERNAL:
            return None
        if is_dad_ns(pkt):
            addr = registered_address(pkt)
            key = addr.packed
            if not self.learned.check(key):
                result = self.bindings.try_register(addr, port, pkt.timestamp)
                if result.outcome is BindOutcome.REGISTERED:
                    self.learned.insert(key)
                    return None
                if result.outcome is BindOutcome.CAP_EXCEEDED:
                    return Reason.CAP_EXCEEDED
            # Already learned: a repeat DAD must come from the bound port.
        else:
            addr = pkt.src
        status = self.bindings.check(addr, port)
        if status is BindingCheck.MATCH:
            return None
        if status is BindingCheck.MISMATCH:
            return Reason.BINDING_MISMATCH
        return Reason.UNKNOWN_UNBOUND

    def external_flood_check(self, pkt: Packet, now: int, entry: Optional[PrefixEntry] = None) -> Optional[Reason]:
        if self._role(pkt.ingress_port) is PortRole.INTERNAL:
            return None
        self.ext_window.maybe_rotate(self.ext_cms, now)
        if entry is None:
            entry = self.hl_table.lookup(pkt.src)
            if entry is None:
                raise ValueError("external flood check needs a prefix match; run the spoof check first")
        key = entry.key_bytes()
        if self.ext_cms.estimate(key) >= self.config.theta_ext:
            return Reason.PREFIX_RATE_EXCEEDED
        self.ext_cms.increment(key)
        return None

    def internal_flood_check(self, pkt: Packet, now: int) -> Optional[Reason]:
        if self._role(pkt.ingress_port) is PortRole.EXTERNAL:
            return None
        self.int_window.maybe_rotate(self.int_cms, now)
        key = flow_key(pkt).to_bytes()
        count = self.int_cms.estimate(key)
        if is_multicast(pkt.dst):
            if count >= self.config.theta_m:
                return Reason.FLOW_RATE_EXCEEDED_MULTICAST
        elif count >= self.config.theta_u:
            return Reason.FLOW_RATE_EXCEEDED_UNICAST
        self.int_cms.increment(key)
        return None

    def process(self, pkt: Packet, now: Optional[int] = None) -> Verdict:
        if now is None:
            now = pkt.timestamp
        if now < self._last_ts:
            raise StreamOrderError(f"timestamp {now} precedes {self._last_ts}")
        self._last_ts = now
        pkt = pkt.without_truth()

        external = self._role(pkt.ingress_port) is PortRole.EXTERNAL
        if external:
            entry = self.hl_table.lookup(pkt.src)
            reason = self.external_spoof_check(pkt, entry)
            if reason is None:
                reason = self.external_flood_check(pkt, now, entry)
        else:
            reason = self.internal_spoof_check(pkt)
            if reason is None:
                reason = self.internal_flood_check(pkt, now)

        if reason is None:
            self.accepted += 1
            return ACCEPT
        self.drops[reason] = self.drops.get(reason, 0) + 1
        return _DROPS[reason]

    def run(self, packets):
        return [self.process(p) for p in packets]

    def stage_counts(self) -> Dict[str, Dict[str, int]]:
        """Drop counts grouped by stage then reason, stages in pipeline order."""
        out: Dict[str, Dict[str, int]] = {}
        for stage in (Stage.EXT_SPOOF, Stage.INT_SPOOF, Stage.EXT_FLOOD, Stage.INT_FLOOD):
            reasons = {r.value: n for r, n in sorted(self.drops.items(), key=lambda kv: kv[0].value) if STAGE_OF[r] is stage}
            out[stage.value] = reasons
        return out
