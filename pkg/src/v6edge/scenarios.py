"""Evaluation topology and the fifteen labeled attack scenarios.

Everything is driven by string-seeded ``random.Random`` instances, one per
sub-stream, so toggling an attack vector never perturbs the benign traffic
and a (seed, scenario) pair always yields the same packets.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from ipaddress import IPv6Address
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .lpm import PrefixEntry, PrefixTable
from .packet import (
    ALL_NODES,
    BENIGN,
    ICMP6_ECHO_REQUEST,
    ICMP6_NEIGHBOR_ADVERT,
    ICMP6_NEIGHBOR_SOLICIT,
    UNSPECIFIED,
    Icmpv6,
    Packet,
    PortRole,
    Tcp,
    Truth,
    Vector,
    is_multicast,
    serialize_record,
    solicited_node,
)

NS_PER_S = 1_000_000_000

EXT_FLOOD, EXT_SPOOF, INT_FLOOD, INT_SPOOF = (
    Vector.EXT_FLOOD,
    Vector.EXT_SPOOF,
    Vector.INT_FLOOD,
    Vector.INT_SPOOF,
)

# id -> (vectors, row label)
SCENARIO_TABLE: Dict[int, Tuple[FrozenSet[Vector], str]] = {
    1: (frozenset({INT_FLOOD}), "Internal Flooding"),
    2: (frozenset({EXT_FLOOD}), "External Flooding"),
    3: (frozenset({INT_SPOOF}), "Internal Spoofing"),
    4: (frozenset({EXT_SPOOF}), "External Spoofing"),
    5: (frozenset({EXT_FLOOD, EXT_SPOOF}), "Ext. Flood + Ext. Spoof"),
    6: (frozenset({EXT_FLOOD, INT_SPOOF}), "Ext. Flood + Int. Spoof"),
    7: (frozenset({EXT_FLOOD, INT_FLOOD}), "Ext. Flood + Int. Flood"),
    8: (frozenset({EXT_SPOOF, INT_FLOOD}), "Ext. Spoof + Int. Flood"),
    9: (frozenset({INT_SPOOF, INT_FLOOD}), "Int. Spoof + Int. Flood"),
    10: (frozenset({INT_SPOOF, EXT_SPOOF}), "Int. Spoof + Ext. Spoof"),
    11: (frozenset({INT_FLOOD, EXT_FLOOD, EXT_SPOOF}), "Int. Flood + Ext. Flood + Ext. Spoof"),
    12: (frozenset({INT_SPOOF, EXT_FLOOD, EXT_SPOOF}), "Int. Spoof + Ext. Flood + Ext. Spoof"),
    13: (frozenset({INT_FLOOD, INT_SPOOF, EXT_FLOOD}), "Int. Flood + Int. Spoof + Ext. Flood"),
    14: (frozenset({INT_FLOOD, INT_SPOOF, EXT_SPOOF}), "Int. Flood + Int. Spoof + Ext. Spoof"),
    15: (frozenset({INT_FLOOD, INT_SPOOF, EXT_FLOOD, EXT_SPOOF}), "Full Combined Attack (All 4 Vectors)"),
}

INITIAL_HOP_LIMITS = (64, 128, 255)
MIN_PATH, MAX_PATH = 3, 20
BAND_MARGIN = 2

LAN_PREFIX = IPv6Address("2001:db8:0:1::")
ROUTER = IPv6Address("2001:db8:0:1::1")
SERVER = IPv6Address("2001:db8:0:1::80")
EXTERNAL_PORTS = (1, 2)
SERVER_PORT = 10


class GeneratorError(RuntimeError):
    pass


@dataclass(frozen=True)
class InternalHost:
    name: str
    port: int
    addresses: Tuple[IPv6Address, ...]  # (global, link-local)
    kind: str = "client"  # client | server | int_flood_attacker
    dad_at_start: bool = True

    @property
    def addr(self) -> IPv6Address:
        return self.addresses[0]


@dataclass(frozen=True)
class ExternalHost:
    name: str
    addr: IPv6Address
    prefix: PrefixEntry
    port: int
    initial_hl: int
    path_hops: int

    @property
    def arrival_hl(self) -> int:
        return self.initial_hl - self.path_hops


@dataclass(frozen=True)
class TopologySpec:
    seed: object
    internal_hosts: Tuple[InternalHost, ...]
    external_hosts: Tuple[ExternalHost, ...]  # h1..h100
    flood_hosts: Tuple[ExternalHost, ...]  # botnet inside one dedicated prefix
    prefixes: Tuple[PrefixEntry, ...]
    server: IPv6Address
    router: IPv6Address
    int_spoof_port: int
    ext_spoof_port: int
    ext_spoof_hl: int

    @property
    def external_ports(self) -> Tuple[int, ...]:
        return EXTERNAL_PORTS

    @property
    def internal_ports(self) -> Tuple[int, ...]:
        return tuple(sorted({h.port for h in self.internal_hosts} | {self.int_spoof_port}))

    @property
    def port_roles(self) -> Dict[int, PortRole]:
        roles = {p: PortRole.EXTERNAL for p in self.external_ports}
        roles.update({p: PortRole.INTERNAL for p in self.internal_ports})
        return roles

    @property
    def flood_prefix(self) -> PrefixEntry:
        return self.flood_hosts[0].prefix

    def table(self) -> PrefixTable:
        return PrefixTable.load_from_config(self.prefixes)

    def host(self, kind: str) -> InternalHost:
        return next(h for h in self.internal_hosts if h.kind == kind)


def _rng(*parts) -> random.Random:
    return random.Random("/".join(str(p) for p in parts))


def _addr_in(rng: random.Random, base: IPv6Address, length: int) -> IPv6Address:
    return IPv6Address(int(base) | rng.getrandbits(128 - length))


def _prefix_plan(rng: random.Random) -> List[Tuple[IPv6Address, int]]:
    """Five ISP /32s under 3fff::/20, each with nested /48, /56 and /64 allocations."""
    plan = []
    for isp in range(5):
        base = (0x3FFF << 112) | ((isp + 1) << 96)
        org = rng.randrange(1, 0xFFFF)
        sub = rng.randrange(1, 0xFF)
        consumer = rng.randrange(1, 0xFFFF)
        while consumer == org:
            consumer = rng.randrange(1, 0xFFFF)
        plan.append((IPv6Address(base), 32))
        plan.append((IPv6Address(base | org << 80), 48))
        plan.append((IPv6Address(base | org << 80 | sub << 72), 56))  # nested in the /48
        plan.append((IPv6Address(base | consumer << 80 | rng.getrandbits(16) << 64), 64))
        other = rng.randrange(1, 0xFFFF)
        while other in (org, consumer):
            other = rng.randrange(1, 0xFFFF)
        plan.append((IPv6Address(base | other << 80 | rng.randrange(1, 0xFF) << 72), 56))
    return plan


def _domain_hosts(rng, entry_net, table_probe, count, initial_hl, base_path, port, names):
    base, length = entry_net
    hosts = []
    for name in names[:count]:
        while True:
            addr = _addr_in(rng, base, length)
            if table_probe(addr) == entry_net:
                break
        hops = min(MAX_PATH, max(MIN_PATH, base_path + rng.choice((-1, 0, 1))))
        hosts.append((name, addr, port, initial_hl, hops))
    return hosts


def build_topology(seed=42, n_external: int = 100, n_clients: int = 8, n_bots: int = 16) -> TopologySpec:
    rng = _rng("topology", seed)
    plan = _prefix_plan(rng)
    flood_net = (IPv6Address((0x3FFF << 112) | (5 << 96) | (0xBAD << 80) | (0xF0 << 72)), 56)

    def probe(addr, nets=plan + [flood_net]):
        best = None
        for base, length in nets:
            mask = ((1 << length) - 1) << (128 - length)
            if int(addr) & mask == int(base) and (best is None or length > best[1]):
                best = (base, length)
        return best

    # Hosts of one leaf prefix share an operator (same initial HL) and an upstream path.
    names = [f"h{i}" for i in range(1, n_external + 1)]
    per_domain = [n_external // len(plan) + (1 if i < n_external % len(plan) else 0) for i in range(len(plan))]
    raw = []
    cursor = 0
    for (net, n) in zip(plan, per_domain):
        isp_index = (int(net[0]) >> 96 & 0xFFFF) - 1
        port = EXTERNAL_PORTS[isp_index % len(EXTERNAL_PORTS)]
        init = rng.choice(INITIAL_HOP_LIMITS)
        path = rng.randint(MIN_PATH, MAX_PATH)
        raw.append((net, init - path, _domain_hosts(rng, net, probe, n, init, path, port, names[cursor:cursor + n])))
        cursor += n

    bot_init = rng.choice(INITIAL_HOP_LIMITS)
    bot_path = rng.randint(MIN_PATH, MAX_PATH)
    bot_port = EXTERNAL_PORTS[0]
    bot_names = [f"bot{i}" for i in range(1, n_bots + 1)]
    bots_raw = _domain_hosts(rng, flood_net, lambda a: probe(a, [flood_net]), n_bots, bot_init, bot_path, bot_port, bot_names)
    raw.append((flood_net, bot_init - bot_path, bots_raw))

    entries = {}
    for net, nominal, hosts in raw:
        arrivals = [init - hops for _, _, _, init, hops in hosts] or [nominal]
        lo = max(0, min(arrivals) - BAND_MARGIN)
        hi = min(255, max(arrivals) + BAND_MARGIN)
        entries[net] = PrefixEntry(net[0], net[1], lo, hi)

    def mk(hosts, net):
        return tuple(ExternalHost(n, a, entries[net], p, i, h) for n, a, p, i, h in hosts)

    external = tuple(h for net, _, hosts in raw[:-1] for h in mk(hosts, net))
    bots = mk(bots_raw, flood_net)

    # Internal LAN: server, clients, one flooding insider, one spoofing port without a host.
    used_low = set()

    def iid():
        while True:
            v = rng.getrandbits(64) | 0x0200_0000_0000_0000
            if v & 0xFFFFFF not in used_low and v & 0xFFFFFF not in (0x80, 0x1):
                used_low.add(v & 0xFFFFFF)
                return v

    internal = [
        InternalHost("server", SERVER_PORT, (SERVER, IPv6Address((0xFE80 << 112) | 0x80)), "server")
    ]
    used_low.add(0x80)
    port = SERVER_PORT + 1
    for i in range(1, n_clients + 1):
        v = iid()
        internal.append(
            InternalHost(
                f"c{i}", port, (IPv6Address(int(LAN_PREFIX) | v), IPv6Address((0xFE80 << 112) | v)), "client"
            )
        )
        port += 1
    v = iid()
    internal.append(
        InternalHost(
            "insider", port, (IPv6Address(int(LAN_PREFIX) | v), IPv6Address((0xFE80 << 112) | v)), "int_flood_attacker"
        )
    )
    int_spoof_port = port + 1

    ext_spoof_hl = 64 - rng.randint(MIN_PATH, MAX_PATH)
    ext_spoof_port = EXTERNAL_PORTS[1]
    if all(h.prefix.admits(ext_spoof_hl) for h in external):
        raise GeneratorError("external spoofer's hop limit fits every prefix band")

    return TopologySpec(
        seed=seed,
        internal_hosts=tuple(internal),
        external_hosts=external,
        flood_hosts=bots,
        prefixes=tuple(sorted(entries.values(), key=lambda e: (int(e.prefix), e.length))),
        server=SERVER,
        router=ROUTER,
        int_spoof_port=int_spoof_port,
        ext_spoof_port=ext_spoof_port,
        ext_spoof_hl=ext_spoof_hl,
    )


@dataclass(frozen=True)
class TrafficParams:
    """Rates are packets per second; benign rates are per host."""

    duration_ns: int = 10 * NS_PER_S
    attack_start_ns: int = NS_PER_S // 2
    benign_ext_syn_rate: float = 2.0
    benign_int_syn_rate: float = 2.0
    benign_nd_rate: float = 1.0
    int_flood_unicast_rate: float = 3000.0
    int_flood_multicast_rate: float = 1000.0
    ext_flood_rate: float = 4000.0
    ext_spoof_rate: float = 300.0
    int_spoof_rate: float = 300.0


@dataclass(frozen=True)
class ScenarioSpec:
    id: int
    vectors: FrozenSet[Vector]
    name: str = ""
    params: TrafficParams = field(default_factory=TrafficParams)
    seed: object = 0

    def __post_init__(self):
        if not self.vectors:
            raise ValueError("a scenario needs at least one attack vector")

    @property
    def duration_ns(self) -> int:
        return self.params.duration_ns


def list_scenarios(params: Optional[TrafficParams] = None, seed=0) -> List[ScenarioSpec]:
    params = params or TrafficParams()
    return [ScenarioSpec(i, v, name, params, seed) for i, (v, name) in SCENARIO_TABLE.items()]


def scenario(sid: int, params: Optional[TrafficParams] = None, seed=0) -> ScenarioSpec:
    if sid not in SCENARIO_TABLE:
        raise ValueError(f"scenario id must be 1..15, got {sid}")
    vectors, name = SCENARIO_TABLE[sid]
    return ScenarioSpec(sid, vectors, name, params or TrafficParams(), seed)


def _times(rng: random.Random, rate: float, start: int, end: int) -> List[int]:
    n = round(rate * (end - start) / NS_PER_S)
    if n <= 0 or end <= start:
        return []
    return sorted(rng.randrange(start, end) for _ in range(n))


def _ephemeral(rng: random.Random) -> int:
    return rng.randrange(49152, 65536)


def _benign(topo: TopologySpec, p: TrafficParams, seed) -> List[Packet]:
    out: List[Packet] = []
    end = p.duration_ns
    dad_end = NS_PER_S // 20  # startup DAD burst in the first 50 ms
    rng = _rng("dad", topo.seed, seed)
    for h in topo.internal_hosts:
        if not h.dad_at_start:
            continue
        for a in h.addresses:
            out.append(
                Packet(rng.randrange(0, dad_end), h.port, UNSPECIFIED, solicited_node(a), 255,
                       Icmpv6(ICMP6_NEIGHBOR_SOLICIT, a), BENIGN)
            )
    rng = _rng("nd", topo.seed, seed)
    for h in topo.internal_hosts:
        for t in _times(rng, p.benign_nd_rate, dad_end, end):
            out.append(
                Packet(t, h.port, h.addr, solicited_node(topo.router), 255,
                       Icmpv6(ICMP6_NEIGHBOR_SOLICIT, topo.router), BENIGN)
            )
    rng = _rng("int-syn", topo.seed, seed)
    for h in topo.internal_hosts:
        if h.kind != "client":
            continue
        for t in _times(rng, p.benign_int_syn_rate, dad_end, end):
            out.append(Packet(t, h.port, h.addr, topo.server, 64, Tcp(_ephemeral(rng), 80, True), BENIGN))
    rng = _rng("ext-syn", topo.seed, seed)
    for h in topo.external_hosts:
        for t in _times(rng, p.benign_ext_syn_rate, 0, end):
            # Occasional one-hop path change stays inside the +/-2 band margin.
            hl = h.arrival_hl + (rng.choice((-1, 1)) if rng.random() < 0.05 else 0)
            out.append(Packet(t, h.port, h.addr, topo.server, hl, Tcp(_ephemeral(rng), 443, True), BENIGN))
    return out


def _int_flood(topo, p, seed) -> List[Packet]:
    rng = _rng("int-flood", topo.seed, seed)
    h = topo.host("int_flood_attacker")
    label = Truth(INT_FLOOD)
    start, end = p.attack_start_ns, p.duration_ns
    out = [
        Packet(t, h.port, h.addr, topo.server, 64, Tcp(_ephemeral(rng), 80, True), label)
        for t in _times(rng, p.int_flood_unicast_rate, start, end)
    ]
    out += [
        Packet(t, h.port, h.addr, ALL_NODES, 64, Icmpv6(ICMP6_ECHO_REQUEST), label)
        for t in _times(rng, p.int_flood_multicast_rate, start, end)
    ]
    return out


def _ext_flood(topo, p, seed) -> List[Packet]:
    rng = _rng("ext-flood", topo.seed, seed)
    label = Truth(EXT_FLOOD)
    out = []
    for t in _times(rng, p.ext_flood_rate, p.attack_start_ns, p.duration_ns):
        bot = rng.choice(topo.flood_hosts)
        out.append(Packet(t, bot.port, bot.addr, topo.server, bot.arrival_hl, Tcp(_ephemeral(rng), 443, True), label))
    return out


def _int_spoof(topo, p, seed) -> List[Packet]:
    rng = _rng("int-spoof", topo.seed, seed)
    label = Truth(INT_SPOOF)
    port = topo.int_spoof_port
    victims = [(a, h.port) for h in topo.internal_hosts if h.dad_at_start for a in h.addresses]
    out = []
    for t in _times(rng, p.int_spoof_rate, p.attack_start_ns, p.duration_ns):
        victim, victim_port = rng.choice(victims)
        if victim_port == port:
            raise GeneratorError("spoofing port coincides with a victim's bound port")
        kind = rng.randrange(4)
        if kind == 0:  # NS claiming the victim's address
            pkt = Packet(t, port, victim, solicited_node(topo.router), 255,
                         Icmpv6(ICMP6_NEIGHBOR_SOLICIT, topo.router), label)
        elif kind == 1:  # unsolicited NA poisoning neighbor caches
            pkt = Packet(t, port, victim, ALL_NODES, 255, Icmpv6(ICMP6_NEIGHBOR_ADVERT), label)
        elif kind == 2:  # DAD probe for an address already in use elsewhere
            pkt = Packet(t, port, UNSPECIFIED, solicited_node(victim), 255,
                         Icmpv6(ICMP6_NEIGHBOR_SOLICIT, victim), label)
        else:
            pkt = Packet(t, port, victim, topo.server, 64, Icmpv6(ICMP6_ECHO_REQUEST), label)
        out.append(pkt)
    return out


def _ext_spoof(topo, p, seed) -> List[Packet]:
    rng = _rng("ext-spoof", topo.seed, seed)
    label = Truth(EXT_SPOOF)
    hl = topo.ext_spoof_hl
    out = []
    for t in _times(rng, p.ext_spoof_rate, p.attack_start_ns, p.duration_ns):
        claimed = rng.choice(topo.external_hosts)
        while claimed.prefix.admits(hl):
            claimed = rng.choice(topo.external_hosts)
        out.append(Packet(t, topo.ext_spoof_port, claimed.addr, topo.server, hl, Tcp(_ephemeral(rng), 443, True), label))
    return out


_ATTACKS = (
    (INT_FLOOD, _int_flood),
    (EXT_FLOOD, _ext_flood),
    (INT_SPOOF, _int_spoof),
    (EXT_SPOOF, _ext_spoof),
)


def generate(spec: ScenarioSpec, topo: TopologySpec, include_benign: bool = True) -> List[Packet]:
    """Timestamp-ordered labeled stream; ties keep sub-stream order."""
    p = spec.params
    if p.attack_start_ns < 0 or p.duration_ns <= 0:
        raise ValueError("duration must be positive and attack start non-negative")
    stream = _benign(topo, p, spec.seed) if include_benign else []
    for vector, make in _ATTACKS:
        if vector in spec.vectors:
            stream += make(topo, p, spec.seed)
    stream.sort(key=lambda pkt: pkt.timestamp)
    check_labels(stream, topo)
    return stream


def check_labels(stream: Sequence[Packet], topo: TopologySpec) -> None:
    """Label soundness: each packet's label agrees with the identity predicates."""
    table = topo.table()
    roles = topo.port_roles
    dad_port = {a: h.port for h in topo.internal_hosts for a in h.addresses}
    for pkt in stream:
        vector = pkt.truth.vector if pkt.truth else None
        if roles[pkt.ingress_port] is PortRole.EXTERNAL:
            entry = table.lookup(pkt.src)
            in_band = entry is not None and entry.admits(pkt.hop_limit)
            if (vector is EXT_SPOOF) == in_band:
                raise GeneratorError(f"external packet label {vector} disagrees with band check: {pkt}")
        else:
            claimed = pkt.l4.ns_target if pkt.src == UNSPECIFIED else pkt.src
            bound_here = dad_port.get(claimed) == pkt.ingress_port
            if (vector is INT_SPOOF) == bound_here:
                raise GeneratorError(f"internal packet label {vector} disagrees with binding: {pkt}")


def benign_peaks(stream: Sequence[Packet], topo: TopologySpec, window_ext_ns: int, window_int_ns: int):
    """Largest per-window benign count for any external prefix, unicast flow and multicast flow."""
    table = topo.table()
    roles = topo.port_roles
    ext: Dict[tuple, int] = {}
    uni: Dict[tuple, int] = {}
    multi: Dict[tuple, int] = {}
    for pkt in stream:
        if pkt.truth is None or pkt.truth.is_attack:
            continue
        if roles[pkt.ingress_port] is PortRole.EXTERNAL:
            k = (table.lookup(pkt.src).key, pkt.timestamp // window_ext_ns)
            ext[k] = ext.get(k, 0) + 1
        else:
            k = (pkt.src, pkt.dst, pkt.timestamp // window_int_ns)
            bucket = multi if is_multicast(pkt.dst) else uni
            bucket[k] = bucket.get(k, 0) + 1
    return (max(ext.values(), default=0), max(uni.values(), default=0), max(multi.values(), default=0))


def check_benign_headroom(stream, topo, theta_ext, theta_u, theta_m, window_ext_ns, window_int_ns, margin=0.8):
    """Raise unless benign per-window counts stay below ``margin`` of every budget."""
    e, u, m = benign_peaks(stream, topo, window_ext_ns, window_int_ns)
    problems = [
        f"{what} peak {peak} >= {margin}*{theta}"
        for what, peak, theta in (("prefix", e, theta_ext), ("unicast flow", u, theta_u), ("multicast flow", m, theta_m))
        if peak >= margin * theta
    ]
    if problems:
        raise GeneratorError("benign traffic too close to flooding budgets: " + "; ".join(problems))


def write_trace(stream: Sequence[Packet], sink) -> None:
    for pkt in stream:
        sink.write(serialize_record(pkt))
        sink.write("\n")
