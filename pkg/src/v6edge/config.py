"""INI-style run configuration.

Every key is optional; an empty file (or no file) runs with the defaults
below. Lists are whitespace separated; integers accept 0x prefixes.

    [general]
    seed = 42
    scenarios = all

    [ports]                      ; default: derived from the topology
    external = 1 2
    internal = 10 11 12

    [prefixes]                   ; default: bands derived from the topology
    rows =
        3fff:1::/32 50 56
        3fff:1:6f35::/48 246 252

    [thresholds]
    epsilon = 0.1
    window_ext_ns = 1000000000
    window_int_ns = 1000000000
    ext_service_rate = 2000      ; r, packets/s
    ext_active_prefixes = 25     ; n
    int_unicast_rate = 1000
    int_multicast_rate = 200
    int_active_flows = 11
    ; theta_ext / theta_u / theta_m override the derived budgets
    cap_k = 8

    [sketch]
    width = 4096
    ext_seeds = 0x... 0x... 0x...
    int_seeds = 0x... 0x... 0x...
    bloom_bits = 65536
    bloom_seeds = 0x... 0x... 0x...

    [traffic]                    ; see TrafficParams; rates in packets/s
    duration_windows = 10
    ext_flood_rate = 4000

    [scenario.5]                 ; per-scenario overrides
    vectors = ext_flood ext_spoof
    ext_flood_rate = 8000
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional, Tuple

from .lpm import PrefixEntry, PrefixTable, PrefixTableError
from .packet import PortRole, Vector
from .pipeline import ConfigError, PipelineConfig, SketchParams, compute_threshold, NS_PER_S
from .scenarios import SCENARIO_TABLE, ScenarioSpec, TopologySpec, TrafficParams, scenario
from .sketches import (
    DEFAULT_BLOOM_BITS,
    DEFAULT_BLOOM_SEEDS,
    DEFAULT_CMS_WIDTH,
    DEFAULT_EXT_SEEDS,
    DEFAULT_INT_SEEDS,
)

ENV_CONFIG = "V6EDGE_CONFIG"

_SECTIONS = {
    "general": {"seed", "scenarios"},
    "ports": {"external", "internal"},
    "prefixes": {"rows"},
    "thresholds": {
        "epsilon", "window_ext_ns", "window_int_ns", "ext_service_rate", "ext_active_prefixes",
        "int_unicast_rate", "int_multicast_rate", "int_active_flows", "theta_ext", "theta_u", "theta_m", "cap_k",
    },
    "sketch": {"width", "ext_seeds", "int_seeds", "bloom_bits", "bloom_seeds"},
}
_TRAFFIC_RATES = {f.name for f in fields(TrafficParams)} - {"duration_ns"}
_SECTIONS["traffic"] = _TRAFFIC_RATES | {"duration_windows", "duration_ns"}


@dataclass
class Thresholds:
    epsilon: str = "0.1"
    window_ext_ns: int = NS_PER_S
    window_int_ns: int = NS_PER_S
    ext_service_rate: str = "2000"
    ext_active_prefixes: int = 25
    int_unicast_rate: str = "1000"
    int_multicast_rate: str = "200"
    int_active_flows: int = 11
    theta_ext: Optional[int] = None
    theta_u: Optional[int] = None
    theta_m: Optional[int] = None
    cap_k: int = 8

    def budgets(self) -> Tuple[int, int, int]:
        """(theta_ext, theta_u, theta_m): explicit values win, otherwise derived from rates."""
        ext = self.theta_ext or compute_threshold(
            self.ext_service_rate, self.ext_active_prefixes, _seconds(self.window_ext_ns), self.epsilon
        )
        uni = self.theta_u or compute_threshold(
            self.int_unicast_rate, self.int_active_flows, _seconds(self.window_int_ns), self.epsilon
        )
        multi = self.theta_m or compute_threshold(
            self.int_multicast_rate, self.int_active_flows, _seconds(self.window_int_ns), self.epsilon
        )
        return ext, uni, multi


def _seconds(ns: int) -> str:
    whole, frac = divmod(ns, NS_PER_S)
    return f"{whole}.{frac:09d}"


@dataclass
class RunConfig:
    seed: int = 42
    scenarios: List[int] = field(default_factory=lambda: list(SCENARIO_TABLE))
    external_ports: Optional[List[int]] = None
    internal_ports: Optional[List[int]] = None
    prefixes: Optional[List[PrefixEntry]] = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    width: int = DEFAULT_CMS_WIDTH
    ext_seeds: Tuple[int, ...] = DEFAULT_EXT_SEEDS
    int_seeds: Tuple[int, ...] = DEFAULT_INT_SEEDS
    bloom_bits: int = DEFAULT_BLOOM_BITS
    bloom_seeds: Tuple[int, ...] = DEFAULT_BLOOM_SEEDS
    traffic: Dict[str, str] = field(default_factory=dict)
    scenario_overrides: Dict[int, Dict[str, str]] = field(default_factory=dict)

    # --- derived objects ------------------------------------------------

    def duration_ns(self, overrides: Dict[str, str]) -> int:
        merged = {**self.traffic, **overrides}
        if "duration_ns" in merged:
            return _int(merged["duration_ns"], "duration_ns")
        windows = _int(merged.get("duration_windows", "10"), "duration_windows")
        return windows * max(self.thresholds.window_ext_ns, self.thresholds.window_int_ns)

    def traffic_params(self, sid: Optional[int] = None) -> TrafficParams:
        overrides = self.scenario_overrides.get(sid, {}) if sid is not None else {}
        merged = {**self.traffic, **overrides}
        kwargs = {}
        for name in _TRAFFIC_RATES:
            if name in merged:
                kind = int if name == "attack_start_ns" else float
                kwargs[name] = _num(merged[name], name, kind)
        return TrafficParams(duration_ns=self.duration_ns(overrides), **kwargs)

    def scenario_spec(self, sid: int) -> ScenarioSpec:
        spec = scenario(sid, self.traffic_params(sid), seed=self.seed)
        vectors = self.scenario_overrides.get(sid, {}).get("vectors")
        if vectors is not None:
            try:
                chosen = frozenset(Vector(v) for v in vectors.split())
            except ValueError as exc:
                raise ConfigError(f"scenario.{sid}: {exc}") from None
            if not chosen:
                raise ConfigError(f"scenario.{sid}: vectors must not be empty")
            spec = replace(spec, vectors=chosen)
        return spec

    def pipeline_config(self, topo: TopologySpec) -> PipelineConfig:
        if self.external_ports is None and self.internal_ports is None:
            roles = topo.port_roles
        else:
            ext = self.external_ports if self.external_ports is not None else list(topo.external_ports)
            internal = self.internal_ports if self.internal_ports is not None else list(topo.internal_ports)
            clash = set(ext) & set(internal)
            if clash:
                raise ConfigError(f"ports {sorted(clash)} are both internal and external")
            roles = {p: PortRole.EXTERNAL for p in ext}
            roles.update({p: PortRole.INTERNAL for p in internal})
        entries = self.prefixes if self.prefixes is not None else list(topo.prefixes)
        try:
            table = PrefixTable.load_from_config(entries)
        except PrefixTableError as exc:
            raise ConfigError(str(exc)) from None
        t = self.thresholds
        try:
            theta_ext, theta_u, theta_m = t.budgets()
            return PipelineConfig(
                port_roles=roles,
                hl_table=table,
                theta_ext=theta_ext,
                theta_u=theta_u,
                theta_m=theta_m,
                window_ext_ns=t.window_ext_ns,
                window_int_ns=t.window_int_ns,
                cap_k=t.cap_k,
                ext_sketch=SketchParams(self.width, self.ext_seeds),
                int_sketch=SketchParams(self.width, self.int_seeds),
                bloom_bits=self.bloom_bits,
                bloom_seeds=self.bloom_seeds,
            )
        except (ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None


def _int(text: str, key: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _num(text: str, key: str, kind=float):
    if kind is int:
        return _int(text, key)
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _ints(text: str, key: str) -> List[int]:
    return [_int(t, key) for t in text.replace(",", " ").split()]


def parse_scenario_ids(text: str) -> List[int]:
    text = text.strip()
    if text.lower() == "all":
        return list(SCENARIO_TABLE)
    ids = []
    for part in text.replace(",", " ").split():
        if "-" in part:
            lo, _, hi = part.partition("-")
            ids.extend(range(_int(lo, "scenarios"), _int(hi, "scenarios") + 1))
        else:
            ids.append(_int(part, "scenarios"))
    bad = [i for i in ids if i not in SCENARIO_TABLE]
    if bad or not ids:
        raise ConfigError(f"scenario ids must be within 1..15, got {text!r}")
    return sorted(set(ids))


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None

    cfg = RunConfig()
    for section in parser.sections():
        items = dict(parser.items(section))
        if section.startswith("scenario."):
            sid = _int(section.split(".", 1)[1], section)
            if sid not in SCENARIO_TABLE:
                raise ConfigError(f"[{section}]: scenario id must be within 1..15")
            unknown = set(items) - _SECTIONS["traffic"] - {"vectors"}
            if unknown:
                raise ConfigError(f"[{section}]: unknown keys {sorted(unknown)}")
            cfg.scenario_overrides[sid] = items
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(items) - _SECTIONS[section]
        if unknown:
            raise ConfigError(f"[{section}]: unknown keys {sorted(unknown)}")

        if section == "general":
            if "seed" in items:
                cfg.seed = _int(items["seed"], "seed")
            if "scenarios" in items:
                cfg.scenarios = parse_scenario_ids(items["scenarios"])
        elif section == "ports":
            if "external" in items:
                cfg.external_ports = _ints(items["external"], "external")
            if "internal" in items:
                cfg.internal_ports = _ints(items["internal"], "internal")
        elif section == "prefixes":
            rows = [r.strip() for r in items.get("rows", "").splitlines() if r.strip()]
            try:
                cfg.prefixes = [PrefixEntry.parse(r) for r in rows]
            except PrefixTableError as exc:
                raise ConfigError(f"[prefixes]: {exc}") from None
        elif section == "thresholds":
            t = cfg.thresholds
            for key, value in items.items():
                if key in ("epsilon", "ext_service_rate", "int_unicast_rate", "int_multicast_rate"):
                    _num(value, key)
                    setattr(t, key, value)
                else:
                    setattr(t, key, _int(value, key))
        elif section == "sketch":
            for key, value in items.items():
                if key.endswith("seeds"):
                    setattr(cfg, key, tuple(_ints(value, key)))
                else:
                    setattr(cfg, key, _int(value, key))
        elif section == "traffic":
            cfg.traffic = items
    return cfg


def load_config(path: Optional[str]) -> RunConfig:
    """Load ``path``, else the file named by $V6EDGE_CONFIG, else defaults."""
    path = path or os.environ.get(ENV_CONFIG)
    if not path:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
