from ipaddress import IPv6Address

import pytest

from v6edge.lpm import PrefixEntry, PrefixTable
from v6edge.packet import BENIGN, Icmpv6, Packet, PortRole, Tcp, UNSPECIFIED, solicited_node
from v6edge.pipeline import DefensePipeline, PipelineConfig

EXT_PORT = 1
INT_PORTS = (2, 3, 5)


def A(text):
    return IPv6Address(text)


def tcp(src, dst="2001:db8::80", port=EXT_PORT, hl=64, ts=0, truth=BENIGN):
    return Packet(ts, port, A(src), A(dst), hl, Tcp(40000, 443, True), truth)


def dad(addr, port, ts=0):
    a = A(addr)
    return Packet(ts, port, UNSPECIFIED, solicited_node(a), 255, Icmpv6(135, a), BENIGN)


@pytest.fixture
def small_table():
    return PrefixTable.load_from_config(
        [
            PrefixEntry(A("2001:db8::"), 32, 40, 70),
            PrefixEntry(A("2001:db8:1::"), 48, 50, 60),
        ]
    )


@pytest.fixture
def make_pipeline(small_table):
    def make(**kw):
        roles = {EXT_PORT: PortRole.EXTERNAL}
        roles.update({p: PortRole.INTERNAL for p in INT_PORTS})
        params = dict(theta_ext=110, theta_u=100, theta_m=20, window_ext_ns=10**9, window_int_ns=10**9, cap_k=4)
        params.update(kw)
        return DefensePipeline(PipelineConfig(roles, small_table, **params))

    return make
