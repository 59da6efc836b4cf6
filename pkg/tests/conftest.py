import pytest

from mcqf import FlowSet, TTFlow, generate_topology


@pytest.fixture(scope="session")
def ring4():
    return generate_topology("ring", link_bw_bps=10**9, seed=7, switches=4,
                             hosts_per_switch=1)


@pytest.fixture(scope="session")
def erg10():
    return generate_topology("erg", link_bw_bps=10**8, seed=1, n=10, p=0.3)


def make_flows(specs):
    """Build a FlowSet from (src, dst, period, deadline, size) tuples."""
    return FlowSet(
        TTFlow(i, src, dst, period, deadline, size)
        for i, (src, dst, period, deadline, size) in enumerate(specs)
    )
