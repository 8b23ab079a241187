import pytest

from p4te.topology import ConfigError, Direction, build_leaf_spine, format_addr, prefix_match


@pytest.fixture
def topo():
    return build_leaf_spine(4, 4, 4, 40, 20, 8)


def test_shape(topo):
    assert len(topo.hosts) == 16 and len(topo.switches) == 8
    assert all(len(topo.upward_ports(l)) == 4 for l in topo.leaf_switches)
    assert all(len(topo.downward_ports(l)) == 4 for l in topo.leaf_switches)
    assert all(topo.upward_ports(s) == [] for s in topo.spine_switches)
    assert topo.core_capacity_pps() == 320


def test_adjacency_is_symmetric(topo):
    for a, b in topo.adjacency.items():
        assert topo.adjacency[b] == a


def test_hierarchical_addresses(topo):
    assert format_addr(topo.addresses["H0"]) == "10.0.0.1"
    assert format_addr(topo.addresses["H5"]) == "10.1.0.2"
    for h in topo.hosts:
        leaf = topo.host_leaf[h]
        assert prefix_match(topo.addresses[h], topo.leaf_prefix[leaf])
        assert prefix_match(topo.addresses[h], topo.dcn_prefix)
        assert topo.leaf_index_of_addr(topo.addresses[h]) == topo.leaf_switches.index(leaf)


def test_bandwidths_and_directions(topo):
    assert topo.port_bandwidth("L0", 0) == 40
    assert topo.port_bandwidth("L0", 4) == 20
    assert topo.port_bandwidth("H0", 0) == 40
    assert topo.port_direction("L0", 5) is Direction.UPWARD
    assert topo.port_direction("S2", 1) is Direction.DOWNWARD
    with pytest.raises(KeyError):
        topo.port_direction("L0", 99)


def test_paths(topo):
    assert topo.enumerate_paths("H0", "H1") == [["H0", "L0", "H1"]]
    paths = topo.enumerate_paths("H0", "H5")
    assert len(paths) == 4 and all(p[0] == "H0" and p[-1] == "H5" and p[2].startswith("S") for p in paths)
    li, pos = topo.host_index("H6")
    assert topo.host_at(li, pos) == "H6"


@pytest.mark.parametrize("args", [(0, 4, 4, 40, 20, 8), (4, 5, 4, 40, 20, 8), (9, 4, 4, 40, 20, 8), (4, 4, 4, 0, 20, 8)])
def test_bad_topologies(args):
    with pytest.raises(ConfigError):
        build_leaf_spine(*args)
