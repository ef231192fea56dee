import io
import math

import numpy as np
import pytest

from geofwd.errors import ConfigError, DomainError, RetryExhaustedError
from geofwd.netsim.network import Network, generate_network, read_network_csv, write_network_csv
from geofwd.rng import stream


@pytest.fixture(scope="module")
def net():
    return generate_network(10.0, 5.0, 1.0, stream(0, 2))


def test_layout(net):
    assert net.positions.shape == (net.N + 2, 2)
    assert np.array_equal(net.positions[0], [0.0, 0.0])
    assert np.array_equal(net.positions[-1], [10.0, 10.0])
    inner = net.positions[1:-1]
    assert inner.min() >= 0 and inner.max() <= 10
    assert net.source == 0 and net.sink == net.N + 1
    assert np.all((net.phases >= 0) & (net.phases < 1))
    assert net.draws[-1] == net.N


def test_node_count_mean():
    # pool every Poisson draw, rejected ones included; accepted fields alone
    # are biased upward by the nonempty-forwarding-set condition
    pooled = []
    for i in range(40):
        pooled.extend(generate_network(10.0, 5.0, 1.0, stream(7, i)).draws)
    n = len(pooled)
    assert abs(np.mean(pooled) - 500.0) < 3 * math.sqrt(500.0 / n)


def test_neighbors_symmetric_and_in_range(net):
    for i, nb in enumerate(net.neighbors):
        assert i not in nb
        d = np.hypot(*(net.positions[nb] - net.positions[i]).T)
        assert np.all(d <= net.r_c)
        for j in nb:
            assert i in net.neighbors[j]
    # brute force over all pairs for a few nodes
    for i in (0, 5, net.sink):
        d = np.hypot(*(net.positions - net.positions[i]).T)
        expected = sorted(j for j in np.flatnonzero(d <= net.r_c) if j != i)
        assert list(net.neighbors[i]) == expected


def test_forwarding_sets_strictly_closer(net):
    for i, fs in enumerate(net.forwarding[:-1]):
        assert fs.size > 0
        assert np.all(net.dist_to_sink[fs] < net.dist_to_sink[i])
        assert set(fs) <= set(net.neighbors[i])
    assert net.dead_ends().size == 0
    assert net.forwarding[net.sink].size == 0


def test_retry_exhausted():
    with pytest.raises(RetryExhaustedError):
        generate_network(10.0, 0.5, 1.0, stream(0, 2), max_retries=3)


@pytest.mark.parametrize("args", [(0.0, 5.0, 1.0), (10.0, -1.0, 1.0), (10.0, 5.0, 0.0), (1.0, 0.5, 1.0)])
def test_bad_parameters(args):
    with pytest.raises(DomainError):
        generate_network(*args, stream(0, 2))


def test_same_stream_same_network():
    a = generate_network(6.0, 5.0, 1.0, stream(3, 2))
    b = generate_network(6.0, 5.0, 1.0, stream(3, 2))
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.phases, b.phases)


def test_csv_roundtrip(net):
    buf = io.StringIO()
    write_network_csv(net, buf)
    text = buf.getvalue()
    assert text.startswith("# L=10.0\n# lambda=5.0\n# r_c=1.0\nindex,x,y,phase\n")
    back = read_network_csv(text)
    assert np.array_equal(back.positions, net.positions)
    assert np.array_equal(back.phases, net.phases)
    assert all(np.array_equal(a, b) for a, b in zip(back.forwarding, net.forwarding))


def test_csv_errors():
    with pytest.raises(ConfigError):
        read_network_csv("# L=1\n# lambda=1\n# r_c=1\nindex,x,y,phase\n1,0,0,0\n")
    with pytest.raises(ConfigError):
        read_network_csv("# L=1\nindex,x,y,phase\n0,0,0,0\n1,1,1,0\n")


def test_from_positions_line():
    pos = [(0.0, 0.0), (0.8, 0.0), (1.6, 0.0), (2.4, 0.0)]
    net = Network.from_positions(2.4, 1.0, 1.0, pos)
    assert [list(f) for f in net.forwarding] == [[1], [2], [3], []]
