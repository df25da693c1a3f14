import numpy as np
import pytest

from mixedtraffic import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # JIT compilation is not part of any runtime budget
    kernels.warmup()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def make_world(net, noise=0.0, **kwargs):
    from mixedtraffic.idm import IdmParams
    from mixedtraffic.world import World

    return World(net, idm=IdmParams(noise_bound=noise), **kwargs)


def scatter_vehicles(world, rng, count, rv_every=5, v_max=15.0):
    """Random but valid vehicle placement for fuzzed rendering states."""
    net = world.net
    placed = 0
    guard = 0
    while placed < count and guard < count * 50:
        guard += 1
        ri = int(rng.integers(len(net.routes)))
        route = net.routes[ri]
        epos = int(rng.integers(len(route.edges)))
        edge = net.edge(route.edges[epos])
        lane = int(rng.integers(edge.lane_count))
        arc = float(rng.uniform(5.0, edge.length))
        ge = net.edge_index(edge.id)
        mask = (world.gedge() == ge) & (world.lane == lane)
        if np.any(np.abs(world.arc[mask] - arc) < 8.0):
            continue
        role = "rv" if placed % rv_every == 0 else "hv"
        world.add_vehicle(
            "passenger", role, route.id, lane, arc, float(rng.uniform(0, v_max)), epos=epos
        )
        placed += 1
    return placed
