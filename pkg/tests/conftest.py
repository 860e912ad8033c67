import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pinsync import harness
from pinsync.topology import SwitchingNetwork, graph_mode_from_edges


@pytest.fixture(scope="session")
def benchmark():
    """The bundled default benchmark configuration, loaded once."""
    return harness.load_config(harness.preset_path("chua_benchmark"))


@pytest.fixture(scope="session")
def two_pinned():
    return harness.load_config(harness.preset_path("chua_two_pinned"))


@pytest.fixture()
def pair_network():
    """Two linked nodes, node 1 pinned, single mode."""
    mode = graph_mode_from_edges([(1, 2)], [1], 2)
    return SwitchingNetwork(modes=(mode,), generator=np.array([[0.0]]))


@pytest.fixture()
def two_mode_network():
    m1 = graph_mode_from_edges([(1, 2), (2, 3)], [1], 3)
    m2 = graph_mode_from_edges([(1, 3), (2, 3)], [2], 3)
    return SwitchingNetwork(modes=(m1, m2), generator=np.array([[-2.0, 2.0], [3.0, -3.0]]))
