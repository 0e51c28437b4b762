"""
Pytest configuration and shared fixtures for all tests.
"""

import pytest
import sys
from pathlib import Path
import tempfile
import shutil

import numpy as np

# Add project directories to path
PROJECTS_DIR = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECTS_DIR))

SAMPLE_DATA_DIR = PROJECTS_DIR / "manifold_geodesics" / "sample_data"


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    temp_path = tempfile.mkdtemp()
    yield Path(temp_path)
    shutil.rmtree(temp_path)


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def chain_cloud():
    """Four collinear points at x = 0, 1, 2, 3."""
    from manifold_geodesics.cloud_core import PointCloud

    return PointCloud(np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0], [3.0, 0, 0]]))


@pytest.fixture
def grid_cloud():
    """8 x 8 planar grid with unit spacing."""
    from manifold_geodesics.cloud_core import gen_synthetic

    cloud, _ = gen_synthetic("grid", 64)
    return cloud


@pytest.fixture
def swiss_roll():
    """Small swiss roll with its arclength feature."""
    from manifold_geodesics.cloud_core import gen_synthetic

    cloud, _ = gen_synthetic("swiss_roll", 300, seed=3)
    return cloud


@pytest.fixture
def two_planes():
    """Two parallel 20 x 20 sheets, 0.12 apart, with sheet ids."""
    from manifold_geodesics.cloud_core import gen_synthetic

    return gen_synthetic("two_planes", 800, {"gap": 0.12, "extent": 1.0})


@pytest.fixture
def sample_xyz():
    return SAMPLE_DATA_DIR / "example.xyz"


@pytest.fixture
def sample_ply():
    return SAMPLE_DATA_DIR / "example.ply"


def random_connected_cloud(seed: int, n: int, k_graph: int = 8):
    """Random cloud in the unit cube whose k-NN graph is connected."""
    from manifold_geodesics.cloud_core import PointCloud
    from manifold_geodesics.sampling_graph import build_knn_graph, connected_components

    attempt = 0
    while True:
        gen = np.random.default_rng(seed * 1000 + attempt)
        cloud = PointCloud(gen.uniform(0.0, 1.0, size=(n, 3)))
        graph = build_knn_graph(cloud, k_graph)
        if connected_components(graph).max() == 0:
            return cloud, graph
        attempt += 1


@pytest.fixture(scope="session")
def connected_cloud():
    """Factory for random clouds with a connected k-NN graph."""
    return random_connected_cloud
