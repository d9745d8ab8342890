#!/usr/bin/env python3
"""
Pytest configuration and shared fixtures for icenav tests
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from app.core.geometry import ConvexPolygon, ShipFootprint  # noqa: E402
from app.models.profiles import desk_profile, load_profile  # noqa: E402
from app.planners.costmap import Costmap, channel_grid  # noqa: E402
from app.simulation.icefield import IceField, IceFloe  # noqa: E402


def square(cx: float, cy: float, half: float) -> ConvexPolygon:
    return ConvexPolygon(np.array([
        [cx - half, cy - half], [cx + half, cy - half], [cx + half, cy + half], [cx - half, cy + half],
    ]))


def make_field(polygons, length: float = 200.0, width: float = 60.0, seed: int = 7) -> IceField:
    floes = tuple(IceFloe(id=i, polygon=p, thickness=1.2, density=900.0) for i, p in enumerate(polygons))
    return IceField(length, width, floes, seed)


@pytest.fixture
def desk_config():
    """Desk profile experiment config"""
    return desk_profile()


@pytest.fixture
def small_config():
    """Desk profile in a 200 × 60 m channel with a short horizon and kernel"""
    return load_profile("desk", {
        "channel": {"length": 200.0, "width": 60.0},
        "costmap": {"kernel_size": 11},
        "nav": {"horizon": 120.0},
        "optimizer": {"max_iter": 20},
    })


@pytest.fixture
def small_footprint():
    return ShipFootprint.default(20.0, 6.0, 4.0)


@pytest.fixture
def open_field():
    """Channel without ice"""
    return make_field([])


@pytest.fixture
def small_field():
    """A handful of square floes across a 200 × 60 m channel"""
    return make_field([
        square(60.0, 30.0, 4.0),
        square(90.0, 18.0, 3.0),
        square(120.0, 40.0, 5.0),
        square(150.0, 28.0, 3.5),
    ])


@pytest.fixture
def open_costmap(open_field):
    """All-zero costmap over the open channel at 1 m resolution"""
    return Costmap.empty(channel_grid(open_field, 1.0))


def pytest_configure(config):
    """Configure pytest with custom markers"""
    config.addinivalue_line(
        "markers", "integration: mark test as an end-to-end run across several modules"
    )
    config.addinivalue_line(
        "markers", "unit: mark test as unit test (default)"
    )
    config.addinivalue_line(
        "markers", "slow: mark test as slow running"
    )


def pytest_collection_modifyitems(config, items):
    """Modify test collection to add markers"""
    for item in items:
        # Add unit marker to all tests by default
        if not any(mark.name in ['integration', 'slow'] for mark in item.iter_markers()):
            item.add_marker(pytest.mark.unit)
