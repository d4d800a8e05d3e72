from pathlib import Path

import numpy as np
import pytest

from lcfrisk import fixtures as fx
from lcfrisk import reliability as rel
from lcfrisk.mesh_io import build_quadrature, extract_surface

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def bracket():
    """Notched bracket with both life fields (plain and notch-supported)."""
    mesh = fx.notched_bracket()
    material = fx.demo_material()
    quad = build_quadrature(mesh, extract_surface(mesh))
    fields = rel.surface_fields(mesh, quad, material)
    plain = rel.life_field(quad, fields, material, notch_support=False)
    notched = rel.life_field(quad, fields, material, notch_support=True)
    return dict(mesh=mesh, material=material, quad=quad, fields=fields, plain=plain, notched=notched)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
