"""Synthetic meshes with analytically controlled fields.

These back the test suite, the acceptance checks and the example runs in
``scripts/``. All geometry is in mm, stress in MPa, temperature in degC.
"""
from __future__ import annotations

import itertools

import numpy as np

from .mesh_io import FACE_VERTICES, TET10_EDGES, MeshModel, SurfaceFace, jacobian
from .strain_life import MaterialParams


def _orient(coords, tets):
    out = []
    for t in tets:
        x = coords[list(t)]
        if np.linalg.det((x[1:] - x[0]).T) < 0:
            t = (t[0], t[2], t[1], t[3])
        out.append(tuple(t))
    return out


def _uniaxial(values):
    s = np.zeros((len(values), 6))
    s[:, 0] = values
    return s


def make_mesh(coords, tets, stress=None, temperature=None, surface=None, ids=None) -> MeshModel:
    coords = np.asarray(coords, dtype=float)
    n = len(coords)
    if stress is None:
        stress = np.zeros((n, 6))
    if temperature is None:
        temperature = np.zeros(n)
    if ids is None:
        ids = np.arange(1, n + 1)
    return MeshModel(
        node_ids=np.asarray(ids, dtype=np.int64), coords=coords,
        elem_type="tet4" if len(tets[0]) == 4 else "tet10", conn=np.asarray(tets, dtype=np.int64),
        stress=np.asarray(stress, dtype=float), temperature=np.asarray(temperature, dtype=float),
        surface=None if surface is None else tuple(surface),
    )


def single_tet(sigma: float = 100.0) -> MeshModel:
    coords = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    return make_mesh(coords, [(0, 1, 2, 3)], _uniaxial(np.full(4, sigma)), np.full(4, 20.0))


def two_tets() -> MeshModel:
    coords = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]]
    tets = _orient(np.asarray(coords, float), [(0, 1, 2, 3), (1, 2, 3, 4)])
    return make_mesh(coords, tets, _uniaxial(np.full(5, 100.0)), np.full(5, 20.0))


def unit_cube(sigma: float = 500.0, temperature: float = 850.0) -> MeshModel:
    """Unit cube split into 12 tets around its centre node."""
    corners = list(itertools.product((0.0, 1.0), repeat=3))
    coords = np.array(corners + [(0.5, 0.5, 0.5)])
    idx = {c: i for i, c in enumerate(corners)}
    tets = []
    for axis in range(3):
        for side in (0.0, 1.0):
            quad = [c for c in corners if c[axis] == side]
            # order the 4 face corners cyclically
            others = [a for a in range(3) if a != axis]
            quad.sort(key=lambda c: np.arctan2(c[others[1]] - 0.5, c[others[0]] - 0.5))
            q = [idx[c] for c in quad]
            tets.append((q[0], q[1], q[2], 8))
            tets.append((q[0], q[2], q[3], 8))
    tets = _orient(coords, tets)
    n = len(coords)
    return make_mesh(coords, tets, _uniaxial(np.full(n, sigma)), np.full(n, temperature))


def box_mesh(xs, ys, zs) -> tuple[np.ndarray, list]:
    """Structured tet4 mesh of a box; every hex split into six tets."""
    xs, ys, zs = (np.asarray(v, float) for v in (xs, ys, zs))
    nx, ny, nz = len(xs), len(ys), len(zs)
    coords = np.array([[x, y, z] for x in xs for y in ys for z in zs])

    def nid(i, j, k):
        return (i * ny + j) * nz + k

    tets = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            for k in range(nz - 1):
                v = [nid(i + a, j + b, k + c) for a, b, c in itertools.product((0, 1), repeat=3)]
                # Kuhn split along the main diagonal v0 -> v7
                for path in itertools.permutations(range(3)):
                    corner = [0, 0, 0]
                    chain = [v[0]]
                    for ax in path:
                        corner[ax] = 1
                        chain.append(v[corner[0] * 4 + corner[1] * 2 + corner[2]])
                    tets.append(tuple(chain))
    return coords, _orient(coords, tets)


def to_tet10(coords, tets, curve=None):
    """Promote tet4 connectivity to tet10 by adding mid-edge nodes.

    ``curve`` may map a mid-edge position to a displaced position.
    """
    coords = [np.asarray(c, float) for c in coords]
    edge_node = {}
    out = []
    for t in tets:
        mids = []
        for i, j in TET10_EDGES:
            key = tuple(sorted((t[i], t[j])))
            if key not in edge_node:
                p = 0.5 * (coords[t[i]] + coords[t[j]])
                if curve is not None:
                    p = curve(p)
                edge_node[key] = len(coords)
                coords.append(p)
            mids.append(edge_node[key])
        out.append(tuple(t) + tuple(mids))
    return np.array(coords), out


def linear_decay_slab(L: float = 2.0, sigma0: float = 400.0, increasing: bool = False,
                      elem_type: str = "tet4", n: int = 3) -> MeshModel:
    """Slab [0,1]^3 with sigma_xx = sigma0 * (1 -/+ x/L); surface = face x = 0.

    The temperature field follows the same profile scaled to 900 degC.
    """
    grid = np.linspace(0.0, 1.0, n + 1)
    coords, tets = box_mesh(grid, grid, grid)
    if elem_type == "tet10":
        coords, tets = to_tet10(coords, tets)
    x = coords[:, 0]
    sgn = 1.0 if increasing else -1.0
    profile = 1.0 + sgn * x / L
    mesh = make_mesh(coords, tets, _uniaxial(sigma0 * profile), 900.0 * profile)
    return mesh.with_surface(faces_on_plane(mesh, axis=0, value=0.0))


def faces_on_plane(mesh: MeshModel, axis: int, value: float, tol: float = 1e-12) -> list[SurfaceFace]:
    out = []
    for e, c in enumerate(mesh.conn):
        for f, verts in enumerate(FACE_VERTICES):
            if np.all(np.abs(mesh.coords[c[list(verts)], axis] - value) <= tol):
                out.append(SurfaceFace(e, f))
    return out


def two_tet10(bulge: float = 0.0) -> MeshModel:
    """Two tet10 elements sharing one face.

    ``bulge`` pushes the mid-edge nodes of the outer face x+y+z=... opposite
    the origin outward, giving a curved boundary face.
    """
    coords = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [-1, 0, 0]], float)
    tets = _orient(coords, [(0, 1, 2, 3), (0, 2, 4, 3)])
    outer = {1, 2, 3}

    coords10, tets10 = to_tet10(coords, tets)
    if bulge:
        # mid-edge nodes of the slanted face (1,2,3) move along (1,1,1)
        n = np.ones(3) / np.sqrt(3.0)
        for t in tets10:
            for e, (i, j) in enumerate(TET10_EDGES):
                if {t[i], t[j]} <= outer:
                    mid = t[4 + e]
                    coords10[mid] = 0.5 * (coords[t[i]] + coords[t[j]]) + bulge * n
    x = coords10[:, 0]
    stress = _uniaxial(300.0 + 50.0 * x)
    return make_mesh(coords10, tets10, stress, np.full(len(coords10), 850.0))


# --------------------------------------------------------------------------
# notched bracket: two stress spots on the face z = 0 with controlled depth decay

BRACKET_SPOTS = {
    # name: (x, y, radius, peak MPa, decay length mm)
    "spot1": (2.5, 2.0, 1.2, 430.0, 4.0),
    "spot2": (5.5, 2.0, 0.6, 470.0, 0.25),
}
BRACKET_BASE = 180.0


def bracket_stress(p) -> np.ndarray:
    x, y, z = np.asarray(p, float).T
    s = np.full(np.shape(x), BRACKET_BASE)
    for x0, y0, r, peak, ell in BRACKET_SPOTS.values():
        s = s + peak * np.exp(-((x - x0) ** 2 + (y - y0) ** 2) / r**2) * np.exp(-z / ell)
    return s


def notched_bracket(elem_type: str = "tet4") -> MeshModel:
    """Block 8 x 4 x 2 mm whose critical surface is the face z = 0.

    Spot 1 is broad with a shallow depth decay (low chi), spot 2 is small
    with a steep decay (high chi) and a slightly higher peak stress.
    """
    xs = np.linspace(0.0, 8.0, 33)
    ys = np.linspace(0.0, 4.0, 17)
    zs = np.array([0.0, 0.05, 0.1, 0.2, 0.35, 0.6, 1.0, 2.0])
    coords, tets = box_mesh(xs, ys, zs)
    if elem_type == "tet10":
        coords, tets = to_tet10(coords, tets)
    stress = _uniaxial(bracket_stress(coords))
    temperature = 850.0 - 15.0 * coords[:, 2] + 10.0 * coords[:, 0] / 8.0
    mesh = make_mesh(coords, tets, stress, temperature)
    return mesh.with_surface(faces_on_plane(mesh, axis=2, value=0.0))


def spot_mask(position, name: str, scale: float = 1.0) -> np.ndarray:
    x0, y0, r, _, _ = BRACKET_SPOTS[name]
    d2 = (position[:, 0] - x0) ** 2 + (position[:, 1] - y0) ** 2
    return d2 <= (scale * r) ** 2


def demo_material(**overrides) -> MaterialParams:
    """Temperature-tabulated nickel-alloy-like parameter set (synthetic)."""
    kw = dict(
        temperatures=(800.0, 900.0),
        sigma_f=(2100.0, 1900.0), b=(-0.1, -0.1), eps_f=(0.55, 0.45), c=(-0.6, -0.6),
        E=(160000.0, 150000.0), A=0.5, k=0.6, m=3.0,
    )
    kw.update(overrides)
    return MaterialParams(**kw)


def check_positive(mesh: MeshModel) -> bool:
    return all(np.linalg.det(jacobian(mesh, e, np.full(3, 0.25))) > 0 for e in range(mesh.n_elements))


# --------------------------------------------------------------------------
# synthetic calibration study: smooth and notched specimens at 850 degC

STUDY_T = 850.0
STUDY_THETA0 = (1500.0, -0.08, 0.5, -0.6, 0.3, 0.7, 2.0)
STUDY_LEVELS = {"smooth": (0.003, 0.012), "notch": (0.002, 0.007)}


def study_material(**overrides) -> MaterialParams:
    kw = dict(sigma_f=1800.0, b=-0.09, eps_f=0.35, c=-0.65, E=150000.0, A=0.4, k=0.8, m=3.0)
    kw.update(overrides)
    return MaterialParams(**kw)


def study_profiles() -> dict:
    from .calibration import SpecimenProfile

    return {
        "smooth": SpecimenProfile.uniform("smooth", 100.0),
        "notch": SpecimenProfile.tabulated(
            "notch", [[2.0, 1.8, 2.0], [3.0, 1.6, 1.6], [5.0, 1.4, 1.2], [10.0, 1.2, 0.8]]),
    }


def study_design(levels: int = 5, replicates: int = 10) -> list:
    """(profile id, nominal strain) pairs: ``levels`` x ``replicates`` per profile."""
    out = []
    for pid, (lo, hi) in STUDY_LEVELS.items():
        out += [(pid, float(e)) for e in np.geomspace(lo, hi, levels) for _ in range(replicates)]
    return out


def study_grids(n: int = 25) -> dict:
    return {pid: np.geomspace(lo, hi, n) for pid, (lo, hi) in STUDY_LEVELS.items()}
