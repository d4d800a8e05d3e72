"""Tetrahedral mesh input, boundary extraction and surface quadrature.

Meshes are read from a strict JSON schema (mm, MPa, degC) and carry nodal
stress tensors and temperatures. Elements are linear (tet4) or quadratic
(tet10, VTK node ordering) tetrahedra. Local coordinates are the three
reference coordinates ``(xi, eta, zeta)``; the fourth barycentric coordinate
is ``1 - xi - eta - zeta``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "MeshError",
    "MeshModel",
    "SurfaceFace",
    "SurfaceQuadrature",
    "TRIANGLE_RULES",
    "load_mesh",
    "mesh_from_dict",
    "mesh_to_dict",
    "extract_surface",
    "build_quadrature",
    "shape_functions",
    "shape_derivatives",
    "interpolate",
    "gradient",
    "jacobian",
]

NODES_PER_TYPE = {"tet4": 4, "tet10": 10}

# Reference-space vertex positions of the parent tetrahedron.
REF_VERTICES = np.array(
    [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
)

# tet10 mid-edge nodes 4..9 (VTK quadratic tetra ordering).
TET10_EDGES = ((0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3))

# Local face f is the face opposite vertex f.
FACE_VERTICES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))

_BARY_TOL = 1e-12


class MeshError(ValueError):
    """Raised for malformed mesh files and invariant violations."""


def _dunavant5():
    a1 = (6.0 - math.sqrt(15.0)) / 21.0
    a2 = (6.0 + math.sqrt(15.0)) / 21.0
    w1 = (155.0 - math.sqrt(15.0)) / 1200.0
    w2 = (155.0 + math.sqrt(15.0)) / 1200.0
    pts = [
        (1.0 / 3.0, 1.0 / 3.0),
        (a1, a1), (1.0 - 2.0 * a1, a1), (a1, 1.0 - 2.0 * a1),
        (a2, a2), (1.0 - 2.0 * a2, a2), (a2, 1.0 - 2.0 * a2),
    ]
    wts = [9.0 / 40.0, w1, w1, w1, w2, w2, w2]
    return np.array(pts), 0.5 * np.array(wts)


def _strang_fix3():
    a, b, c = 0.659027622374092, 0.231933368553031, 0.109039009072877
    pts = [(a, b), (a, c), (b, a), (b, c), (c, a), (c, b)]
    return np.array(pts), np.full(6, 0.5 / 6.0)


# rule id (polynomial degree) -> (points on the unit right triangle, weights)
TRIANGLE_RULES = {3: _strang_fix3(), 5: _dunavant5()}


@dataclass(frozen=True)
class SurfaceFace:
    elem: int
    face: int


@dataclass(frozen=True)
class MeshModel:
    """Immutable tetrahedral mesh with nodal fields.

    ``coords``, ``stress`` and ``temperature`` are indexed by the internal
    node index; ``node_ids`` maps back to the ids used in the file.
    ``conn`` holds internal node indices per element.
    """

    node_ids: np.ndarray
    coords: np.ndarray
    elem_type: str
    conn: np.ndarray
    stress: np.ndarray
    temperature: np.ndarray
    surface: tuple[SurfaceFace, ...] | None = None
    units: tuple[tuple[str, str], ...] = (("length", "mm"), ("stress", "MPa"), ("temperature", "C"))

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_elements(self) -> int:
        return len(self.conn)

    def element_coords(self, elem: int) -> np.ndarray:
        return self.coords[self.conn[elem]]

    def element_centroid(self, elem: int) -> np.ndarray:
        return self.coords[self.conn[elem][:4]].mean(axis=0)

    def scaled(self, s: float) -> "MeshModel":
        """Copy with all coordinates multiplied by ``s``."""
        return MeshModel(self.node_ids, self.coords * s, self.elem_type, self.conn,
                         self.stress, self.temperature, self.surface, self.units)

    def with_stress(self, stress: np.ndarray) -> "MeshModel":
        return MeshModel(self.node_ids, self.coords, self.elem_type, self.conn,
                         np.asarray(stress, dtype=float), self.temperature, self.surface, self.units)

    def with_surface(self, faces) -> "MeshModel":
        return MeshModel(self.node_ids, self.coords, self.elem_type, self.conn,
                         self.stress, self.temperature, tuple(faces), self.units)


# --------------------------------------------------------------------------
# shape functions


def shape_functions(elem_type: str, local) -> np.ndarray:
    xi, eta, zeta = (float(v) for v in local)
    L = (1.0 - xi - eta - zeta, xi, eta, zeta)
    if elem_type == "tet4":
        return np.array(L)
    if elem_type == "tet10":
        vert = [Li * (2.0 * Li - 1.0) for Li in L]
        edge = [4.0 * L[i] * L[j] for i, j in TET10_EDGES]
        return np.array(vert + edge)
    raise MeshError(f"unsupported element type {elem_type!r}")


def shape_derivatives(elem_type: str, local) -> np.ndarray:
    """Derivatives dN_a/d(xi, eta, zeta), shape (n_nodes, 3)."""
    xi, eta, zeta = (float(v) for v in local)
    L = (1.0 - xi - eta - zeta, xi, eta, zeta)
    # dL_i / d(xi, eta, zeta)
    dL = np.array([[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    if elem_type == "tet4":
        return dL.copy()
    if elem_type == "tet10":
        out = np.empty((10, 3))
        for i in range(4):
            out[i] = (4.0 * L[i] - 1.0) * dL[i]
        for e, (i, j) in enumerate(TET10_EDGES):
            out[4 + e] = 4.0 * (L[i] * dL[j] + L[j] * dL[i])
        return out
    raise MeshError(f"unsupported element type {elem_type!r}")


def _check_local(local) -> np.ndarray:
    local = np.asarray(local, dtype=float)
    if local.shape != (3,):
        raise MeshError(f"local coordinates must have 3 components, got shape {local.shape}")
    bary = np.array([1.0 - local.sum(), *local])
    if np.any(bary < -_BARY_TOL) or np.any(bary > 1.0 + _BARY_TOL):
        raise MeshError(f"local coordinates {local.tolist()} outside the reference tetrahedron")
    return local


def jacobian(mesh: MeshModel, elem: int, local) -> np.ndarray:
    """J[i, j] = dx_i / dxi_j."""
    dN = shape_derivatives(mesh.elem_type, local)
    return mesh.element_coords(elem).T @ dN


def interpolate(mesh: MeshModel, elem: int, local, nodal_values) -> np.ndarray | float:
    """Isoparametric interpolation of per-node values (scalars or tensors).

    ``nodal_values`` is indexed by internal node index along axis 0.
    """
    local = _check_local(local)
    N = shape_functions(mesh.elem_type, local)
    vals = np.asarray(nodal_values, dtype=float)[mesh.conn[elem]]
    out = np.tensordot(N, vals, axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


def gradient(mesh: MeshModel, elem: int, local, nodal_values) -> np.ndarray:
    """Global gradient of an interpolated scalar field."""
    local = _check_local(local)
    dN = shape_derivatives(mesh.elem_type, local)
    J = mesh.element_coords(elem).T @ dN
    det = np.linalg.det(J)
    scale = np.abs(J).max()
    if not np.isfinite(det) or abs(det) <= 1e-14 * scale**3:
        raise MeshError(f"singular Jacobian in element {elem} at {local.tolist()}")
    vals = np.asarray(nodal_values, dtype=float)[mesh.conn[elem]]
    # grad = J^{-T} (dN^T v)
    return np.linalg.solve(J.T, dN.T @ vals)


# --------------------------------------------------------------------------
# loading


_TOP_KEYS = {"units", "nodes", "elements", "fields", "surface"}
_EXPECTED_UNITS = {"length": "mm", "stress": "MPa", "temperature": "C"}


def load_mesh(path) -> MeshModel:
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeshError(f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return mesh_from_dict(data)
    except MeshError as exc:
        raise MeshError(f"{path}: {exc}") from exc


def mesh_from_dict(data: dict) -> MeshModel:
    """Build and validate a mesh from the parsed JSON document."""
    if not isinstance(data, dict):
        raise MeshError("top level must be an object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise MeshError(f"unknown top-level keys: {sorted(unknown)}")
    for key in ("units", "nodes", "elements", "fields"):
        if key not in data:
            raise MeshError(f"missing field {key!r}")

    units = data["units"]
    if not isinstance(units, dict) or set(units) != set(_EXPECTED_UNITS):
        raise MeshError(f"'units' must have exactly the keys {sorted(_EXPECTED_UNITS)}")
    for k, v in _EXPECTED_UNITS.items():
        if units[k] != v:
            raise MeshError(f"units.{k} must be {v!r}, got {units[k]!r}")

    nodes = data["nodes"]
    if not nodes:
        raise MeshError("'nodes' is empty")
    node_ids, coords = [], []
    for i, row in enumerate(nodes):
        if not isinstance(row, (list, tuple)) or len(row) != 4:
            raise MeshError(f"nodes[{i}]: expected [id, x, y, z]")
        node_ids.append(int(row[0]))
        coords.append([float(c) for c in row[1:]])
    index = {nid: i for i, nid in enumerate(node_ids)}
    if len(index) != len(node_ids):
        raise MeshError("duplicate node ids")

    elements = data["elements"]
    if not elements:
        raise MeshError("'elements' is empty")
    types = set()
    conn = []
    for e, el in enumerate(elements):
        if not isinstance(el, dict) or set(el) - {"type", "conn"} or "type" not in el or "conn" not in el:
            raise MeshError(f"elements[{e}]: expected object with keys 'type' and 'conn'")
        etype = el["type"]
        if etype not in NODES_PER_TYPE:
            raise MeshError(f"elements[{e}]: unsupported element type {etype!r} (tet4/tet10 only)")
        types.add(etype)
        ids = [int(v) for v in el["conn"]]
        if len(ids) != NODES_PER_TYPE[etype]:
            raise MeshError(f"elements[{e}]: {etype} needs {NODES_PER_TYPE[etype]} nodes, got {len(ids)}")
        if len(set(ids)) != len(ids):
            raise MeshError(f"elements[{e}]: repeated node ids {ids}")
        for nid in ids:
            if nid not in index:
                raise MeshError(f"elements[{e}] references node id {nid} which does not exist")
        conn.append([index[nid] for nid in ids])
    if len(types) > 1:
        raise MeshError(f"mixed element types {sorted(types)} are not supported")

    fields = data["fields"]
    if not isinstance(fields, dict):
        raise MeshError("'fields' must be an object")
    if set(fields) - {"stress", "temperature"}:
        raise MeshError(f"unknown field keys: {sorted(set(fields) - {'stress', 'temperature'})}")
    for key in ("stress", "temperature"):
        if key not in fields:
            raise MeshError(f"missing field 'fields.{key}'")
    stress = np.asarray(fields["stress"], dtype=float)
    temperature = np.asarray(fields["temperature"], dtype=float)
    if stress.shape != (len(node_ids), 6):
        raise MeshError(f"fields.stress must have shape ({len(node_ids)}, 6), got {stress.shape}")
    if temperature.shape != (len(node_ids),):
        raise MeshError(f"fields.temperature must have {len(node_ids)} entries, got {temperature.shape}")

    surface = None
    if "surface" in data:
        surface = []
        for i, f in enumerate(data["surface"]):
            if not isinstance(f, dict) or set(f) != {"elem", "face"}:
                raise MeshError(f"surface[{i}]: expected object with keys 'elem' and 'face'")
            elem, face = int(f["elem"]), int(f["face"])
            if not 0 <= elem < len(conn):
                raise MeshError(f"surface[{i}]: element {elem} does not exist")
            if not 0 <= face <= 3:
                raise MeshError(f"surface[{i}]: face index {face} not in 0..3")
            surface.append(SurfaceFace(elem, face))
        surface = tuple(surface)

    mesh = MeshModel(
        node_ids=np.array(node_ids, dtype=np.int64),
        coords=np.array(coords, dtype=float),
        elem_type=types.pop(),
        conn=np.array(conn, dtype=np.int64),
        stress=stress,
        temperature=temperature,
        surface=surface,
    )
    _validate_jacobians(mesh)
    return mesh


def _validate_jacobians(mesh: MeshModel) -> None:
    centroid = np.full(3, 0.25)
    for e in range(mesh.n_elements):
        det = np.linalg.det(jacobian(mesh, e, centroid))
        if not det > 0.0:
            raise MeshError(f"element {e} has non-positive Jacobian determinant {det:.6g} at its centroid")


def mesh_to_dict(mesh: MeshModel) -> dict:
    ids = mesh.node_ids
    out = {
        "units": dict(_EXPECTED_UNITS),
        "nodes": [[int(i), *map(float, x)] for i, x in zip(ids, mesh.coords)],
        "elements": [{"type": mesh.elem_type, "conn": [int(ids[n]) for n in c]} for c in mesh.conn],
        "fields": {
            "stress": mesh.stress.tolist(),
            "temperature": mesh.temperature.tolist(),
        },
    }
    if mesh.surface is not None:
        out["surface"] = [{"elem": f.elem, "face": f.face} for f in mesh.surface]
    return out


# --------------------------------------------------------------------------
# surface


def extract_surface(mesh: MeshModel) -> list[SurfaceFace]:
    """Boundary faces, sorted by (element, local face).

    An explicit surface list on the mesh takes precedence; otherwise every
    face owned by exactly one element is returned.
    """
    if mesh.surface is not None:
        return list(mesh.surface)
    owners: dict[tuple[int, ...], list[SurfaceFace]] = {}
    for e, c in enumerate(mesh.conn):
        for f, verts in enumerate(FACE_VERTICES):
            key = tuple(sorted(int(c[v]) for v in verts))
            owners.setdefault(key, []).append(SurfaceFace(e, f))
    faces = [own[0] for own in owners.values() if len(own) == 1]
    return sorted(faces, key=lambda sf: (sf.elem, sf.face))


def shared_faces(mesh: MeshModel) -> list[tuple[SurfaceFace, SurfaceFace]]:
    """Pairs of element faces shared between two elements."""
    owners: dict[tuple[int, ...], list[SurfaceFace]] = {}
    for e, c in enumerate(mesh.conn):
        for f, verts in enumerate(FACE_VERTICES):
            key = tuple(sorted(int(c[v]) for v in verts))
            owners.setdefault(key, []).append(SurfaceFace(e, f))
    return [tuple(own) for own in owners.values() if len(own) == 2]


@dataclass(frozen=True)
class SurfaceQuadrature:
    """Integration points on the boundary, in (face, point) order."""

    position: np.ndarray   # (n, 3)
    elem: np.ndarray       # (n,)
    face: np.ndarray       # (n,) index into ``faces``
    qpoint: np.ndarray     # (n,) point index within its face
    local: np.ndarray      # (n, 3) parent-element local coordinates
    weight: np.ndarray     # (n,) mm^2
    normal: np.ndarray     # (n, 3) inward unit normal
    faces: tuple[SurfaceFace, ...]
    rule: int

    def __len__(self) -> int:
        return len(self.weight)

    def face_areas(self) -> np.ndarray:
        return np.array([math.fsum(self.weight[self.face == i]) for i in range(len(self.faces))])

    def total_area(self) -> float:
        return math.fsum(self.weight)

    def subset(self, mask) -> "SurfaceQuadrature":
        mask = np.asarray(mask)
        return SurfaceQuadrature(self.position[mask], self.elem[mask], self.face[mask], self.qpoint[mask],
                                 self.local[mask], self.weight[mask], self.normal[mask], self.faces, self.rule)


def build_quadrature(mesh: MeshModel, faces, rule: int = 5) -> SurfaceQuadrature:
    """Map a triangle rule onto every boundary face.

    Face points are placed in the parent element's reference space (faces
    are flat there), so the geometry map of the parent supplies both the
    global position and the surface metric for straight and curved faces.
    """
    if rule not in TRIANGLE_RULES:
        raise MeshError(f"unsupported quadrature rule {rule!r}; choose from {sorted(TRIANGLE_RULES)}")
    tri_pts, tri_w = TRIANGLE_RULES[rule]
    faces = tuple(faces)
    pos, elem, face_idx, qidx, loc, wts, nrm = [], [], [], [], [], [], []
    for fi, sf in enumerate(faces):
        a, b, c = (REF_VERTICES[v] for v in FACE_VERTICES[sf.face])
        X = mesh.element_coords(sf.elem)
        centroid = mesh.element_centroid(sf.elem)
        face_centroid = X[list(FACE_VERTICES[sf.face])].mean(axis=0)
        inward = centroid - face_centroid
        for q, ((r, s), w) in enumerate(zip(tri_pts, tri_w)):
            xl = a + r * (b - a) + s * (c - a)
            N = shape_functions(mesh.elem_type, xl)
            dN = shape_derivatives(mesh.elem_type, xl)
            J = X.T @ dN
            cross = np.cross(J @ (b - a), J @ (c - a))
            area = float(np.linalg.norm(cross))
            if not area > 0.0:
                raise MeshError(f"degenerate face {fi} (element {sf.elem}, local face {sf.face}) has zero area")
            n = cross / area
            if n @ inward < 0.0:
                n = -n
            pos.append(N @ X)
            elem.append(sf.elem)
            face_idx.append(fi)
            qidx.append(q)
            loc.append(xl)
            wts.append(w * area)
            nrm.append(n)
    if not faces:
        raise MeshError("no surface faces to integrate over")
    return SurfaceQuadrature(
        position=np.array(pos), elem=np.array(elem, dtype=np.int64), face=np.array(face_idx, dtype=np.int64),
        qpoint=np.array(qidx, dtype=np.int64), local=np.array(loc), weight=np.array(wts),
        normal=np.array(nrm), faces=faces, rule=rule,
    )
