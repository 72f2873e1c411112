"""Triangle meshes, parametric furniture templates, and ASCII STL/OBJ I/O.

Template meshes are built from axis-aligned boxes in the object frame; the
box decomposition is kept alongside the triangles because collision checks
and ray casting are much cheaper on boxes than on raw triangles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SceneSpecError

_BOX_CORNERS = np.array([
    [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
    [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
], dtype=float)

# two triangles per face, outward winding
_BOX_FACES = np.array([
    [0, 2, 1], [0, 3, 2],  # bottom (-z)
    [4, 5, 6], [4, 6, 7],  # top (+z)
    [0, 1, 5], [0, 5, 4],  # -y
    [2, 3, 7], [2, 7, 6],  # +y
    [1, 2, 6], [1, 6, 5],  # +x
    [3, 0, 4], [3, 4, 7],  # -x
])


@dataclass
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray
    # axis-aligned (center, half-extent) pairs in the object frame, when known
    boxes: list = field(default_factory=list)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=int).reshape(-1, 3)

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def bounds(self):
        """(min corner, max corner) of the axis-aligned bounding box."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        t = self.triangles()
        return 0.5 * np.linalg.norm(np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)

    def is_watertight(self) -> bool:
        """Every edge shared by exactly two faces."""
        edges = np.vstack([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        edges = np.sort(edges, axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    def volume_and_com(self):
        """Signed volume and uniform-density center of mass (divergence theorem)."""
        t = self.triangles()
        v6 = np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2]))
        vol = v6.sum() / 6.0
        if abs(vol) < 1e-12:
            return 0.0, self.vertices.mean(axis=0)
        centroids = t.sum(axis=1) / 4.0  # tetra centroid with the origin as 4th vertex
        com = (v6[:, None] * centroids).sum(axis=0) / (6.0 * vol)
        return float(vol), com

    def transformed(self, pose) -> "TriMesh":
        return TriMesh(pose.apply(self.vertices), self.faces.copy(), list(self.boxes))

    def sample_surface(self, density=2500.0) -> np.ndarray:
        """Deterministic quasi-uniform surface samples (~density points / m^2)."""
        areas = self.face_areas()
        tris = self.triangles()
        out = []
        phi1, phi2 = 0.7548776662466927, 0.5698402909980532  # plastic-number sequence
        for tri, area in zip(tris, areas):
            n = max(1, int(np.ceil(area * density)))
            k = np.arange(n)
            u = (0.5 + phi1 * k) % 1.0
            v = (0.5 + phi2 * k) % 1.0
            flip = u + v > 1.0
            u[flip], v[flip] = 1.0 - u[flip], 1.0 - v[flip]
            out.append(tri[0] + u[:, None] * (tri[1] - tri[0]) + v[:, None] * (tri[2] - tri[0]))
        return np.vstack(out)


def box_mesh(size, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Axis-aligned box given full extents."""
    half = np.asarray(size, dtype=float) / 2.0
    c = np.asarray(center, dtype=float)
    verts = _BOX_CORNERS * half + c
    return TriMesh(verts, _BOX_FACES.copy(), boxes=[(c.copy(), half.copy())])


def merge_meshes(meshes) -> TriMesh:
    verts, faces, boxes = [], [], []
    off = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + off)
        boxes.extend(m.boxes)
        off += m.vertices.shape[0]
    return TriMesh(np.vstack(verts), np.vstack(faces), boxes=boxes)


def table_mesh(length=1.5, width=0.8, height=0.75, top_thickness=0.04, leg_size=0.06) -> TriMesh:
    """Table: top slab plus 4 corner legs; top surface at z = height."""
    top = box_mesh([length, width, top_thickness],
                   center=[0, 0, height - top_thickness / 2.0])
    parts = [top]
    lh = height - top_thickness
    inset_x = length / 2.0 - leg_size / 2.0 - 0.02
    inset_y = width / 2.0 - leg_size / 2.0 - 0.02
    for sx in (-1, 1):
        for sy in (-1, 1):
            parts.append(box_mesh([leg_size, leg_size, lh],
                                  center=[sx * inset_x, sy * inset_y, lh / 2.0]))
    return merge_meshes(parts)


def chair_mesh(width=0.45, depth=0.45, height=0.9, seat_height=0.45,
               slab=0.04, leg_size=0.045) -> TriMesh:
    """Chair: seat, back, and 4 legs; overall bounding box = (width, depth, height)."""
    seat = box_mesh([width, depth, slab], center=[0, 0, seat_height - slab / 2.0])
    back = box_mesh([width, slab, height - seat_height],
                    center=[0, -(depth - slab) / 2.0, seat_height + (height - seat_height) / 2.0])
    parts = [seat, back]
    lh = seat_height - slab
    inset_x = width / 2.0 - leg_size / 2.0
    inset_y = depth / 2.0 - leg_size / 2.0
    for sx in (-1, 1):
        for sy in (-1, 1):
            parts.append(box_mesh([leg_size, leg_size, lh],
                                  center=[sx * inset_x, sy * inset_y, lh / 2.0]))
    return merge_meshes(parts)


def plate_mesh(length=0.3, width=0.3, thickness=0.01, height=None) -> TriMesh:
    """Thin slab; top surface at z = height when given, else centered on z = thickness/2."""
    z = (height - thickness / 2.0) if height is not None else thickness / 2.0
    return box_mesh([length, width, thickness], center=[0, 0, z])


_TEMPLATES = {
    "table": table_mesh,
    "chair": chair_mesh,
    "box": lambda length, width, height: box_mesh([length, width, height],
                                                  center=[0, 0, height / 2.0]),
    "plate": plate_mesh,
}


def template_mesh(name: str, dims, **kwargs) -> TriMesh:
    """Instantiate a named parametric template with (length, width, height) dims."""
    if name not in _TEMPLATES:
        raise SceneSpecError(f"unknown object template {name!r}; "
                             f"known: {sorted(_TEMPLATES)}")
    length, width, height = (float(d) for d in dims)
    if name == "table":
        return table_mesh(length, width, height, **kwargs)
    if name == "chair":
        return chair_mesh(length, width, height, **kwargs)
    if name == "plate":
        return plate_mesh(length, width, height if "height" not in kwargs else height, **kwargs)
    return _TEMPLATES[name](length, width, height)


# ---------------------------------------------------------------------------
# ASCII mesh I/O


def save_stl(mesh: TriMesh, path, name="mesh"):
    tris = mesh.triangles()
    normals = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    lens = np.linalg.norm(normals, axis=1)
    normals = normals / np.where(lens > 0, lens, 1.0)[:, None]
    with open(path, "w") as f:
        f.write(f"solid {name}\n")
        for tri, n in zip(tris, normals):
            f.write(f"  facet normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}\n")
            f.write("    outer loop\n")
            for v in tri:
                f.write(f"      vertex {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
            f.write("    endloop\n")
            f.write("  endfacet\n")
        f.write(f"endsolid {name}\n")


def load_stl(path) -> TriMesh:
    verts = []
    with open(path) as f:
        for line in f:
            parts = line.split()
            if parts and parts[0] == "vertex":
                verts.append([float(x) for x in parts[1:4]])
    v = np.array(verts).reshape(-1, 3)
    # merge duplicated corners so the mesh is watertight again
    key = np.round(v / 1e-9).astype(np.int64)
    uniq, inverse = np.unique(key, axis=0, return_inverse=True)
    merged = np.zeros((uniq.shape[0], 3))
    merged[inverse] = v
    faces = inverse.reshape(-1, 3)
    return TriMesh(merged, faces)


def save_obj(mesh: TriMesh, path):
    with open(path, "w") as f:
        for v in mesh.vertices:
            f.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for face in mesh.faces:
            f.write(f"f {face[0] + 1} {face[1] + 1} {face[2] + 1}\n")


def load_obj(path) -> TriMesh:
    verts, faces = [], []
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append([idx[0], idx[k], idx[k + 1]])
    return TriMesh(np.array(verts), np.array(faces))


def load_mesh(path) -> TriMesh:
    p = str(path).lower()
    if p.endswith(".stl"):
        return load_stl(path)
    if p.endswith(".obj"):
        return load_obj(path)
    raise SceneSpecError(f"unsupported mesh format: {path}")
