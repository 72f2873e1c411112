"""Synthetic scenes, virtual depth cameras, multi-view fusion, and collision queries.

Rendering is plain ray casting against the objects' box decompositions (or
triangles for loaded meshes), with per-pixel ground-truth object labels
standing in for a learned segmenter: the (views -> masked cloud) contract is
the same, so a real one can be dropped in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import collision, meshes
from .errors import EmptyCloudError, SceneSpecError
from .geometry import Pose

GRAVITY = 9.81


@dataclass(frozen=True)
class SceneObject:
    id: str
    mesh: meshes.TriMesh
    pose: Pose
    label: str
    mass: float = 1.0
    friction: float = 0.5

    def __post_init__(self):
        if self.friction <= 0:
            raise SceneSpecError(f"object {self.id}: friction must be positive")

    def world_boxes(self):
        return collision.boxes_from_mesh(self.mesh, self.pose)

    def com_world(self) -> np.ndarray:
        _, com = self.mesh.volume_and_com()
        return self.pose.apply(com)


class Scene:
    """Immutable collection of posed objects above a floor plane."""

    def __init__(self, objects, floor_z=0.0):
        ids = [o.id for o in objects]
        if len(set(ids)) != len(ids):
            raise SceneSpecError("object ids must be unique")
        self.objects = tuple(objects)
        self.floor_z = float(floor_z)
        self._surface_cache = {}

    def object_by_id(self, oid) -> SceneObject:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)

    def indices_with_label(self, label):
        return [i for i, o in enumerate(self.objects) if o.label == label]

    def surface_points(self, index, density=2500.0) -> np.ndarray:
        """World-frame sampled surface of one object (cached)."""
        key = (index, density)
        if key not in self._surface_cache:
            obj = self.objects[index]
            self._surface_cache[key] = obj.pose.apply(obj.mesh.sample_surface(density))
        return self._surface_cache[key]

    def all_surface_points(self, exclude=(), density=2500.0) -> np.ndarray:
        parts = [self.surface_points(i, density)
                 for i in range(len(self.objects)) if i not in exclude]
        return np.vstack(parts) if parts else np.zeros((0, 3))


def _pose_from_spec(p) -> Pose:
    xyz = p.get("xyz", [0, 0, 0])
    if "quat" in p:
        from .geometry import rotation_from_quat
        return Pose(rotation_from_quat(p["quat"]), xyz)
    rpy = p.get("rpy", [0, 0, 0])
    return Pose.from_xyzrpy(*xyz, *rpy)


def generate_scene(spec: dict, seed=0) -> Scene:
    """Build a Scene from a JSON-style description (schema in the README).

    Deterministic given (spec, seed); the seed is reserved for optional
    randomized placements and depth noise downstream.
    """
    objs = []
    for entry in spec.get("objects", []):
        try:
            template = entry["template"]
            dims = entry["dims"]
        except KeyError as e:
            raise SceneSpecError(f"object entry missing key {e}") from e
        mesh = meshes.template_mesh(template, dims, **entry.get("params", {}))
        objs.append(SceneObject(
            id=entry.get("id", f"obj{len(objs)}"),
            mesh=mesh,
            pose=_pose_from_spec(entry.get("pose", {})),
            label=entry.get("label", template),
            mass=float(entry.get("mass", 1.0)),
            friction=float(entry.get("friction", 0.5)),
        ))
    return Scene(objs, floor_z=float(spec.get("floor_z", 0.0)))


# ---------------------------------------------------------------------------
# Cameras and rendering


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if min(self.fx, self.fy) <= 0 or min(self.width, self.height) <= 0:
            raise ValueError("intrinsics must be positive")

    @staticmethod
    def from_fov(width, height, fov_deg=60.0) -> "Intrinsics":
        f = width / (2.0 * np.tan(np.radians(fov_deg) / 2.0))
        return Intrinsics(f, f, width / 2.0, height / 2.0, width, height)


@dataclass
class CameraView:
    """Rendered depth + per-pixel object labels from one camera.

    pose maps camera coordinates (x right, y down, z forward) to world.
    labels holds indices into object_labels, -1 where no hit.
    """

    pose: Pose
    intrinsics: Intrinsics
    depth: np.ndarray
    labels: np.ndarray
    object_labels: tuple

    def pixel_rays(self):
        """Unnormalized camera-frame directions with unit z (depth = ray scale)."""
        K = self.intrinsics
        u = (np.arange(K.width) + 0.5 - K.cx) / K.fx
        v = (np.arange(K.height) + 0.5 - K.cy) / K.fy
        uu, vv = np.meshgrid(u, v)
        return np.stack([uu, vv, np.ones_like(uu)], axis=-1)

    def project(self, points_world: np.ndarray):
        """(u, v) pixel coordinates and camera-frame depth of world points."""
        local = (np.atleast_2d(points_world) - self.pose.translation) @ self.pose.rotation
        z = local[:, 2]
        K = self.intrinsics
        u = local[:, 0] / z * K.fx + K.cx
        v = local[:, 1] / z * K.fy + K.cy
        return u, v, z


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> Pose:
    """Camera pose at eye looking toward target (OpenCV axes: y down, z forward)."""
    eye = np.asarray(eye, dtype=float)
    z = np.asarray(target, dtype=float) - eye
    z = z / np.linalg.norm(z)
    up = np.asarray(up, dtype=float)
    if abs(z @ up) > 0.999:
        up = np.array([1.0, 0.0, 0.0])
    y = -(up - (up @ z) * z)
    y /= np.linalg.norm(y)
    x = np.cross(y, z)
    return Pose(np.column_stack([x, y, z]), eye)


def ring_views(center, radius=2.6, heights=(1.25, 0.45, 1.25, 0.45), n=4):
    """Camera poses on a ring, alternating high/low so both the top and the
    underside of furniture-height objects are observed."""
    center = np.asarray(center, dtype=float)
    poses = []
    for k in range(n):
        az = 2.0 * np.pi * k / n
        h = heights[k % len(heights)]
        eye = center + np.array([radius * np.cos(az), radius * np.sin(az), 0.0])
        eye[2] = h
        poses.append(look_at(eye, center))
    return poses


def _ray_boxes(origin, dirs, boxes):
    """Smallest positive hit scale per ray against (center, half) boxes."""
    t_best = np.full(dirs.shape[0], np.inf)
    for c, h in boxes:
        lo, hi = c - h, c + h
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - origin) / dirs
            t2 = (hi - origin) / dirs
        tmin = np.minimum(t1, t2)
        tmax = np.maximum(t1, t2)
        near = np.nanmax(np.where(np.isfinite(tmin), tmin, -np.inf), axis=1)
        far = np.nanmin(np.where(np.isfinite(tmax), tmax, np.inf), axis=1)
        # parallel rays: inside-slab test
        par = dirs == 0
        if par.any():
            bad = np.any(par & ((origin < lo) | (origin > hi)), axis=1)
            far = np.where(bad, -np.inf, far)
        hit = (near <= far) & (far > 1e-9) & (near > 1e-9)
        t_best = np.where(hit, np.minimum(t_best, near), t_best)
    return t_best


def _ray_triangles(origin, dirs, tris, chunk=2_000_000):
    """Moller-Trumbore over all rays x triangles, chunked over rays."""
    n_rays = dirs.shape[0]
    n_tris = tris.shape[0]
    t_best = np.full(n_rays, np.inf)
    if n_tris == 0:
        return t_best
    rows = max(1, int(chunk // max(n_tris, 1)))
    v0 = tris[:, 0]
    e1 = tris[:, 1] - v0
    e2 = tris[:, 2] - v0
    for s in range(0, n_rays, rows):
        d = dirs[s:s + rows]
        p = np.cross(d[:, None, :], e2[None])
        det = np.einsum("tj,rtj->rt", e1, p)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / det
            tvec = origin[None, None, :] - v0[None]
            u = np.einsum("rtj,rtj->rt", tvec, p) * inv
            q = np.cross(tvec, e1[None])
            v = np.einsum("rj,rtj->rt", d, q) * inv
            t = np.einsum("tj,rtj->rt", e2, q) * inv
        ok = (np.abs(det) > 1e-12) & (u >= -1e-9) & (v >= -1e-9) & (u + v <= 1 + 1e-9) & (t > 1e-9)
        t = np.where(ok, t, np.inf)
        t_best[s:s + rows] = t.min(axis=1)
    return t_best


def render_view(scene: Scene, cam_pose: Pose, intrinsics: Intrinsics,
                noise_sigma=0.0, rng=None) -> CameraView:
    """Ray-cast depth and first-hit object labels; deterministic for sigma = 0."""
    view = CameraView(cam_pose, intrinsics,
                      depth=np.full((intrinsics.height, intrinsics.width), np.inf),
                      labels=np.full((intrinsics.height, intrinsics.width), -1, dtype=int),
                      object_labels=tuple(o.label for o in scene.objects))
    rays_cam = view.pixel_rays().reshape(-1, 3)
    dirs_world = rays_cam @ cam_pose.rotation.T
    origin = cam_pose.translation
    depth = view.depth.reshape(-1)
    labels = view.labels.reshape(-1)
    for idx, obj in enumerate(scene.objects):
        inv = obj.pose.inverse()
        o_local = inv.apply(origin)
        d_local = dirs_world @ inv.rotation.T
        if obj.mesh.boxes:
            t = _ray_boxes(o_local, d_local, obj.mesh.boxes)
        else:
            t = _ray_triangles(o_local, d_local, obj.mesh.triangles())
        closer = t < depth
        depth[closer] = t[closer]
        labels[closer] = idx
    if noise_sigma > 0.0:
        rng = rng or np.random.default_rng(0)
        valid = np.isfinite(depth)
        depth[valid] += rng.normal(scale=noise_sigma, size=int(valid.sum()))
    view.depth[:] = depth.reshape(view.depth.shape)
    view.labels[:] = labels.reshape(view.labels.shape)
    return view


# ---------------------------------------------------------------------------
# Point clouds


@dataclass
class PointCloud:
    points: np.ndarray
    normals: np.ndarray | None = None
    source: np.ndarray | None = None  # originating view index per point
    view_origins: np.ndarray | None = None  # camera centers indexed by source

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
        if self.source is not None:
            self.source = np.asarray(self.source, dtype=int).ravel()

    def __len__(self):
        return self.points.shape[0]

    def select(self, mask) -> "PointCloud":
        return PointCloud(
            self.points[mask],
            None if self.normals is None else self.normals[mask],
            None if self.source is None else self.source[mask],
            self.view_origins,
        )

    def transformed(self, pose: Pose) -> "PointCloud":
        return PointCloud(
            pose.apply(self.points),
            None if self.normals is None else self.normals @ pose.rotation.T,
            None if self.source is None else self.source.copy(),
            None if self.view_origins is None else pose.apply(self.view_origins),
        )


def save_ply(cloud: PointCloud, path):
    has_n = cloud.normals is not None
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {len(cloud)}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        if has_n:
            f.write("property float nx\nproperty float ny\nproperty float nz\n")
        f.write("end_header\n")
        for i in range(len(cloud)):
            row = list(cloud.points[i])
            if has_n:
                row += list(cloud.normals[i])
            f.write(" ".join(f"{x:.9g}" for x in row) + "\n")


def load_ply(path) -> PointCloud:
    with open(path) as f:
        lines = f.read().splitlines()
    n = 0
    props = []
    body_at = 0
    for i, line in enumerate(lines):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "element" and parts[1] == "vertex":
            n = int(parts[2])
        elif parts[0] == "property":
            props.append(parts[-1])
        elif parts[0] == "end_header":
            body_at = i + 1
            break
    data = np.array([[float(x) for x in lines[body_at + k].split()] for k in range(n)])
    cols = {name: j for j, name in enumerate(props)}
    pts = data[:, [cols["x"], cols["y"], cols["z"]]] if n else np.zeros((0, 3))
    normals = None
    if "nx" in cols and n:
        normals = data[:, [cols["nx"], cols["ny"], cols["nz"]]]
    return PointCloud(pts, normals)


def extract_object_cloud(views, label: str) -> PointCloud:
    """Back-project the masked depth pixels of every view and fuse in world frame."""
    if not views:
        raise EmptyCloudError("no views supplied")
    pts, src = [], []
    origins = []
    for vi, view in enumerate(views):
        origins.append(view.pose.translation)
        matching = [i for i, lab in enumerate(view.object_labels) if lab == label]
        if not matching:
            continue
        mask = np.isin(view.labels, matching) & np.isfinite(view.depth)
        if not mask.any():
            continue
        rays = view.pixel_rays()[mask]
        local = rays * view.depth[mask][:, None]
        pts.append(view.pose.apply(local))
        src.append(np.full(local.shape[0], vi))
    if not pts:
        raise EmptyCloudError(f"label {label!r} not visible in any view")
    return PointCloud(np.vstack(pts), source=np.concatenate(src),
                      view_origins=np.array(origins))


# ---------------------------------------------------------------------------
# Scene-level collision query


def collides(scene: Scene, geometry, pose: Pose, clearance=0.0,
             exclude_ids=(), gripper_opening=None) -> bool:
    """True when the posed geometry comes within clearance of the scene.

    geometry is either a TriMesh or a Gripper (two finger volumes + palm);
    both are reduced to oriented boxes and tested against every object's box
    decomposition and the floor plane.  Cloud-based point-vs-box gripper
    checks (used when only a rendered object cloud is available) live in
    collision.gripper_hits_points.
    """
    if clearance < 0:
        raise ValueError("clearance must be nonnegative")
    excluded = {i for i, o in enumerate(scene.objects) if o.id in exclude_ids}
    if isinstance(geometry, meshes.TriMesh):
        geo_boxes = collision.boxes_from_mesh(geometry, pose)
    else:
        geo_boxes = collision.gripper_boxes_world(geometry, pose, gripper_opening)
    if collision.boxes_below_plane(geo_boxes, scene.floor_z, clearance):
        return True
    for i, obj in enumerate(scene.objects):
        if i in excluded:
            continue
        if collision.any_obb_overlap(geo_boxes, obj.world_boxes(), clearance):
            return True
    return False
