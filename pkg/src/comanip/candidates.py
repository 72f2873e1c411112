"""Collision-free grasp-candidate generation on the fused object cloud.

A point is graspable when (a) opposing surface within the gripper opening has
a normal anti-parallel to the point's own normal (so a pinch along the normal
closes on real material), and (b) the gripper volume, closing along the
normal, clears the cloud for at least one of a fixed ring of approach
directions.  Surviving points are clustered so the K candidates spread over
the object, and each candidate is an actual surface point, never a raw
centroid.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import ClusterCountError, LabelOverlapError, NoGraspableRegionError
from .geometry import Gripper, RobotModel, canonical_tangent
from .scene import PointCloud

PAD_ALIGN_TOL_DEG = 15.0  # opposing-surface normal tolerance
N_APPROACH_SAMPLES = 8
CONTACT_STANDOFF = 0.003  # pad-to-surface gap when posing the gripper
FILTER_CLEARANCE = 0.001
MIN_PIXEL_SEPARATION = 8.0


def estimate_normals(cloud: PointCloud, radius: float = 0.03) -> PointCloud:
    """Unit normals from local plane fits, oriented toward the source camera.

    Points whose neighborhood holds fewer than 3 points get NaN normals and
    are dropped by downstream consumers.
    """
    pts = cloud.points
    tree = cKDTree(pts)
    neighbor_lists = tree.query_ball_point(pts, r=radius)
    normals = np.full_like(pts, np.nan)
    covs = np.zeros((len(pts), 3, 3))
    valid = np.zeros(len(pts), dtype=bool)
    for i, idx in enumerate(neighbor_lists):
        if len(idx) < 3:
            continue
        nb = pts[idx]
        centered = nb - nb.mean(axis=0)
        covs[i] = centered.T @ centered
        valid[i] = True
    if valid.any():
        _, vecs = np.linalg.eigh(covs[valid])
        normals[valid] = vecs[:, :, 0]  # smallest-eigenvalue direction
    # orient toward the observing camera (or the +z hemisphere as fallback)
    if cloud.view_origins is not None and cloud.source is not None:
        to_cam = cloud.view_origins[cloud.source] - pts
    else:
        to_cam = np.tile([0.0, 0.0, 1.0], (len(pts), 1))
    flip = np.einsum("ij,ij->i", normals, to_cam) < 0
    normals[flip & valid] *= -1.0
    return PointCloud(pts, normals=normals, source=cloud.source,
                      view_origins=cloud.view_origins)


PALM_SWEEP_MARGIN = 0.015  # lateral inflation of the palm/corridor test region
APPROACH_CORRIDOR = 0.22  # swept clearance behind the palm (wrist travel)


def _sweep_boxes(gripper, opening):
    """Gripper boxes plus the swept approach corridor, with per-box inflation
    margins: fingers stay tight (a valid pinch skims the surface at the
    contact standoff), while the palm and the corridor behind it are inflated
    sideways so material continuing past the mouth depth is caught even on a
    sparsely sampled cloud."""
    from .collision import gripper_boxes_local
    boxes = list(gripper_boxes_local(gripper, opening))
    depth = gripper.finger_length + gripper.palm_depth
    half_span = opening / 2.0 + gripper.finger_thickness
    boxes.append((np.array([0.0, 0.0, -depth - APPROACH_CORRIDOR / 2.0]),
                  np.array([half_span, gripper.finger_width / 2.0,
                            APPROACH_CORRIDOR / 2.0])))
    tight = np.zeros(3)
    wide = np.array([0.0, PALM_SWEEP_MARGIN, PALM_SWEEP_MARGIN])
    margins = [tight, tight, wide, wide]
    return boxes, margins


def _approach_collision_mask(local_pts, gripper, opening, clearance, floor_hits):
    """Which of the approach angles collide, given points in the base gripper
    frame (x = closing axis, z = first approach direction).

    local_pts are cloud points relative to the gripper origin; the candidate
    approach frames differ only by a rotation about x, so each angle is a 2-D
    rotation of the (y, z) coordinates.
    """
    thetas = 2.0 * np.pi * np.arange(N_APPROACH_SAMPLES) / N_APPROACH_SAMPLES
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    x = local_pts[:, 0]
    y = local_pts[:, 1][None, :] * cos_t[:, None] + local_pts[:, 2][None, :] * sin_t[:, None]
    z = -local_pts[:, 1][None, :] * sin_t[:, None] + local_pts[:, 2][None, :] * cos_t[:, None]
    hit = np.zeros(N_APPROACH_SAMPLES, dtype=bool)
    boxes, margins = _sweep_boxes(gripper, opening)
    for (c, h), m in zip(boxes, margins):
        inside = ((np.abs(x[None, :] - c[0]) <= h[0] + clearance + m[0])
                  & (np.abs(y - c[1]) <= h[1] + clearance + m[1])
                  & (np.abs(z - c[2]) <= h[2] + clearance + m[2]))
        hit |= inside.any(axis=1)
    if floor_hits is not None:
        hit |= floor_hits
    return hit


def filter_collision_free(cloud: PointCloud, robot, scene=None,
                          clearance: float = FILTER_CLEARANCE,
                          angle_tol_deg: float = PAD_ALIGN_TOL_DEG,
                          extra_obstacles: np.ndarray | None = None,
                          target_id: str | None = None) -> PointCloud:
    """Keep cloud points where a collision-free antipodal pinch exists.

    robot may be a RobotModel or a bare Gripper.  When a scene is given, its
    other objects' sampled surfaces and the floor join the collision cloud.
    """
    gripper = robot.gripper if isinstance(robot, RobotModel) else robot
    if cloud.normals is None:
        raise ValueError("cloud needs normals; run estimate_normals first")
    pts = cloud.points
    nrm = cloud.normals
    valid = np.isfinite(nrm).all(axis=1)

    obstacles = pts
    floor_z = None
    if extra_obstacles is not None and len(extra_obstacles):
        obstacles = np.vstack([obstacles, extra_obstacles])
    if scene is not None:
        exclude = set()
        if target_id is not None:
            exclude = {i for i, o in enumerate(scene.objects) if o.id == target_id}
        others = scene.all_surface_points(exclude=exclude)
        if len(others):
            obstacles = np.vstack([obstacles, others])
        floor_z = scene.floor_z
    tree = cKDTree(obstacles)

    w = gripper.max_opening
    cos_tol = np.cos(np.radians(angle_tol_deg))
    sweep_depth = gripper.finger_length + gripper.palm_depth + APPROACH_CORRIDOR
    reach = np.sqrt((w / 2 + gripper.finger_thickness) ** 2 + sweep_depth ** 2) + 0.03
    pair_tree = cKDTree(pts)

    keep = np.zeros(len(pts), dtype=bool)
    for i in np.nonzero(valid)[0]:
        p, n = pts[i], nrm[i]
        # opposing material inside the mouth: a point roughly straight below
        # p along -n with an anti-parallel normal
        nearby = pair_tree.query_ball_point(p, r=w)
        if len(nearby) < 2:
            continue
        d = pts[nearby] - p
        depth = -d @ n
        lateral = np.linalg.norm(d + depth[:, None] * n, axis=1)
        anti = np.einsum("ij,j->i", np.where(np.isfinite(nrm[nearby]), nrm[nearby], 0.0), n)
        ok_pair = ((depth > 1e-4) & (depth <= w - 2 * CONTACT_STANDOFF)
                   & (lateral <= 0.01) & (anti <= -cos_tol))
        if not ok_pair.any():
            continue
        # pose the gripper: closing axis = n, pad standoff off the surface
        center = p - n * (w / 2.0 - CONTACT_STANDOFF)
        u = canonical_tangent(n)
        wv = np.cross(n, u)
        R_base = np.column_stack([n, -wv, u])  # x = closing, z = first approach (= u)
        near = tree.query_ball_point(center, r=reach)
        local = (obstacles[near] - center) @ R_base
        floor_mask = None
        if floor_z is not None:
            floor_mask = _gripper_floor_hits(center, n, u, wv, gripper, floor_z, clearance)
        hits = _approach_collision_mask(local, gripper, w, clearance, floor_mask)
        if not hits.all():
            keep[i] = True
    if not keep.any():
        raise NoGraspableRegionError("no graspable region on the object cloud")
    return cloud.select(keep)


def _gripper_floor_hits(center, n, u, wv, gripper, floor_z, clearance):
    """Per-approach-angle test of the gripper volume dipping below the floor."""
    thetas = 2.0 * np.pi * np.arange(N_APPROACH_SAMPLES) / N_APPROACH_SAMPLES
    # approach direction for angle t is cos(t) u + sin(t) (n x u); the gripper
    # extends from the fingertip plane back along -approach by L + palm depth
    approach = np.cos(thetas)[:, None] * u[None] + np.sin(thetas)[:, None] * wv[None]
    depth = gripper.finger_length + gripper.palm_depth
    half_span = gripper.max_opening / 2 + gripper.finger_thickness
    tail = center[2] - approach[:, 2] * depth
    lowest = np.minimum(center[2], tail) - half_span * abs(n[2]) - gripper.finger_width / 2
    return lowest < floor_z + clearance


@dataclass(frozen=True)
class CandidateSet:
    """K labeled grasp candidates on the object surface (labels 1..K)."""

    points: np.ndarray
    normals: np.ndarray
    labels: np.ndarray
    source_view: int
    pixels: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "normals", np.asarray(self.normals, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=int).ravel())
        if len(set(self.labels.tolist())) != len(self.labels):
            raise ValueError("candidate labels must be unique")

    @property
    def k(self) -> int:
        return len(self.labels)

    def by_label(self, label: int) -> int:
        idx = np.nonzero(self.labels == label)[0]
        if len(idx) != 1:
            raise KeyError(f"label {label} not in candidate set")
        return int(idx[0])

    def to_dict(self) -> dict:
        out = {
            "source_view": int(self.source_view),
            "candidates": [
                {
                    "label": int(l),
                    "point": [float(x) for x in p],
                    "normal": [float(x) for x in n],
                }
                for l, p, n in zip(self.labels, self.points, self.normals)
            ],
        }
        if self.pixels is not None:
            for entry, px in zip(out["candidates"], self.pixels):
                entry["pixel"] = [float(px[0]), float(px[1])]
        return out

    @staticmethod
    def from_dict(d: dict) -> "CandidateSet":
        cands = d["candidates"]
        pixels = None
        if cands and "pixel" in cands[0]:
            pixels = np.array([c["pixel"] for c in cands])
        return CandidateSet(
            points=np.array([c["point"] for c in cands]),
            normals=np.array([c["normal"] for c in cands]),
            labels=np.array([c["label"] for c in cands]),
            source_view=int(d["source_view"]),
            pixels=pixels,
        )


def _lexicographic_min(points, indices):
    order = np.lexsort((points[indices][:, 2], points[indices][:, 1], points[indices][:, 0]))
    return indices[order[0]]


def _farthest_point_seeds(pts, k):
    """Geometric farthest-point seeding, invariant to input point order."""
    centroid = pts.mean(axis=0)
    d = np.linalg.norm(pts - centroid, axis=1)
    first = _lexicographic_min(pts, np.nonzero(d == d.max())[0])
    seeds = [first]
    dist = np.linalg.norm(pts - pts[first], axis=1)
    for _ in range(1, k):
        cand = np.nonzero(dist == dist.max())[0]
        nxt = _lexicographic_min(pts, cand)
        seeds.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(pts - pts[nxt], axis=1))
    return np.array(seeds)


def cluster_candidates(cloud: PointCloud, k: int, seed: int = 0,
                       max_iters: int = 100) -> CandidateSet:
    """K-means over the collision-free points of a single view.

    Each candidate is the member point nearest its cluster centroid, so it
    always lies on the observed surface.  Farthest-point seeding makes the
    result deterministic and independent of point order; the seed argument is
    accepted for interface stability but not consumed.
    """
    del seed
    pts = cloud.points
    if len(pts) < k:
        raise ClusterCountError(
            f"{len(pts)} collision-free points < {k} clusters; lower K")
    if cloud.source is not None:
        views = np.unique(cloud.source)
        if len(views) > 1:
            raise ValueError("cluster_candidates expects a single-view cloud")
        source_view = int(views[0])
    else:
        source_view = 0
    centers = pts[_farthest_point_seeds(pts, k)].copy()
    assign = np.full(len(pts), -1)
    for _ in range(max_iters):
        d2 = ((pts[:, None, :] - centers[None]) ** 2).sum(axis=2)
        new_assign = np.argmin(d2, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            members = pts[assign == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    chosen = []
    for j in range(k):
        members = np.nonzero(assign == j)[0]
        if len(members) == 0:  # empty cluster: keep its seed center's nearest point
            members = np.arange(len(pts))
        dc = np.linalg.norm(pts[members] - centers[j], axis=1)
        best = members[dc == dc.min()]
        chosen.append(_lexicographic_min(pts, best))
    chosen = np.array(chosen)
    normals = (cloud.normals[chosen] if cloud.normals is not None
               else np.full((k, 3), np.nan))
    return CandidateSet(points=pts[chosen], normals=normals,
                        labels=np.arange(1, k + 1), source_view=source_view)


@dataclass(frozen=True)
class LabelLayout:
    """Projected label positions on the chosen annotation view."""

    labels: np.ndarray
    pixels: np.ndarray
    image_width: int
    image_height: int
    view_index: int
    min_separation: float

    def to_dict(self) -> dict:
        return {
            "view_index": int(self.view_index),
            "image_size": [int(self.image_width), int(self.image_height)],
            "min_separation_px": float(self.min_separation),
            "labels": [
                {"label": int(l), "u": float(p[0]), "v": float(p[1])}
                for l, p in zip(self.labels, self.pixels)
            ],
        }


def project_labels(cands: CandidateSet, view,
                   min_separation: float = MIN_PIXEL_SEPARATION):
    """Project candidates into their source view and enforce non-overlap.

    Returns (layout, candidate set with pixels attached).  Raises
    LabelOverlapError naming every clashing pair.
    """
    u, v, z = view.project(cands.points)
    if np.any(z <= 0):
        raise ValueError("candidate behind the labeling camera")
    k = view.intrinsics
    inside = (u >= 0) & (u < k.width) & (v >= 0) & (v < k.height)
    if not inside.all():
        bad = cands.labels[~inside].tolist()
        raise ValueError(f"labels outside the image: {bad}")
    px = np.column_stack([u, v])
    clashes = []
    for i in range(len(px)):
        for j in range(i + 1, len(px)):
            if np.linalg.norm(px[i] - px[j]) < min_separation:
                clashes.append((int(cands.labels[i]), int(cands.labels[j])))
    if clashes:
        raise LabelOverlapError(clashes)
    layout = LabelLayout(cands.labels.copy(), px, k.width, k.height,
                         cands.source_view, min_separation)
    return layout, replace(cands, pixels=px)


def pick_labeling_view(cloud: PointCloud, n_views: int) -> int:
    """View seeing the most collision-free points (the annotation image)."""
    if cloud.source is None:
        return 0
    counts = np.bincount(cloud.source, minlength=n_views)
    return int(np.argmax(counts))
