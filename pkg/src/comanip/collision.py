"""Collision primitives: oriented boxes, separating-axis tests, gripper volumes.

Clearance semantics: a query at clearance c inflates box half-extents by c/2
on each side of a pair (or by c against points), so collides() is monotone in
c.  Inflation slightly over-approximates the true Euclidean neighborhood at
box corners, which errs on the safe side for planning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OrientedBox:
    center: np.ndarray
    half: np.ndarray
    rotation: np.ndarray  # box axes as columns, world frame

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "half", np.asarray(self.half, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))


def boxes_from_mesh(mesh, pose) -> list:
    """World-frame OBBs for a mesh: its box decomposition, else its AABB."""
    out = []
    if mesh.boxes:
        for c, h in mesh.boxes:
            out.append(OrientedBox(pose.apply(c), h, pose.rotation))
    else:
        lo, hi = mesh.bounds()
        out.append(OrientedBox(pose.apply((lo + hi) / 2.0), (hi - lo) / 2.0, pose.rotation))
    return out


def obb_overlap(a: OrientedBox, b: OrientedBox, clearance=0.0) -> bool:
    """Separating-axis test between two oriented boxes inflated by clearance/2 each."""
    ah = a.half + clearance / 2.0
    bh = b.half + clearance / 2.0
    # everything in a's frame
    R = a.rotation.T @ b.rotation
    t = a.rotation.T @ (b.center - a.center)
    absR = np.abs(R) + 1e-12
    # a's axes
    if np.any(np.abs(t) > ah + absR @ bh):
        return False
    # b's axes
    if np.any(np.abs(t @ R) > bh + absR.T @ ah):
        return False
    # cross products a_i x b_j
    for i in range(3):
        for j in range(3):
            axis = np.cross(np.eye(3)[i], R[:, j])
            n = np.linalg.norm(axis)
            if n < 1e-9:
                continue
            axis /= n
            ra = ah @ np.abs(axis)
            rb = bh @ np.abs(axis @ R)
            if abs(t @ axis) > ra + rb:
                return False
    return True


def any_obb_overlap(boxes_a, boxes_b, clearance=0.0) -> bool:
    for a in boxes_a:
        for b in boxes_b:
            if obb_overlap(a, b, clearance):
                return True
    return False


def points_near_box(points: np.ndarray, box: OrientedBox, clearance=0.0) -> np.ndarray:
    """Boolean mask of points inside the box inflated by clearance."""
    local = (points - box.center) @ box.rotation
    return np.all(np.abs(local) <= box.half + clearance, axis=1)


def any_point_in_boxes(points: np.ndarray, boxes, clearance=0.0) -> bool:
    if len(points) == 0:
        return False
    for box in boxes:
        if np.any(points_near_box(points, box, clearance)):
            return True
    return False


def boxes_below_plane(boxes, z: float, clearance=0.0) -> bool:
    """True when any box dips below the horizontal plane at height z."""
    for b in boxes:
        drop = b.half @ np.abs(b.rotation[2, :])
        if b.center[2] - drop < z + clearance:
            return True
    return False


# ---------------------------------------------------------------------------
# Gripper collision volume: two fingers + palm as boxes in the gripper frame
# (x = closing axis, z = approach, origin midway between the fingertip pads).


def gripper_boxes_local(gripper, opening=None):
    """(center, half) box pairs in the gripper frame."""
    w = gripper.max_opening if opening is None else float(opening)
    ft = gripper.finger_thickness
    fw = gripper.finger_width
    L = gripper.finger_length
    pd = gripper.palm_depth
    finger_half = np.array([ft / 2.0, fw / 2.0, L / 2.0])
    boxes = [
        (np.array([+(w / 2.0 + ft / 2.0), 0.0, -L / 2.0]), finger_half),
        (np.array([-(w / 2.0 + ft / 2.0), 0.0, -L / 2.0]), finger_half),
        (np.array([0.0, 0.0, -L - pd / 2.0]),
         np.array([w / 2.0 + ft, fw / 2.0, pd / 2.0])),
    ]
    return boxes


def gripper_boxes_world(gripper, pose, opening=None):
    return [OrientedBox(pose.apply(c), h, pose.rotation)
            for c, h in gripper_boxes_local(gripper, opening)]


def gripper_hits_points(points: np.ndarray, gripper, pose, clearance=0.0,
                        opening=None) -> bool:
    """Point-vs-box test of a posed gripper volume against a point cloud."""
    if len(points) == 0:
        return False
    local = (points - pose.translation) @ pose.rotation
    for c, h in gripper_boxes_local(gripper, opening):
        if np.any(np.all(np.abs(local - c) <= h + clearance, axis=1)):
            return True
    return False
