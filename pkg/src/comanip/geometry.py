"""Rigid-body math, grasp-pose parameterization, and mobile-manipulator kinematics.

Conventions:
  - Pose maps points from its local frame to the world: x_w = R @ x + t.
  - GraspPose approach vector v is the direction the gripper advances toward
    the object (gripper frame z axis).  The closing axis (gripper x axis) is
    obtained by rotating a canonical tangent of v by the in-plane angle alpha.
    A two-finger gripper is symmetric under alpha -> alpha + pi, so alpha is
    kept in [0, pi).
  - Mobile-base configurations are (x, y, heading, arm joint angles), i.e.
    the base contributes three extra planar degrees of freedom.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import UnreachableError

ORTHO_TOL = 1e-9


def _as3(x) -> np.ndarray:
    a = np.asarray(x, dtype=float).reshape(3)
    return a


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    a = _as3(axis)
    n = np.linalg.norm(a)
    if n == 0:
        raise ValueError("zero rotation axis")
    a = a / n
    K = skew(a)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_angle(R: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix."""
    c = np.clip((np.trace(R) - 1.0) * 0.5, -1.0, 1.0)
    return float(np.arccos(c))


def log_rotation(R: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of R."""
    th = rotation_angle(R)
    if th < 1e-12:
        return np.zeros(3)
    if np.pi - th < 1e-6:
        # near pi: extract axis from the symmetric part
        A = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(A), 0.0))
        # fix signs from off-diagonals
        k = int(np.argmax(axis))
        if axis[k] > 0:
            axis = A[:, k] / axis[k]
            axis[k] = np.sqrt(max(A[k, k], 0.0))
        n = np.linalg.norm(axis)
        if n > 0:
            axis = axis / n
        return axis * th
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return w * (th / (2.0 * np.sin(th)))


def quat_from_rotation(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) with w >= 0."""
    t = np.trace(R)
    if t > 0:
        w = np.sqrt(1.0 + t) / 2.0
        x = (R[2, 1] - R[1, 2]) / (4 * w)
        y = (R[0, 2] - R[2, 0]) / (4 * w)
        z = (R[1, 0] - R[0, 1]) / (4 * w)
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(1.0 + R[i, i] - R[j, j] - R[k, k], 0.0)) * 2.0
        q = np.zeros(4)
        q[1 + i] = s / 4.0
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
        w, x, y, z = q
    q = np.array([w, x, y, z])
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


def rotation_from_quat(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


@dataclass(frozen=True)
class Pose:
    """Rigid transform: x_world = rotation @ x_local + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = _as3(self.translation)
        err = np.abs(R.T @ R - np.eye(3)).max()
        if err > 1e-7:
            raise ValueError(f"rotation not orthonormal (|R'R - I| = {err:.2e})")
        if np.linalg.det(R) < 0:
            raise ValueError("rotation has negative determinant")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_matrix(T: np.ndarray) -> "Pose":
        T = np.asarray(T, dtype=float)
        return Pose(T[:3, :3], T[:3, 3])

    @staticmethod
    def from_xyzrpy(x=0.0, y=0.0, z=0.0, roll=0.0, pitch=0.0, yaw=0.0) -> "Pose":
        R = rot_z(yaw) @ rotation_about_axis([0, 1, 0], pitch) @ rotation_about_axis([1, 0, 0], roll)
        return Pose(R, [x, y, z])

    def to_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        """Transform one point (3,) or many (n, 3) into the world frame."""
        p = np.asarray(points, dtype=float)
        if p.ndim == 1:
            return self.rotation @ p + self.translation
        return p @ self.rotation.T + self.translation

    def __matmul__(self, other: "Pose") -> "Pose":
        return compose(self, other)

    def almost_equal(self, other: "Pose", pos_tol=1e-9, rot_tol=1e-9) -> bool:
        dp = np.linalg.norm(self.translation - other.translation)
        dr = rotation_angle(self.rotation.T @ other.rotation)
        return dp <= pos_tol and dr <= rot_tol


def compose(a: Pose, b: Pose) -> Pose:
    """Pose applying b first, then a."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def pose_difference(a: Pose, b: Pose):
    """(position distance, rotation angle) between two poses."""
    return (float(np.linalg.norm(a.translation - b.translation)),
            rotation_angle(a.rotation.T @ b.rotation))


def canonical_tangent(v: np.ndarray) -> np.ndarray:
    """Deterministic unit vector perpendicular to v (reference for alpha = 0)."""
    v = _as3(v)
    ref = np.array([0.0, 0.0, 1.0]) if abs(v[2]) <= 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(ref, v)
    n = np.linalg.norm(u)
    if n < 1e-12:
        raise ValueError("approach vector degenerate")
    return u / n


@dataclass(frozen=True)
class GraspPose:
    """Grasp as (translation, approach direction, in-plane rotation)."""

    translation: np.ndarray
    approach: np.ndarray
    inplane: float

    def __post_init__(self):
        t = _as3(self.translation)
        v = _as3(self.approach)
        n = np.linalg.norm(v)
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"approach vector not unit (norm {n})")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "approach", v / n)
        object.__setattr__(self, "inplane", float(self.inplane) % np.pi)

    def closing_axis(self) -> np.ndarray:
        u0 = canonical_tangent(self.approach)
        w0 = np.cross(self.approach, u0)
        return np.cos(self.inplane) * u0 + np.sin(self.inplane) * w0


def pose_from_tva(g: GraspPose) -> Pose:
    """Gripper pose: x = closing axis, z = approach, origin between fingertips."""
    x = g.closing_axis()
    z = g.approach
    y = np.cross(z, x)
    R = np.column_stack([x, y, z])
    return Pose(R, g.translation)


def tva_from_pose(p: Pose) -> GraspPose:
    """Inverse of pose_from_tva; alpha reduced modulo pi (gripper symmetry)."""
    v = p.rotation[:, 2]
    n = np.linalg.norm(v)
    if abs(n - 1.0) > 1e-6:
        raise ValueError("degenerate rotation: approach vector undefined")
    u0 = canonical_tangent(v)
    w0 = np.cross(v, u0)
    x = p.rotation[:, 0]
    alpha = float(np.arctan2(x @ w0, x @ u0))
    return GraspPose(p.translation, v, alpha % np.pi)


def pose_loss(predicted: GraspPose, truth: GraspPose, weights=(1.0, 1.0, 1.0)) -> float:
    """Weighted grasp-pose distance.

    Sum of approach-vector L2 error, translation L2 error, and the squared
    sine of the in-plane angle difference (pi-periodic, so the two-finger
    symmetry costs nothing).
    """
    w1, w2, w3 = (float(w) for w in weights)
    if min(w1, w2, w3) < 0:
        raise ValueError("weights must be nonnegative")
    dv = np.linalg.norm(predicted.approach - truth.approach)
    dt = np.linalg.norm(predicted.translation - truth.translation)
    da = np.sin(predicted.inplane - truth.inplane) ** 2
    return float(w1 * dv + w2 * dt + w3 * da)


@dataclass(frozen=True)
class RevoluteJoint:
    axis: np.ndarray
    offset: np.ndarray  # fixed link translation applied before the joint rotation
    lower: float
    upper: float

    def __post_init__(self):
        a = _as3(self.axis)
        n = np.linalg.norm(a)
        if n == 0:
            raise ValueError("joint axis must be nonzero")
        if not self.lower < self.upper:
            raise ValueError("joint limits must satisfy lower < upper")
        object.__setattr__(self, "axis", a / n)
        object.__setattr__(self, "offset", _as3(self.offset))


@dataclass(frozen=True)
class Gripper:
    finger_length: float = 0.05
    max_opening: float = 0.08
    finger_thickness: float = 0.012
    finger_width: float = 0.02
    palm_depth: float = 0.03
    pad_normal: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        object.__setattr__(self, "pad_normal", _as3(self.pad_normal))


@dataclass(frozen=True)
class RobotModel:
    """Planar mobile base plus a serial revolute arm with a two-finger gripper."""

    name: str
    joints: tuple
    gripper: Gripper
    tool: Pose
    base_size: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5, 0.3]))
    base_xy_limits: float = 10.0  # |x|, |y| bound used by planners

    def __post_init__(self):
        if len(self.joints) < 1:
            raise ValueError("robot needs at least one arm joint")
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "base_size", _as3(self.base_size))

    @property
    def arm_dof(self) -> int:
        return len(self.joints)

    @property
    def dof(self) -> int:
        return 3 + len(self.joints)

    def joint_limits(self) -> np.ndarray:
        """(dof, 2) lower/upper bounds including the base planar DoFs."""
        lims = [(-self.base_xy_limits, self.base_xy_limits),
                (-self.base_xy_limits, self.base_xy_limits),
                (-np.pi, np.pi)]
        lims += [(j.lower, j.upper) for j in self.joints]
        return np.array(lims)

    def clamp(self, q: np.ndarray) -> np.ndarray:
        lims = self.joint_limits()
        return np.clip(q, lims[:, 0], lims[:, 1])

    @staticmethod
    def default() -> "RobotModel":
        """Stand-in mobile manipulator: 3-DoF base + 6-DoF arm, ~0.9 m reach."""
        return RobotModel.from_config(_DEFAULT_ROBOT_CONFIG)

    @staticmethod
    def from_config(cfg) -> "RobotModel":
        """Build from a dict or a JSON file path (schema in the README)."""
        if isinstance(cfg, (str, bytes)):
            with open(cfg) as f:
                cfg = json.load(f)
        joints = tuple(
            RevoluteJoint(j["axis"], j["offset"], j["limits"][0], j["limits"][1])
            for j in cfg["joints"]
        )
        g = cfg.get("gripper", {})
        gripper = Gripper(
            finger_length=g.get("finger_length", 0.05),
            max_opening=g.get("max_opening", 0.08),
            finger_thickness=g.get("finger_thickness", 0.012),
            finger_width=g.get("finger_width", 0.02),
            palm_depth=g.get("palm_depth", 0.03),
            pad_normal=g.get("pad_normal", [1.0, 0.0, 0.0]),
        )
        tool_cfg = cfg.get("tool", {})
        tool = Pose.from_xyzrpy(*tool_cfg.get("xyz", [0, 0, 0]), *tool_cfg.get("rpy", [0, 0, 0]))
        return RobotModel(
            name=cfg.get("name", "robot"),
            joints=joints,
            gripper=gripper,
            tool=tool,
            base_size=np.asarray(cfg.get("base_size", [0.5, 0.5, 0.3]), dtype=float),
            base_xy_limits=float(cfg.get("base_xy_limits", 10.0)),
        )


# Default model: vertical shoulder column on the base, then a 6-joint arm
# (yaw / pitch / pitch / roll / pitch / roll), links sized for ~0.9 m reach.
_DEFAULT_ROBOT_CONFIG = {
    "name": "mm-default",
    "base_size": [0.45, 0.45, 0.28],
    "joints": [
        {"axis": [0, 0, 1], "offset": [0.0, 0.0, 0.40], "limits": [-3.1, 3.1]},
        {"axis": [0, 1, 0], "offset": [0.0, 0.0, 0.12], "limits": [-2.4, 2.4]},
        {"axis": [0, 1, 0], "offset": [0.35, 0.0, 0.0], "limits": [-2.6, 2.6]},
        {"axis": [1, 0, 0], "offset": [0.30, 0.0, 0.0], "limits": [-3.1, 3.1]},
        {"axis": [0, 1, 0], "offset": [0.12, 0.0, 0.0], "limits": [-2.0, 2.0]},
        {"axis": [1, 0, 0], "offset": [0.08, 0.0, 0.0], "limits": [-3.1, 3.1]},
    ],
    "gripper": {"finger_length": 0.05, "max_opening": 0.08},
    "tool": {"xyz": [0.1, 0.0, 0.0], "rpy": [0.0, 1.5707963267948966, 0.0]},
}


@dataclass(frozen=True)
class Configuration:
    """Base (x, y, heading) followed by arm joint angles."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).ravel())

    def __len__(self):
        return self.values.shape[0]


def _config_values(q) -> np.ndarray:
    if isinstance(q, Configuration):
        return q.values
    return np.asarray(q, dtype=float).ravel()


def _check_dim(r: RobotModel, q: np.ndarray):
    if q.shape[0] != r.dof:
        raise ValueError(f"configuration has {q.shape[0]} values, robot {r.name} needs {r.dof}")


def fk_matrix(r: RobotModel, q) -> np.ndarray:
    """End-effector pose as a 4x4 matrix (fast path used by the planners)."""
    q = _config_values(q)
    _check_dim(r, q)
    T = np.eye(4)
    T[0, 3], T[1, 3] = q[0], q[1]
    T[:3, :3] = rot_z(q[2])
    for joint, angle in zip(r.joints, q[3:]):
        Tj = np.eye(4)
        Tj[:3, :3] = rotation_about_axis(joint.axis, angle)
        Tj[:3, 3] = joint.offset
        T = T @ Tj
    Tt = r.tool.to_matrix()
    return T @ Tt


def fk_frames(r: RobotModel, q):
    """Joint origins and world-frame axes along the chain, plus the EE matrix.

    Returns (origins (k+1, 3) with the base frame first, axes (k, 3), T_ee).
    """
    q = _config_values(q)
    _check_dim(r, q)
    T = np.eye(4)
    T[0, 3], T[1, 3] = q[0], q[1]
    T[:3, :3] = rot_z(q[2])
    origins = [T[:3, 3].copy()]
    axes = []
    for joint, angle in zip(r.joints, q[3:]):
        Tj = np.eye(4)
        Tj[:3, :3] = rotation_about_axis(joint.axis, angle)
        Tj[:3, 3] = joint.offset
        T = T @ Tj
        origins.append(T[:3, 3].copy())
        axes.append(T[:3, :3] @ joint.axis)
    T = T @ r.tool.to_matrix()
    return np.array(origins), np.array(axes), T


def forward_kinematics(r: RobotModel, q) -> Pose:
    """World-frame end-effector pose for a configuration."""
    return Pose.from_matrix(fk_matrix(r, q))


def jacobian(r: RobotModel, q) -> np.ndarray:
    """Geometric Jacobian (6 x dof): rows are linear then angular velocity."""
    q = _config_values(q)
    origins, axes, T = fk_frames(r, q)
    p_ee = T[:3, 3]
    J = np.zeros((6, r.dof))
    J[0, 0] = 1.0  # base x
    J[1, 1] = 1.0  # base y
    z = np.array([0.0, 0.0, 1.0])  # base heading: revolute about world z at base origin
    J[:3, 2] = np.cross(z, p_ee - origins[0])
    J[3:, 2] = z
    # arm joints rotate about their world axes located at the *next* frame origin
    for i, axis in enumerate(axes):
        o = origins[i + 1]
        J[:3, 3 + i] = np.cross(axis, p_ee - o)
        J[3:, 3 + i] = axis
    return J


def _task_error(T_cur: np.ndarray, target: Pose) -> np.ndarray:
    e = np.empty(6)
    e[:3] = target.translation - T_cur[:3, 3]
    e[3:] = log_rotation(target.rotation @ T_cur[:3, :3].T)
    return e


def inverse_kinematics(r: RobotModel, target: Pose, seed,
                       pos_tol=1e-4, rot_tol=1e-3, max_iters=150,
                       restarts=8, damping=0.08) -> Configuration:
    """Damped-least-squares IK with joint-limit clamping and seeded restarts.

    Raises UnreachableError (with the best residual) when no solution is
    found within the iteration budget.
    """
    q0 = _config_values(seed).copy()
    _check_dim(r, q0)
    lims = r.joint_limits()
    rng = np.random.default_rng(2357)  # fixed stream: IK is deterministic per call
    best = (np.inf, np.inf)
    q = q0.copy()
    for attempt in range(restarts + 1):
        if attempt > 0:
            span = lims[:, 1] - lims[:, 0]
            q = q0 + rng.normal(scale=0.2 * attempt, size=r.dof) * np.minimum(span, 2.0) / 2.0
            q = r.clamp(q)
        last_err = np.inf
        for _ in range(max_iters):
            T = fk_matrix(r, q)
            e = _task_error(T, target)
            pe, re_ = np.linalg.norm(e[:3]), np.linalg.norm(e[3:])
            if pe < best[0]:
                best = (pe, re_)
            if pe <= pos_tol and re_ <= rot_tol:
                return Configuration(q)
            J = jacobian(r, q)
            JJt = J @ J.T + (damping ** 2) * np.eye(6)
            dq = J.T @ np.linalg.solve(JJt, e)
            step = np.linalg.norm(dq)
            if step > 0.5:
                dq *= 0.5 / step
            q = r.clamp(q + dq)
            err = pe + re_
            if last_err - err < 1e-12 and err > 10 * (pos_tol + rot_tol):
                break  # stalled far from the target: restart
            last_err = err
    raise UnreachableError(
        f"IK failed: best residual {best[0]:.3e} m / {best[1]:.3e} rad",
        best_position_error=best[0], best_rotation_error=best[1],
    )
