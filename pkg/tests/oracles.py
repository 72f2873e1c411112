"""Independent reference implementations used to cross-check the package.

These deliberately avoid the package's own code paths: rotations come from
scipy, the contact-force reference is a discretized-cone QP solved by cvxopt,
and geometric checks are direct formula evaluations.
"""

import numpy as np
import cvxopt
from scipy.spatial.transform import Rotation

cvxopt.solvers.options["show_progress"] = False
cvxopt.solvers.options["abstol"] = 1e-10
cvxopt.solvers.options["reltol"] = 1e-10


def homogeneous(R, t):
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = t
    return T


def chain_fk(robot, q):
    """End-effector 4x4 by explicit homogeneous products, rotations via scipy."""
    q = np.asarray(q, dtype=float)
    T = homogeneous(Rotation.from_euler("z", q[2]).as_matrix(), [q[0], q[1], 0.0])
    for joint, angle in zip(robot.joints, q[3:]):
        T = T @ homogeneous(np.eye(3), joint.offset)
        T = T @ homogeneous(Rotation.from_rotvec(np.asarray(joint.axis) * angle).as_matrix(),
                            np.zeros(3))
    return T @ robot.tool.to_matrix()


def wrench_sum(positions, com, forces):
    """Net wrench about com by direct summation."""
    w = np.zeros(6)
    for p, f in zip(positions, forces):
        w[:3] += f
        w[3:] += np.cross(np.asarray(p) - np.asarray(com), f)
    return w


def cone_edges(axis, mu, n_edges=8):
    a = np.asarray(axis, dtype=float)
    ref = np.array([1.0, 0, 0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0])
    u = np.cross(a, ref)
    u /= np.linalg.norm(u)
    v = np.cross(a, u)
    phis = 2 * np.pi * np.arange(n_edges) / n_edges
    e = a[None] + mu * (np.cos(phis)[:, None] * u[None] + np.sin(phis)[:, None] * v[None])
    return e / np.linalg.norm(e, axis=1, keepdims=True)


def pyramid_qp(positions, normals, mus, com, f_ext, n_edges=8):
    """Inner-approximation contact-force QP on 8-edge friction pyramids.

    Returns (stacked forces, objective) or None when infeasible.
    """
    positions = np.atleast_2d(positions)
    normals = np.atleast_2d(normals)
    mus = np.broadcast_to(np.asarray(mus, dtype=float), (positions.shape[0],))
    n = positions.shape[0]
    G = np.zeros((6, 3 * n))
    for i in range(n):
        r = positions[i] - np.asarray(com)
        G[:3, 3 * i:3 * i + 3] = np.eye(3)
        G[3:, 3 * i:3 * i + 3] = np.array([
            [0, -r[2], r[1]], [r[2], 0, -r[0]], [-r[1], r[0], 0]])
    E = np.zeros((3 * n, n_edges * n))
    for i in range(n):
        E[3 * i:3 * i + 3, n_edges * i:n_edges * (i + 1)] = cone_edges(normals[i], mus[i], n_edges).T
    A = G @ E
    U, S, Vt = np.linalg.svd(A, full_matrices=True)
    r = int(np.sum(S > 1e-10 * max(S[0], 1e-300)))
    bproj = U.T @ np.asarray(f_ext, dtype=float)
    if np.linalg.norm(bproj[r:]) > 1e-8 * (1 + np.linalg.norm(f_ext)):
        return None
    Ared = S[:r, None] * Vt[:r]
    bred = bproj[:r]
    m = E.shape[1]
    P = cvxopt.matrix(2 * E.T @ E + 1e-12 * np.eye(m))
    q = cvxopt.matrix(np.zeros(m))
    Gi = cvxopt.matrix(-np.eye(m))
    h = cvxopt.matrix(np.zeros(m))
    try:
        sol = cvxopt.solvers.qp(P, q, Gi, h, cvxopt.matrix(Ared), cvxopt.matrix(bred))
    except Exception:
        return None
    if sol["status"] != "optimal":
        return None
    lam = np.array(sol["x"]).ravel()
    f = E @ lam
    return f, float(f @ f)


def box_surface_distance(points, center, half):
    """Distance from points to the surface of an axis-aligned box."""
    d = np.abs(np.atleast_2d(points) - np.asarray(center)) - np.asarray(half)
    outside = np.linalg.norm(np.maximum(d, 0.0), axis=1)
    inside = np.abs(np.minimum(np.max(d, axis=1), 0.0))
    return np.where(np.max(d, axis=1) > 0, outside, inside)


def mesh_surface_distance(points, mesh, pose):
    """Distance to a box-decomposed mesh posed in the world."""
    local = pose.inverse().apply(np.atleast_2d(points))
    dists = np.stack([box_surface_distance(local, c, h) for c, h in mesh.boxes])
    return dists.min(axis=0)
