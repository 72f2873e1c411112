"""Wrench-space evaluation of grasp coalitions.

Hard-finger point contacts with friction: each contact transmits a 3-D force
inside its friction cone and no moment.  The grasp map stacks per-contact
blocks [I; skew(p - com)], so G f is the net wrench about the center of mass.

The contact-force program (minimum-L2-norm f with G f = f_ext and every f_i
in its cone) is solved by maximizing the smooth concave dual with BFGS and
polishing with a semismooth Newton step; the inner minimization is an exact
cone projection, so returned forces always lie inside their cones.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateGraspError, EquilibriumInfeasibleError
from .geometry import skew

DEFAULT_EPS = 1e-6
CONE_MARGIN = 1e-4  # relative slack when verifying strict cone membership


@dataclass(frozen=True)
class ContactSet:
    """Contact positions, inward unit cone axes, friction, and the load wrench.

    f_ext is the net wrench the contacts must produce about the center of
    mass; for an object of weight m g hanging in the grippers this is
    (0, 0, +m g, 0, 0, 0).
    """

    positions: np.ndarray
    normals: np.ndarray
    frictions: np.ndarray
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    f_ext: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.positions, dtype=float))
        n = np.atleast_2d(np.asarray(self.normals, dtype=float))
        if p.shape != n.shape or p.shape[1] != 3 or p.shape[0] < 1:
            raise ValueError("need matching (n, 3) positions and normals, n >= 1")
        lens = np.linalg.norm(n, axis=1)
        if np.any(np.abs(lens - 1.0) > 1e-6):
            raise ValueError("contact normals must be unit vectors")
        mu = np.broadcast_to(np.asarray(self.frictions, dtype=float), (p.shape[0],)).copy()
        if np.any(mu <= 0):
            raise ValueError("friction coefficients must be positive")
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "normals", n / lens[:, None])
        object.__setattr__(self, "frictions", mu)
        object.__setattr__(self, "com", np.asarray(self.com, dtype=float).reshape(3))
        object.__setattr__(self, "f_ext", np.asarray(self.f_ext, dtype=float).reshape(6))

    @property
    def n_contacts(self) -> int:
        return self.positions.shape[0]

    @staticmethod
    def under_gravity(positions, normals, frictions, com, mass, g=9.81) -> "ContactSet":
        """Contacts that must carry an object of the given mass."""
        return ContactSet(positions, normals, frictions, com,
                          f_ext=np.array([0.0, 0.0, mass * g, 0.0, 0.0, 0.0]))

    def gravity_magnitude(self) -> float:
        return float(np.linalg.norm(self.f_ext[:3]))


@dataclass(frozen=True)
class GraspMatrix:
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != 6 or e.shape[1] % 3 != 0:
            raise ValueError("grasp matrix must be 6 x 3n")
        object.__setattr__(self, "entries", e)


@dataclass(frozen=True)
class ContactForces:
    forces: np.ndarray  # (n, 3) world-frame force per contact
    objective: float
    iterations: int

    def magnitudes(self) -> np.ndarray:
        return np.linalg.norm(self.forces, axis=1)

    def stacked(self) -> np.ndarray:
        return self.forces.ravel()


def grasp_matrix(cs: ContactSet) -> GraspMatrix:
    """6 x 3n map from stacked contact forces to the net object wrench."""
    n = cs.n_contacts
    G = np.zeros((6, 3 * n))
    for i in range(n):
        G[:3, 3 * i:3 * i + 3] = np.eye(3)
        G[3:, 3 * i:3 * i + 3] = skew(cs.positions[i] - cs.com)
    return GraspMatrix(G)


def omega(cs: ContactSet) -> float:
    """Force-closure relaxation: L2 norm of G applied to the stacked cone axes."""
    G = grasp_matrix(cs).entries
    return float(np.linalg.norm(G @ cs.normals.ravel()))


def min_singular_value(G: GraspMatrix) -> float:
    return float(np.linalg.svd(G.entries, compute_uv=False)[-1])


# ---------------------------------------------------------------------------
# Contact-force program


def _project_cones(x, axes, mus, want_jac=False):
    """Project stacked 3-blocks onto friction cones; optional block Jacobians."""
    f = x.reshape(-1, 3).copy()
    n = f.shape[0]
    jac = np.zeros((n, 3, 3)) if want_jac else None
    s = np.einsum("ij,ij->i", f, axes)
    w = f - s[:, None] * axes
    t = np.linalg.norm(w, axis=1)
    inside = t <= mus * s
    polar = mus * t <= -s
    bnd = ~inside & ~polar
    f[polar] = 0.0
    if want_jac:
        jac[inside] = np.eye(3)
    if np.any(bnd):
        a = axes[bnd]
        mu = mus[bnd]
        tb = np.maximum(t[bnd], 1e-300)
        wn = w[bnd] / tb[:, None]
        beta = (s[bnd] + mu * t[bnd]) / (1.0 + mu ** 2)
        d = a + mu[:, None] * wn
        f[bnd] = beta[:, None] * d
        if want_jac:
            outer = np.einsum("ni,nj->nij", d, d) / (1.0 + mu ** 2)[:, None, None]
            perp = (np.eye(3)[None]
                    - np.einsum("ni,nj->nij", a, a)
                    - np.einsum("ni,nj->nij", wn, wn))
            jac[bnd] = outer + (beta * mu / tb)[:, None, None] * perp
    return f.ravel(), jac


def cone_residuals(cs: ContactSet, forces: np.ndarray) -> np.ndarray:
    """Per-contact friction-cone slack ||f_t|| - mu f_n (<= 0 means inside)."""
    f = np.atleast_2d(forces)
    s = np.einsum("ij,ij->i", f, cs.normals)
    t = np.linalg.norm(f - s[:, None] * cs.normals, axis=1)
    return t - cs.frictions * s


def solve_contact_forces(cs: ContactSet, eps: float = DEFAULT_EPS,
                         residual_tol: float = 1e-6) -> ContactForces:
    """Minimum-L2-norm contact forces balancing f_ext inside the friction cones.

    Raises DegenerateGraspError when the grasp matrix cannot even represent
    the wrench (rank deficiency blocking f_ext), and
    EquilibriumInfeasibleError when the cones admit no balancing force set.
    """
    G = grasp_matrix(cs).entries
    b = cs.f_ext.astype(float)
    axes = cs.normals
    mus = cs.frictions
    bn = float(np.linalg.norm(b))
    if bn == 0.0:
        return ContactForces(np.zeros((cs.n_contacts, 3)), 0.0, 0)

    # rank guard: a rank-deficient G is only usable when b lies in its range
    GGt = G @ G.T
    min_eig = float(np.linalg.eigvalsh(GGt)[0])
    if min_eig < eps:
        b_ls, *_ = np.linalg.lstsq(G, b, rcond=None)
        if np.linalg.norm(G @ b_ls - b) > residual_tol * (1.0 + bn):
            raise DegenerateGraspError(
                f"grasp matrix rank-deficient (min eig {min_eig:.2e}) and cannot "
                "represent the external wrench", min_eigenvalue=min_eig,
                residual=float(np.linalg.norm(G @ b_ls - b)))

    bh = b / bn

    def fstar(lam, want_jac=False):
        return _project_cones((G.T @ lam) / 2.0, axes, mus, want_jac)

    def negdual(lam):
        f, _ = fstar(lam)
        gi = G.T @ lam
        return -(lam @ bh + f @ f - gi @ f), G @ f - bh

    with np.errstate(over="ignore", invalid="ignore"):
        res = minimize(negdual, np.zeros(6), jac=True, method="BFGS",
                       options={"gtol": 1e-9, "maxiter": 200})
    nit = int(res.nit)
    lam = res.x
    if not np.all(np.isfinite(lam)):
        lam = np.zeros(6)
    ln = float(np.linalg.norm(lam))
    if ln > 1e8:
        lh = lam / ln
        fcert, _ = _project_cones(G.T @ lh, axes, mus)
        if bh @ lh > 1e-9 and np.linalg.norm(fcert) < 1e-7:
            raise EquilibriumInfeasibleError(
                "friction cones cannot balance the external wrench "
                "(unbounded dual certificate)")
        lam = lh * 1e4

    # semismooth Newton polish on the dual gradient G f*(lam) - bh
    for _ in range(60):
        f, jac = fstar(lam, want_jac=True)
        r = G @ f - bh
        if np.linalg.norm(r) < 1e-13:
            break
        D = np.zeros((3 * cs.n_contacts, 3 * cs.n_contacts))
        for i in range(cs.n_contacts):
            D[3 * i:3 * i + 3, 3 * i:3 * i + 3] = jac[i]
        H = G @ D @ G.T / 2.0
        step = np.linalg.lstsq(H, -r, rcond=1e-12)[0]
        improved = False
        for alpha in (1.0, 0.5, 0.25, 0.1, 0.01):
            f2, _ = fstar(lam + alpha * step)
            if np.linalg.norm(G @ f2 - bh) < np.linalg.norm(r) * (1.0 - 0.1 * alpha):
                lam = lam + alpha * step
                improved = True
                break
        nit += 1
        if not improved:
            break

    f, _ = fstar(lam)
    resid = float(np.linalg.norm(G @ f - bh))
    if resid > residual_tol:
        lh = lam / max(np.linalg.norm(lam), 1e-300)
        fcert, _ = _project_cones(G.T @ lh, axes, mus)
        if bh @ lh > 1e-9 and np.linalg.norm(fcert) < 1e-6:
            raise EquilibriumInfeasibleError(
                "friction cones cannot balance the external wrench",
                residual=resid * bn)
        raise EquilibriumInfeasibleError(
            f"contact-force program unsolved (relative residual {resid:.2e})",
            residual=resid * bn)
    forces = (f * bn).reshape(-1, 3)
    return ContactForces(forces, float(f @ f) * bn * bn, nit)


def f_max(cs: ContactSet, solution: ContactForces | None = None) -> float:
    """Largest optimal per-contact force magnitude over the gravity magnitude."""
    fg = cs.gravity_magnitude()
    if fg <= 0.0:
        raise ValueError("f_max undefined: zero gravity load")
    sol = solution if solution is not None else solve_contact_forces(cs)
    return float(sol.magnitudes().max() / fg)


def evaluate(cs: ContactSet) -> dict:
    """JSON-ready metric report: omega, MSV, f_max, forces, solver iterations."""
    G = grasp_matrix(cs)
    report = {
        "omega": omega(cs),
        "msv": min_singular_value(G),
        "n_contacts": cs.n_contacts,
    }
    t0 = time.perf_counter()
    try:
        sol = solve_contact_forces(cs)
        report["f_max"] = f_max(cs, sol) if cs.gravity_magnitude() > 0 else None
        report["per_contact_forces"] = [list(map(float, row)) for row in sol.forces]
        report["solver_iterations"] = sol.iterations
    except (DegenerateGraspError, EquilibriumInfeasibleError) as e:
        report["f_max"] = None
        report["solver_error"] = str(e)
    report["solve_seconds"] = time.perf_counter() - t0
    return report
