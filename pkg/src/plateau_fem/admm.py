"""ADMM minimization of the discrete line-and-surface energy.

The unknown is a Nedelec field ``u`` whose cell averages represent the
surface T and whose curl (shifted by ``curl u0``) represents the free line
S. Splitting with ``p = Pi u`` and ``q = curl u + curl u0`` gives

    min  sum_T |T| p_max |p|  +  sum_T |T| q_max |q|

with multipliers ``mu`` (for ``p``) and ``lam`` (for ``q``). One iteration
solves a fixed SPD system for ``u``, applies cellwise shrinkage to ``q`` and
``p`` and updates the multipliers, optionally over-relaxed.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import fespace as fe
from .linsolve import Factorization, factorize
from .mesh import TetMesh
from .regions import RegionLabels, layer_surface_area
from .shapes import Shape

log = logging.getLogger(__name__)

ZERO_TOL = 1e-12


class AdmmDivergenceError(FloatingPointError):
    def __init__(self, iteration: int):
        super().__init__(f"non-finite values at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class AdmmParams:
    beta: float = 1.0
    gamma_m: float = 1.0
    gamma_c: float = 1.0
    w_E: float = 1e5
    eps: float = 1e-6
    d_gamma: Optional[float] = None  # None: mean edge length of the mesh
    iterations: int = 2000
    alpha: float = 1.6
    tol: Optional[float] = None  # early stop once max(r_p, r_q) < tol
    u0_profile: str = "step"
    u0_shift: str = "normal"

    def __post_init__(self):
        if not (self.gamma_m > 0 and self.gamma_c > 0):
            raise ValueError("step sizes gamma_m and gamma_c must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if not 1.0 <= self.alpha < 2.0:
            raise ValueError("over-relaxation factor alpha must lie in [1, 2)")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.eps <= 0 or self.w_E <= 0:
            raise ValueError("eps and w_E must be positive")
        if self.u0_profile not in ("step", "linear"):
            raise ValueError(f"unknown u0_profile {self.u0_profile!r}")
        if self.u0_shift not in ("normal", "cutoff"):
            raise ValueError(f"unknown u0_shift {self.u0_shift!r}")


@dataclass
class AdmmState:
    u: np.ndarray
    p: np.ndarray
    q: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    iteration: int = 0
    energy: list = field(default_factory=list)
    r_p: list = field(default_factory=list)
    r_q: list = field(default_factory=list)

    @classmethod
    def zeros(cls, mesh: TetMesh) -> "AdmmState":
        z = lambda: np.zeros((mesh.n_cells, 3))  # noqa: E731
        return cls(u=np.zeros(mesh.n_edges), p=z(), q=z(), lam=z(), mu=z())


@dataclass(frozen=True, eq=False)
class Gamma0Field:
    u0: np.ndarray
    curl_u0: np.ndarray


@dataclass(frozen=True, eq=False)
class AdmmOperators:
    """Matrices fixed for a mesh and a pair of step sizes."""

    mesh: TetMesh
    gamma_m: float
    gamma_c: float
    centroid: sp.csr_matrix  # NED -> P0^3
    curl: sp.csr_matrix  # NED -> P0^3
    mixed_id: sp.csr_matrix  # <p, v>, (3C x E)
    mixed_curl: sp.csr_matrix  # <p, curl v>
    mass: sp.csr_matrix
    curlcurl: sp.csr_matrix
    factor: Factorization

    @classmethod
    def build(cls, mesh: TetMesh, gamma_m: float, gamma_c: float, method: str = "auto") -> "AdmmOperators":
        M = fe.assemble_mass_ned(mesh)
        K = fe.assemble_curlcurl(mesh)
        B_id, B_curl = fe.assemble_mixed(mesh)
        t = time.perf_counter()
        factor = factorize(gamma_c * K + gamma_m * M, method)
        log.info("factorized %d x %d system in %.1f s", M.shape[0], M.shape[0], time.perf_counter() - t)
        return cls(
            mesh=mesh,
            gamma_m=gamma_m,
            gamma_c=gamma_c,
            centroid=fe.centroid_operator(mesh),
            curl=fe.cell_curl_operator(mesh),
            mixed_id=B_id.T.tocsr(),
            mixed_curl=B_curl.T.tocsr(),
            mass=M,
            curlcurl=K,
            factor=factor,
        )


@dataclass(eq=False)
class RunResult:
    energy: float
    c_m: float
    iterations: int
    r_p: float
    r_q: float
    u: np.ndarray
    p: np.ndarray
    q: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    curl_u0: np.ndarray
    energy_history: np.ndarray
    r_p_history: np.ndarray
    r_q_history: np.ndarray
    seconds: float = 0.0

    @property
    def energy_plus_cm(self) -> float:
        return self.energy + self.c_m


# --------------------------------------------------------------------------
# building blocks


def build_u0(mesh: TetMesh, labels: RegionLabels, shape: Shape, d_gamma: float = 0.0, profile: str = "step", shift: str = "normal") -> Gamma0Field:
    """Initial field whose curl traces the curve {nu . H = 0} on the particle.

    A nodal scalar built from ``nu . H`` on the obstacle nodes is turned into
    edge differences, which are kept only on edges of obstacle cells. The curl
    of that masked gradient lives in the cells just outside the obstacle,
    along the sign change of ``nu . H``. ``profile="step"`` uses the jump of
    ``nu . H`` (unit line multiplicity); ``"linear"`` uses ``nu . H`` itself.
    The shift ``d_gamma`` moves the construction along H: either in the
    argument of the normal (``shift="normal"``) or in the obstacle cutoff
    (``shift="cutoff"``).
    """
    obstacle = labels.obstacle
    if not np.any(obstacle):
        raise ValueError("empty obstacle: no cell lies inside the shape")
    H = shape.H
    obs_nodes = np.unique(mesh.cells[obstacle])
    x = mesh.nodes[obs_nodes]
    if shift == "normal":
        s = shape.normal(x - d_gamma * H, strict=False) @ H
    else:
        s = shape.normal(x, strict=False) @ H
    g = np.zeros(mesh.n_nodes)
    if profile == "step":
        # nodes on Gamma itself (up to rounding in H) get the midpoint value
        s = np.where(np.abs(s) < ZERO_TOL, 0.0, s)
        g[obs_nodes] = 0.5 * (1.0 + np.sign(s))
    else:
        g[obs_nodes] = s

    mask_cells = obstacle
    if shift == "cutoff" and d_gamma:
        shifted = np.all(shape.level(mesh.nodes - d_gamma * H)[mesh.cells] < 0, axis=1)
        mask_cells = obstacle & shifted
    edge_mask = np.zeros(mesh.n_edges, dtype=bool)
    edge_mask[mesh.cell_edges[mask_cells].ravel()] = True
    u0 = np.where(edge_mask, fe.discrete_gradient(mesh) @ g, 0.0)
    curl_u0 = fe.cell_curl(mesh, u0)
    u0.flags.writeable = False
    curl_u0.flags.writeable = False
    return Gamma0Field(u0=u0, curl_u0=curl_u0)


def prox_weighted_l1(pbar, w, gamma: float):
    """Cellwise minimizer of ``w|q| + lam.q + gamma/2 |q - c|^2`` with ``pbar = lam - gamma c``.

    Returns ``((max(|pbar|/w, 1))^-1 - 1) pbar / gamma``; rows of ``pbar`` are
    vectors and ``w`` broadcasts against the row count.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    pbar = np.asarray(pbar, dtype=float)
    w = np.asarray(w, dtype=float)
    norm = np.linalg.norm(pbar, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        shrink = np.where(norm > w, w / norm, 1.0)
    return (shrink - 1.0)[..., None] * pbar / gamma


def u_step_rhs(state: AdmmState, ops: AdmmOperators, curl_u0: np.ndarray) -> np.ndarray:
    a = state.mu + ops.gamma_m * state.p
    b = state.lam + ops.gamma_c * (state.q - curl_u0)
    return ops.mixed_id @ a.ravel() + ops.mixed_curl @ b.ravel()


def solve_u_step(state: AdmmState, ops: AdmmOperators, curl_u0: np.ndarray) -> np.ndarray:
    """Minimizer of the u-part of the augmented Lagrangian (see ``u_step_objective``)."""
    return ops.factor.solve(u_step_rhs(state, ops, curl_u0), state.u)


def u_step_objective(u: np.ndarray, state: AdmmState, ops: AdmmOperators, curl_u0: np.ndarray) -> float:
    """``-<mu, u> - <lam, curl u> + gc/2 |q - curl u - curl u0|^2 + gm/2 |p - u|^2``.

    The last term uses the full L2 norm of the NED field, so that the
    quadratic form is ``gc K + gm M``.
    """
    vol = ops.mesh.volumes
    Pu = (ops.centroid @ u).reshape(-1, 3)
    cu = (ops.curl @ u).reshape(-1, 3)
    lin = -np.sum(vol[:, None] * state.mu * Pu) - np.sum(vol[:, None] * state.lam * cu)
    rq = state.q - cu - curl_u0
    curl_term = 0.5 * ops.gamma_c * np.sum(vol[:, None] * rq * rq)
    # |p - u|^2 = |p|^2 - 2 <p, Pi u> + u' M u   (p is cellwise constant)
    mass_term = 0.5 * ops.gamma_m * (np.sum(vol[:, None] * state.p**2) - 2 * np.sum(vol[:, None] * state.p * Pu) + u @ (ops.mass @ u))
    return float(lin + curl_term + mass_term)


def discrete_energy(p: np.ndarray, q: np.ndarray, labels: RegionLabels, volumes: np.ndarray, beta: float) -> float:
    """``||p_max p||_L1(Omega) + beta ||q||_L1(Omega)``."""
    omega = ~labels.obstacle
    pm = np.linalg.norm(p[omega], axis=1) * labels.p_max[omega]
    qm = np.linalg.norm(q[omega], axis=1)
    return float(volumes[omega] @ pm + beta * (volumes[omega] @ qm))


def _l2(vol, a):
    return float(np.sqrt(vol @ np.einsum("ij,ij->i", a, a)))


# --------------------------------------------------------------------------
# driver


def admm_run(
    mesh: TetMesh,
    labels: RegionLabels,
    shape: Shape,
    params: AdmmParams,
    ops: Optional[AdmmOperators] = None,
    gamma0: Optional[Gamma0Field] = None,
    callback: Optional[Callable[[AdmmState], None]] = None,
    compute_cm: bool = True,
) -> RunResult:
    """Run the ADMM iteration for a fixed number of steps.

    ``ops`` and ``gamma0`` may be passed in to reuse the factorization and
    the initial line field across runs on the same mesh. ``callback`` is
    called with the state after every iteration, including one that
    produced non-finite values, before the divergence error is raised.
    """
    start = time.perf_counter()
    if ops is None or ops.mesh is not mesh or (ops.gamma_m, ops.gamma_c) != (params.gamma_m, params.gamma_c):
        ops = AdmmOperators.build(mesh, params.gamma_m, params.gamma_c)
    if gamma0 is None:
        d = mesh.h if params.d_gamma is None else params.d_gamma
        gamma0 = build_u0(mesh, labels, shape, d, params.u0_profile, params.u0_shift)
    cu0 = gamma0.curl_u0
    vol = mesh.volumes
    gm, gc, alpha = params.gamma_m, params.gamma_c, params.alpha
    p_max = labels.p_max
    q_max = np.where(labels.obstacle, params.w_E, params.beta)

    state = AdmmState.zeros(mesh)
    for k in range(1, params.iterations + 1):
        state.u = solve_u_step(state, ops, cu0)
        Pu = (ops.centroid @ state.u).reshape(-1, 3)
        cu = (ops.curl @ state.u).reshape(-1, 3) + cu0
        Pu_hat = alpha * Pu + (1 - alpha) * state.p
        cu_hat = alpha * cu + (1 - alpha) * state.q

        state.q = prox_weighted_l1(state.lam - gc * cu_hat, q_max, gc)
        state.p = prox_weighted_l1(state.mu - gm * Pu_hat, p_max, gm)
        state.lam = state.lam + gc * (state.q - cu_hat)
        state.mu = state.mu + gm * (state.p - Pu_hat)
        state.iteration = k

        energy = discrete_energy(state.p, state.q, labels, vol, params.beta)
        r_p, r_q = _l2(vol, state.p - Pu), _l2(vol, state.q - cu)
        state.energy.append(energy)
        state.r_p.append(r_p)
        state.r_q.append(r_q)
        if callback is not None:
            callback(state)
        if not (np.isfinite(energy) and np.isfinite(r_p) and np.isfinite(r_q)):
            raise AdmmDivergenceError(k)
        if params.tol is not None and max(r_p, r_q) < params.tol:
            break

    energy = state.energy[-1] if state.energy else discrete_energy(state.p, state.q, labels, vol, params.beta)
    return RunResult(
        energy=energy,
        c_m=compute_c_m(mesh, labels, shape) if compute_cm else float("nan"),
        iterations=state.iteration,
        r_p=state.r_p[-1] if state.r_p else 0.0,
        r_q=state.r_q[-1] if state.r_q else 0.0,
        u=state.u,
        p=state.p,
        q=state.q,
        lam=state.lam,
        mu=state.mu,
        curl_u0=cu0,
        energy_history=np.asarray(state.energy),
        r_p_history=np.asarray(state.r_p),
        r_q_history=np.asarray(state.r_q),
        seconds=time.perf_counter() - start,
    )


# --------------------------------------------------------------------------
# post-processing


def compute_c_m(mesh: TetMesh, labels: RegionLabels, shape: Shape) -> float:
    """Orientation constant ``1/2 int_M (1 - |nu . H|)`` from the boundary layer.

    The layer integral is divided by the mean layer thickness, estimated as
    layer volume over the area of the interpolated zero level set.
    """
    layer = labels.layer
    if not np.any(layer):
        return 0.0
    vol = mesh.volumes[layer]
    area = layer_surface_area(mesh, labels)
    delta = vol.sum() / area
    nu = shape.normal(mesh.centroids[layer], strict=False)
    return float(0.5 / delta * (vol @ (1.0 - np.abs(nu @ shape.H))))


@dataclass(frozen=True)
class Diagnostics:
    region_masses: dict
    component_count: int
    side_fraction: float


def line_components(mesh: TetMesh, q: np.ndarray, threshold: float = 0.1, floor: float = 0.0) -> tuple[int, np.ndarray]:
    """Connected components (facet adjacency) of cells carrying line mass.

    A cell is selected when ``|q| |T|`` exceeds ``threshold`` times the
    largest cell value and also exceeds ``floor``.
    """
    m = np.linalg.norm(q, axis=1) * mesh.volumes
    if m.max(initial=0.0) <= floor:
        return 0, np.full(mesh.n_cells, -1)
    sel = (m > threshold * m.max()) & (m > floor)
    idx = np.flatnonzero(sel)
    renum = np.full(mesh.n_cells, -1)
    renum[idx] = np.arange(len(idx))
    pairs = mesh.cell_neighbors()
    pairs = pairs[sel[pairs[:, 0]] & sel[pairs[:, 1]]]
    graph = sp.coo_matrix((np.ones(len(pairs)), (renum[pairs[:, 0]], renum[pairs[:, 1]])), shape=(len(idx),) * 2)
    n, comp = connected_components(graph, directed=False)
    out = np.full(mesh.n_cells, -1)
    out[idx] = comp
    return int(n), out


def line_floor(mesh: TetMesh, labels: RegionLabels, fraction: float = 0.1) -> float:
    """Smallest ``|q| |T|`` still counted as carrying line mass.

    A unit-multiplicity line crossing a cell contributes about its diameter;
    the floor is ``fraction`` of the mean layer-cell diameter, spread over
    the six cells that share an edge.
    """
    vol = mesh.volumes[labels.layer] if np.any(labels.layer) else mesh.volumes
    return fraction * float(np.mean(np.cbrt(6.0 * vol))) / 6.0


def diagnostics(mesh: TetMesh, labels: RegionLabels, shape: Shape, result: RunResult, threshold: float = 0.1) -> Diagnostics:
    pm = np.linalg.norm(result.p, axis=1) * mesh.volumes
    masses = {
        "obstacle": float(pm[labels.obstacle].sum()),
        "layer": float(pm[labels.layer].sum()),
        "exterior": float(pm[labels.exterior].sum()),
    }
    n, _ = line_components(mesh, result.q, threshold, line_floor(mesh, labels))
    total = pm.sum()
    upper = (mesh.centroids - shape.center) @ shape.H > 0
    side = float(pm[upper].sum() / total) if total > 0 else 0.5
    return Diagnostics(region_masses=masses, component_count=n, side_fraction=side)
