"""Independent reference computations shared by the unit and acceptance tests."""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import minimum_spanning_tree

from plateau_fem import fespace as fe
from plateau_fem.admm import AdmmState
from plateau_fem.linsolve import factorize

GOLDEN = (np.sqrt(5) - 1) / 2


def prox_objective(q, pbar, w, gamma):
    """``w|q| + pbar.q + gamma/2 |q|^2``, equal to the cell objective up to a constant."""
    return w * np.linalg.norm(q, axis=-1) + np.einsum("...i,...i->...", pbar, q) + 0.5 * gamma * np.einsum("...i,...i->...", q, q)


def golden_section_along(pbar, w, gamma, iters=200):
    """Minimize the prox objective over q = -t pbar/|pbar|, t in [0, |pbar|/gamma], vectorized."""
    norm = np.linalg.norm(pbar, axis=1)
    d = -np.divide(pbar, norm[:, None], out=np.zeros_like(pbar), where=norm[:, None] > 0)
    f = lambda t: prox_objective(t[:, None] * d, pbar, w, gamma)  # noqa: E731
    a, b = np.zeros_like(norm), norm / gamma + 1.0
    for _ in range(iters):
        c = b - GOLDEN * (b - a)
        e = a + GOLDEN * (b - a)
        left = f(c) < f(e)
        b = np.where(left, e, b)
        a = np.where(left, a, c)
    return 0.5 * (a + b)[:, None] * d


def random_state(mesh, rng):
    shape = (mesh.n_cells, 3)
    return AdmmState(u=np.zeros(mesh.n_edges), p=rng.standard_normal(shape), q=rng.standard_normal(shape), lam=rng.standard_normal(shape), mu=rng.standard_normal(shape))


def stationarity_terms(mesh, u, state, ops, cu0, v):
    """Terms of the directional derivative of the augmented Lagrangian at ``u`` along ``v``.

    Built from quadrature and cellwise curls rather than the assembled matrices.
    """
    vol = mesh.volumes[:, None]
    uq = fe.evaluate_ned(mesh, u, fe.QUAD_BARY)
    cu = fe.cell_curl(mesh, u)
    vq = fe.evaluate_ned(mesh, v, fe.QUAD_BARY)
    cv = fe.cell_curl(mesh, v)
    pv = fe.project_p0(mesh, v)
    return [
        -np.sum(vol * state.mu * pv),
        -np.sum(vol * state.lam * cv),
        -ops.gamma_c * np.sum(vol * (state.q - cu - cu0) * cv),
        ops.gamma_m * np.sum(vol[:, :, None] * fe.QUAD_WEIGHTS[None, :, None] * (uq - state.p[:, None, :]) * vq),
    ]


def smallest_eigenvalue(A, iters=30):
    """Inverse power iteration with a reusable factorization (fails if A is not SPD)."""
    f = factorize(A)
    x = np.random.default_rng(0).standard_normal(A.shape[0])
    for _ in range(iters):
        y = f.solve(x)
        x = y / np.linalg.norm(y)
    return float(x @ (A @ x))


def rank_margins(mesh):
    """Smallest eigenvalues certifying rank(G) = V - 1 and dim ker(C) = V - 1.

    The grounded graph Laplacian is SPD iff rank(G) = V - 1. Gradients span
    ker(C) iff C has full column rank on the edges outside a spanning tree
    (a curl-free field can be made to vanish on the tree by subtracting a
    gradient), and then dim ker(C) = rank(G).
    """
    G = fe.discrete_gradient(mesh)
    C = fe.discrete_curl(mesh)
    lam_grad = smallest_eigenvalue((G.T @ G).tocsr()[1:, 1:])
    e = mesh.edges
    weights = sp.coo_matrix((np.arange(1.0, len(e) + 1), (e[:, 0], e[:, 1])), shape=(mesh.n_nodes,) * 2)
    tree = np.zeros(len(e), dtype=bool)
    tree[(minimum_spanning_tree(weights).tocoo().data - 1).astype(int)] = True
    assert tree.sum() == mesh.n_nodes - 1
    Cc = C[:, ~tree]
    return lam_grad, smallest_eigenvalue((Cc.T @ Cc).tocsr())
