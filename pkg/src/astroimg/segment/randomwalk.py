"""Random-walker segmentation on the 4-connected pixel lattice."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from astroimg.core import as_image, rescale_unit
from astroimg.errors import ParameterError, SingularityError
from astroimg.segment.markers import MarkerSet

DEFAULT_BETA = 90.0
CG_TOL = 1e-8


def lattice_weights(img: np.ndarray, beta: float):
    """Edge list ``(i, j, w)`` of the 4-connected lattice, ``w = exp(-beta (I_i - I_j)^2)``."""
    h, w = img.shape
    idx = np.arange(h * w).reshape(h, w)
    horiz = (idx[:, :-1].ravel(), idx[:, 1:].ravel(), (img[:, :-1] - img[:, 1:]).ravel())
    vert = (idx[:-1, :].ravel(), idx[1:, :].ravel(), (img[:-1, :] - img[1:, :]).ravel())
    i = np.concatenate([horiz[0], vert[0]])
    j = np.concatenate([horiz[1], vert[1]])
    diff = np.concatenate([horiz[2], vert[2]])
    return i, j, np.exp(-beta * diff * diff)


def graph_laplacian(n: int, i, j, w) -> sparse.csr_matrix:
    adj = sparse.coo_matrix((np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
    adj = adj.tocsr()
    degree = np.asarray(adj.sum(axis=1)).ravel()
    return (sparse.diags(degree) - adj).tocsr()


def conjugate_gradient(A, b, tol: float = CG_TOL, maxiter: int | None = None):
    """Jacobi-preconditioned CG for symmetric positive-definite ``A``.

    Stops when ``||b - A x|| <= tol * ||b||``. Returns ``(x, iterations, converged)``.
    """
    n = b.shape[0]
    if maxiter is None:
        maxiter = 10 * n
    x = np.zeros(n)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0:
        return x, 0, True
    inv_diag = 1.0 / A.diagonal()
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if float(np.linalg.norm(r)) <= tol * bnorm:
            return x, it, True
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter, False


def random_walker(img, markers: MarkerSet, beta: float = DEFAULT_BETA, tol: float = CG_TOL, threads: int = 1):
    """Grady's random walker.

    Intensities are max-min rescaled to [0, 1] before weighting. For every
    label the combinatorial Dirichlet problem ``L_U x = -B^T m`` is solved on
    the unmarked pixels; probabilities are then renormalised to sum to one.

    Returns ``(labels, probabilities)`` where ``probabilities`` has shape
    ``(n_labels, h, w)`` ordered by ascending label value.
    """
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    img = as_image(img)
    markers.validate(img.shape, min_labels=2)
    h, w = img.shape
    n = h * w
    seeds = markers.to_array(img.shape).ravel()
    label_values = np.array(markers.labels)
    norm = rescale_unit(img, constant_value=0.0)

    i, j, wts = lattice_weights(norm, beta)
    live = wts > 0
    graph = sparse.coo_matrix((wts[live], (i[live], j[live])), shape=(n, n))
    ncomp, comp = connected_components(graph, directed=False)
    seeded = np.zeros(ncomp, dtype=bool)
    seeded[comp[seeds > 0]] = True
    if not seeded.all():
        raise SingularityError("a connected region of the graph contains no marker")

    L = graph_laplacian(n, i, j, wts)
    unmarked = np.flatnonzero(seeds == 0)
    marked = np.flatnonzero(seeds > 0)
    probs = np.zeros((label_values.size, n))
    for k, lab in enumerate(label_values):
        probs[k, marked] = (seeds[marked] == lab).astype(np.float64)

    if unmarked.size:
        L_u = L[unmarked][:, unmarked].tocsr()
        B = L[unmarked][:, marked].tocsr()

        def solve(k):
            rhs = -(B @ probs[k, marked])
            x, _, ok = conjugate_gradient(L_u, rhs, tol=tol)
            if not ok:
                warnings.warn(f"random walker CG did not reach tol={tol} for label {label_values[k]}", RuntimeWarning)
            return x

        threads = max(1, int(threads))
        if threads == 1:
            sols = [solve(k) for k in range(label_values.size)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                sols = list(pool.map(solve, range(label_values.size)))
        for k, x in enumerate(sols):
            probs[k, unmarked] = np.clip(x, 0.0, 1.0)
        total = probs[:, unmarked].sum(axis=0)
        if np.any(total <= 0):
            raise SingularityError("random walker produced a pixel with no label mass")
        probs[:, unmarked] /= total

    labels = label_values[np.argmax(probs, axis=0)].reshape(h, w)
    return labels, probs.reshape(label_values.size, h, w)
