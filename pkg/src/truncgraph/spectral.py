"""Ascending Laplacian eigenpairs: closed forms, iterative partial solves, extension.

A :class:`SpectralBasis` holds the ``m`` smallest eigenpairs of a graph
Laplacian. Closed forms cover paths and 3-D grids; anything else goes
through a shift-invert Lanczos solve. Bases can be grown on demand without
touching the pairs already computed.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from ._validation import check_count

PATH = "closed-form-path"
GRID = "closed-form-grid"
ITERATIVE = "iterative"
DENSE = "dense"

# L - shift*I with shift < 0 is positive definite for any Laplacian
_SHIFT = -1e-2


class ConvergenceError(RuntimeError):
    """Raised when the iterative eigensolver stops before converging."""


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """The ``m`` smallest eigenpairs of an ``n``-vertex graph Laplacian.

    Attributes
    ----------
    eigenvalues : ndarray of shape (m,)
        Ascending.
    eigenvectors : ndarray of shape (n, m)
        Orthonormal columns in Fortran order, so leading column blocks are
        contiguous. Each column's first non-negligible entry is positive.
    source : str
        One of ``closed-form-path``, ``closed-form-grid``, ``iterative``,
        ``dense``.
    dims : tuple of int
        Generator shape for closed forms (``(n,)`` or ``(nx, ny, nt)``),
        empty otherwise.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source: str
    dims: tuple = ()

    def __post_init__(self):
        vals = np.ascontiguousarray(self.eigenvalues, dtype=np.float64)
        vecs = np.asfortranarray(self.eigenvectors, dtype=np.float64)
        if vecs.ndim != 2 or vals.shape != (vecs.shape[1],):
            raise ValueError("eigenvalues/eigenvectors shape mismatch")
        vals.setflags(write=False)
        vecs.setflags(write=False)
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "eigenvectors", vecs)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def n(self):
        return self.eigenvectors.shape[0]

    @property
    def m(self):
        return self.eigenvectors.shape[1]

    def project(self, z, stop, start=0):
        """Coefficients ``u_i^T z`` for ``start <= i < stop``."""
        return self.eigenvectors[:, start:stop].T @ z

    def synthesize(self, g):
        """``sum_i g_i u_i`` over the leading ``len(g)`` eigenvectors."""
        return self.eigenvectors[:, : len(g)] @ g


def _fix_signs(vecs):
    """Flip columns so that the first entry with magnitude above noise is positive."""
    vecs = np.array(vecs, dtype=np.float64, order="F")
    if vecs.size == 0:
        return vecs
    thresh = 1e-10 * np.abs(vecs).max(axis=0)
    first = np.argmax(np.abs(vecs) > thresh, axis=0)
    signs = np.sign(vecs[first, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs *= signs
    return vecs


def _clip_zero(vals):
    # roundoff can push the Laplacian's zero eigenvalue slightly negative
    vals = np.array(vals, dtype=np.float64)
    vals[(vals < 0) & (vals > -1e-9)] = 0.0
    return vals


def _path_values(n):
    return 4.0 * np.sin(np.pi * np.arange(n) / (2 * n)) ** 2


def _path_vectors(n, cols):
    """Columns of the path eigenbasis for frequency indices ``cols`` (0-based)."""
    i = np.arange(n)[:, None] + 0.5
    cols = np.asarray(cols)
    U = np.sqrt(2.0 / n) * np.cos(np.pi * i * cols[None, :] / n)
    U[:, cols == 0] = 1.0 / np.sqrt(n)
    return U


def path_eigenpairs(n, m=None):
    """First ``m`` eigenpairs of the ``n``-vertex path Laplacian in closed form.

    Eigenvalue ``j`` (0-based) is ``4 sin^2(pi j / 2n)`` with eigenvector
    entries ``sqrt(2/n) cos(pi (i + 1/2) j / n)``; the constant vector for
    ``j = 0``.
    """
    n = check_count(n, "n", minimum=1)
    m = n if m is None else check_count(m, "m", minimum=1)
    if m > n:
        raise ValueError(f"m={m} exceeds n={n}")
    return SpectralBasis(_path_values(n)[:m], _path_vectors(n, np.arange(m)), PATH, (n,))


def _grid_order(nx, ny, nt):
    lam, mu, nu = _path_values(nx), _path_values(ny), _path_values(nt)
    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nt), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    vals = lam[i] + mu[j] + nu[k]
    order = np.lexsort((k, j, i, vals))
    return vals[order], i[order], j[order], k[order]


def grid3d_eigenpairs(nx, ny, nt, m):
    """``m`` smallest eigenpairs of the ``nx x ny x nt`` grid Laplacian.

    Eigenvalues are sums of the three path spectra, eigenvectors the
    matching Kronecker products (frame factor outermost, column factor
    innermost, consistent with :func:`truncgraph.graph.grid_index`). Equal
    eigenvalues are ordered by their (column, row, frame) frequency indices.
    Only the requested ``m`` columns are materialised.
    """
    nx = check_count(nx, "nx", minimum=1)
    ny = check_count(ny, "ny", minimum=1)
    nt = check_count(nt, "nt", minimum=1)
    m = check_count(m, "m", minimum=1)
    n = nx * ny * nt
    if m > n:
        raise ValueError(f"m={m} exceeds number of vertices {n}")
    vals, i, j, k = _grid_order(nx, ny, nt)
    U = _path_vectors(nx, i[:m])
    V = _path_vectors(ny, j[:m])
    W = _path_vectors(nt, k[:m])
    vecs = np.einsum("ta,ra,ca->trca", W, V, U).reshape(n, m)
    return SpectralBasis(vals[:m], vecs, GRID, (nx, ny, nt))


def full_eigensolve(L):
    """Complete eigendecomposition by a dense symmetric solver.

    Only sensible for graphs of a few thousand vertices; this is what the
    untruncated baseline needs.
    """
    dense = L.toarray() if sparse.issparse(L) else np.asarray(L, dtype=np.float64)
    vals, vecs = np.linalg.eigh(dense)
    return SpectralBasis(_clip_zero(vals), _fix_signs(vecs), DENSE)


def _rayleigh_ritz(L, V):
    """Eigen-rotate an orthonormal block ``V`` so that ``V^T L V`` is diagonal."""
    H = V.T @ (L @ V)
    H = 0.5 * (H + H.T)
    theta, Q = np.linalg.eigh(H)
    return theta, V @ Q


def _deflated_smallest(L, count, known, tol, maxiter):
    """``count`` smallest eigenpairs of ``L`` orthogonal to the columns of ``known``.

    Lanczos on the projected inverse ``P (L - s I)^{-1} P`` with
    ``P = I - known known^T``: the known subspace maps to zero, so the
    dominant eigenvalues belong to the next-smallest eigenpairs of ``L``.
    """
    n = L.shape[0]
    L = sparse.csc_matrix(L, dtype=np.float64)
    lu = spla.splu(L - _SHIFT * sparse.identity(n, format="csc"))
    K = known

    def project(x):
        if K is None or K.shape[1] == 0:
            return x
        return x - K @ (K.T @ x)

    def matvec(x):
        x = np.asarray(x, dtype=np.float64).ravel()
        return project(lu.solve(project(x)))

    op = spla.LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    ncv = min(n, max(2 * count + 1, count + 20))
    v0 = project(np.random.default_rng(0).standard_normal(n))
    try:
        _, vecs = spla.eigsh(op, k=count, which="LA", ncv=ncv, tol=tol, maxiter=maxiter, v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(
            f"eigensolver converged {len(exc.eigenvalues)} of {count} pairs "
            f"(n={n}, maxiter={maxiter}, tol={tol})"
        ) from exc
    vecs = project(vecs)
    vecs, _ = np.linalg.qr(vecs)
    if K is not None and K.shape[1]:
        vecs = project(vecs)
        vecs, _ = np.linalg.qr(vecs)
    theta, vecs = _rayleigh_ritz(L, vecs)
    return _clip_zero(theta), vecs


def _dense_tail(L, known, count):
    dense = L.toarray() if sparse.issparse(L) else np.asarray(L, dtype=np.float64)
    n = dense.shape[0]
    if known is not None and known.shape[1]:
        # orthonormal complement of the known block, then solve there
        Q, _ = np.linalg.qr(known, mode="complete")
        C = Q[:, known.shape[1]:]
    else:
        C = np.eye(n)
    H = C.T @ dense @ C
    theta, Y = np.linalg.eigh(0.5 * (H + H.T))
    return _clip_zero(theta[:count]), C @ Y[:, :count]


def partial_eigensolve(L, m, tol=1e-10, maxiter=None):
    """``m`` smallest eigenpairs of a sparse symmetric PSD matrix.

    Uses shift-invert Lanczos (ARPACK) followed by a Rayleigh-Ritz cleanup.
    When ``m`` is within one of the dimension, ARPACK cannot be used and a
    dense solve is done instead.

    Raises
    ------
    ConvergenceError
        If ARPACK does not converge within ``maxiter`` (default ``100 * m``)
        restarts.
    """
    n = L.shape[0]
    m = check_count(m, "m", minimum=1)
    if m > n:
        raise ValueError(f"m={m} exceeds dimension {n}")
    if maxiter is None:
        maxiter = 100 * m
    if m >= n - 1:
        theta, vecs = _dense_tail(L, None, m)
        return SpectralBasis(theta, _fix_signs(vecs), ITERATIVE)
    theta, vecs = _deflated_smallest(L, m, None, tol, maxiter)
    return SpectralBasis(theta, _fix_signs(vecs), ITERATIVE)


def extend_basis(basis, L=None, extra=1, tol=1e-10, maxiter=None):
    """Return a basis with ``extra`` more eigenpairs; existing pairs are kept as-is.

    Closed-form bases are regenerated from their shape and need no matrix.
    Other bases need the Laplacian ``L`` they came from; the new pairs are
    found in the orthogonal complement of the current eigenvectors.
    """
    extra = check_count(extra, "extra", minimum=0)
    if extra == 0:
        return basis
    total = basis.m + extra
    if total > basis.n:
        raise ValueError(f"cannot extend to {total} pairs on {basis.n} vertices")
    if basis.source == PATH and basis.dims:
        new = path_eigenpairs(basis.dims[0], total)
    elif basis.source == GRID and basis.dims:
        new = grid3d_eigenpairs(*basis.dims, total)
    else:
        if L is None:
            raise ValueError("extending a non closed-form basis needs the Laplacian")
        if L.shape != (basis.n, basis.n):
            raise ValueError("Laplacian does not match basis dimension")
        U = np.asarray(basis.eigenvectors)
        if total >= basis.n - 1 or extra >= basis.n - basis.m - 1:
            theta, vecs = _dense_tail(L, U, extra)
        else:
            mi = 100 * total if maxiter is None else maxiter
            theta, vecs = _deflated_smallest(L, extra, U, tol, mi)
        vals = np.concatenate([basis.eigenvalues, theta])
        vecs = np.concatenate([U, _fix_signs(vecs)], axis=1)
        return SpectralBasis(vals, vecs, basis.source, basis.dims)
    # regenerate, but keep the old prefix bit-for-bit
    vecs = np.array(new.eigenvectors, order="F")
    vecs[:, : basis.m] = basis.eigenvectors
    vals = new.eigenvalues.copy()
    vals[: basis.m] = basis.eigenvalues
    return SpectralBasis(vals, vecs, basis.source, basis.dims)


def residual_check(basis, L):
    """Largest eigen-residual ``max_i ||L u_i - lambda_i u_i||_2``."""
    if L.shape != (basis.n, basis.n):
        raise ValueError(f"matrix shape {L.shape} does not match basis dimension {basis.n}")
    U = basis.eigenvectors
    if basis.m == 0:
        return 0.0
    R = L @ U - U * basis.eigenvalues[None, :]
    return float(np.max(np.linalg.norm(R, axis=0)))


def orthonormality_error(basis):
    U = basis.eigenvectors
    return float(np.max(np.abs(U.T @ U - np.eye(basis.m))))
