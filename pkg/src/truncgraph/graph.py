"""Simple undirected graphs, the experiment graph families, and Laplacians.

Vertices are 0-based integers ``0 .. n-1`` throughout the library. The
1-based convention only appears in the edge-list text format (see
:func:`truncgraph.io.write_edgelist`).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from ._validation import check_count, check_features, check_probability


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph stored as a sorted edge array.

    Parameters
    ----------
    n : int
        Number of vertices.
    edges : ndarray of shape (n_edges, 2)
        Each row ``(u, v)`` with ``u < v``; rows sorted lexicographically and
        unique. Use :meth:`from_edges` to build one from arbitrary pairs.
    """

    n: int
    edges: np.ndarray
    degree: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise ValueError("edges must satisfy u < v (no self-loops)")
            order = np.lexsort((edges[:, 1], edges[:, 0]))
            if not np.array_equal(order, np.arange(len(edges))):
                raise ValueError("edges must be sorted")
            if np.any(np.all(np.diff(edges, axis=0) == 0, axis=1)):
                raise ValueError("duplicate edges")
        edges.setflags(write=False)
        deg = np.bincount(edges.ravel(), minlength=self.n).astype(np.int64)
        deg.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "degree", deg)

    @classmethod
    def from_edges(cls, n, pairs, simplify=False):
        """Build a graph from unordered vertex pairs.

        With ``simplify=True`` self-loops and repeated pairs are dropped;
        otherwise either one raises ``ValueError``.
        """
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        loops = pairs[:, 0] == pairs[:, 1]
        if loops.any():
            if not simplify:
                raise ValueError("self-loop in edge list")
            pairs = pairs[~loops]
        pairs = np.sort(pairs, axis=1)
        uniq = np.unique(pairs, axis=0)
        if len(uniq) != len(pairs) and not simplify:
            raise ValueError("duplicate edge in edge list")
        return cls(n, uniq)

    @property
    def n_edges(self):
        return len(self.edges)

    def adjacency(self):
        """Symmetric 0/1 adjacency as CSR."""
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(u))
        A = sparse.coo_matrix(
            (data, (np.concatenate([u, v]), np.concatenate([v, u]))),
            shape=(self.n, self.n),
        )
        return A.tocsr()

    def is_connected(self):
        if self.n <= 1:
            return True
        n_comp, _ = connected_components(self.adjacency(), directed=False)
        return n_comp == 1


def laplacian(g):
    """Positive semi-definite combinatorial Laplacian ``D - A`` as CSR."""
    A = g.adjacency()
    L = sparse.diags(g.degree.astype(np.float64)) - A
    return sparse.csr_matrix(L)


def build_path(n):
    n = check_count(n, "n", minimum=2)
    i = np.arange(n - 1)
    return Graph(n, np.column_stack([i, i + 1]))


def grid_index(t, r, c, nx, ny):
    """Vertex id of pixel (row ``r``, column ``c``) in frame ``t`` (all 0-based)."""
    return t * nx * ny + r * nx + c


def build_grid3d(nx, ny, nt):
    """Cartesian product of three paths: ``nx`` columns, ``ny`` rows, ``nt`` frames.

    Pixels are linked to their 4-neighbours within a frame and to the same
    pixel in the adjacent frames. Vertex ids follow :func:`grid_index`.
    """
    nx = check_count(nx, "nx", minimum=1)
    ny = check_count(ny, "ny", minimum=1)
    nt = check_count(nt, "nt", minimum=1)
    ids = np.arange(nx * ny * nt).reshape(nt, ny, nx)
    pairs = [
        np.column_stack([ids[:, :, :-1].ravel(), ids[:, :, 1:].ravel()]),
        np.column_stack([ids[:, :-1, :].ravel(), ids[:, 1:, :].ravel()]),
        np.column_stack([ids[:-1].ravel(), ids[1:].ravel()]),
    ]
    return Graph.from_edges(nx * ny * nt, np.concatenate(pairs))


def build_ring(n):
    n = check_count(n, "n", minimum=3)
    i = np.arange(n)
    return Graph.from_edges(n, np.column_stack([i, (i + 1) % n]))


def build_watts_strogatz(n, rewire_prob, rng=None):
    """Rewired ring, cleaned of loops/multi-edges, restricted to its largest component.

    Edges of the ``n``-cycle are visited in sorted order; each one, with
    probability ``rewire_prob``, has its second endpoint replaced by a
    uniformly drawn vertex. A draw that would produce a self-loop leaves the
    edge as it was. Multi-edges are merged afterwards.

    The result is relabelled to ``0 .. m-1``, keeping the original order.
    """
    n = check_count(n, "n", minimum=3)
    p = check_probability(rewire_prob, "rewire_prob")
    rng = np.random.default_rng(rng)
    edges = build_ring(n).edges.copy()
    coins = rng.random(len(edges))
    targets = rng.integers(0, n, size=len(edges))
    for e in range(len(edges)):
        if coins[e] < p and targets[e] != edges[e, 0]:
            edges[e, 1] = targets[e]
    ring = Graph.from_edges(n, edges, simplify=True)
    return largest_connected_component(ring)[0]


def largest_connected_component(g):
    """Induced subgraph on the largest component, relabelled contiguously.

    Ties between equally large components go to the one holding the smallest
    vertex id. Relabelling preserves the original vertex order.

    Returns
    -------
    graph : Graph
    old_ids : ndarray
        ``old_ids[new] == old``.
    """
    if g.n == 0:
        return g, np.arange(0)
    _, comp = connected_components(g.adjacency(), directed=False)
    sizes = np.bincount(comp)
    # component labels are assigned in order of first vertex, so argmax picks
    # the component containing the smallest vertex among the largest ones
    keep = np.flatnonzero(comp == np.argmax(sizes))
    new_id = np.full(g.n, -1, dtype=np.int64)
    new_id[keep] = np.arange(len(keep))
    mask = (new_id[g.edges[:, 0]] >= 0) & (new_id[g.edges[:, 1]] >= 0)
    sub = new_id[g.edges[mask]]
    return Graph.from_edges(len(keep), sub), keep


def build_knn_graph(features, k, chunk_size=512):
    """Symmetrised k-nearest-neighbour graph under Euclidean distance.

    Every point links to its ``k`` nearest other points (equal distances are
    resolved toward the lower index); an edge is kept if either endpoint
    selected the other. A disconnected result triggers a ``UserWarning``.
    """
    X = check_features(features)
    n = X.shape[0]
    k = check_count(k, "k", minimum=1)
    if k >= n:
        raise ValueError(f"k must be < number of points ({n}), got {k}")
    nbrs = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, chunk_size):
        stop = min(start + chunk_size, n)
        d = cdist(X[start:stop], X, metric="sqeuclidean")
        d[np.arange(stop - start), np.arange(start, stop)] = np.inf
        order = np.argsort(d, axis=1, kind="stable")
        nbrs[start:stop] = order[:, :k]
    rows = np.repeat(np.arange(n), k)
    g = Graph.from_edges(n, np.column_stack([rows, nbrs.ravel()]), simplify=True)
    if not g.is_connected():
        warnings.warn("k-NN graph is disconnected", UserWarning, stacklevel=2)
    return g
