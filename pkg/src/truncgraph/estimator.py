"""scikit-learn style classifiers over the vertices of a fixed graph.

The graph enters through the constructor (a Laplacian, a precomputed
:class:`~truncgraph.spectral.SpectralBasis`, or both). ``X`` in ``fit`` and
``predict`` is a column of 0-based vertex ids, so the estimators work with
``cross_val_score``, ``GridSearchCV`` and friends::

    clf = TruncatedSeriesClassifier(laplacian=L, n_iter=4000, random_state=0)
    clf.fit(train_vertices, train_labels)
    clf.score(test_vertices, test_labels)
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import spectral
from ._validation import check_binary_labels, check_vertices
from .model import Hyperparams, ProposalSpec, prior_k_cdf
from .sampler import LabelData, run_baseline_full, run_chain, summarize


def default_basis_size(n, gamma, mass=0.99):
    """Smallest ``l`` holding ``mass`` of the truncation prior (``n`` when gamma is 0)."""
    if gamma == 0:
        return n
    l = int(np.ceil(-np.log1p(-mass * -np.expm1(-gamma * n)) / gamma))
    l = min(max(l, 1), n)
    while l < n and prior_k_cdf(l, gamma, n) < mass:
        l += 1
    return l


class TruncatedSeriesClassifier(ClassifierMixin, BaseEstimator):
    """Bayesian probit classifier with a randomly truncated Laplacian eigenbasis prior.

    Parameters
    ----------
    laplacian : sparse matrix, optional
        Graph Laplacian ``D - A``. Needed unless ``basis`` is given, and for
        ``mode="extend"`` with a non closed-form basis.
    basis : SpectralBasis, optional
        Precomputed eigenpairs. Its size caps ``k`` in ``mode="reject"``.
    n_eigenpairs : int, optional
        Eigenpairs to compute when no basis is given. Defaults to the
        smallest count carrying 99% of the truncation prior.
    q, gamma, a, b : float
        Laplacian power, truncation rate (None for ``20 / n``), gamma prior
        shape and rate on the scale.
    proposal : ProposalSpec, optional
        Random walk on ``k``; default ``k - 2 + Binomial(4, 1/2)``.
    n_iter, burnin, thinning : int
        Chain length, discarded prefix, and storage stride for ``f``.
    mode : {"reject", "extend"}
        What to do when ``k`` is proposed beyond the computed eigenpairs.
    level : float
        Credible level for :meth:`credible_interval`.
    random_state : int, optional

    Attributes
    ----------
    basis_ : SpectralBasis
    trace_ : Trace
    summary_ : PosteriorSummary
    classes_ : ndarray, always ``[0, 1]``
    """

    def __init__(
        self,
        laplacian=None,
        basis=None,
        n_eigenpairs=None,
        q=1.0,
        gamma=None,
        a=0.0,
        b=0.0,
        proposal=None,
        n_iter=10_000,
        burnin=2_000,
        thinning=5,
        mode="reject",
        level=0.95,
        random_state=None,
    ):
        self.laplacian = laplacian
        self.basis = basis
        self.n_eigenpairs = n_eigenpairs
        self.q = q
        self.gamma = gamma
        self.a = a
        self.b = b
        self.proposal = proposal
        self.n_iter = n_iter
        self.burnin = burnin
        self.thinning = thinning
        self.mode = mode
        self.level = level
        self.random_state = random_state

    def _n_vertices(self):
        if self.basis is not None:
            return self.basis.n
        if self.laplacian is None:
            raise ValueError("either laplacian or basis must be given")
        return self.laplacian.shape[0]

    def _hyperparams(self, n):
        proposal = self.proposal if self.proposal is not None else ProposalSpec()
        return Hyperparams(self.q, self.gamma, self.a, self.b, proposal).resolve(n)

    def _resolve_basis(self, hyper):
        if self.basis is not None:
            return self.basis
        n = self.laplacian.shape[0]
        m = self.n_eigenpairs or default_basis_size(n, hyper.gamma)
        return spectral.partial_eigensolve(self.laplacian, m)

    def _seed(self):
        rs = self.random_state
        if rs is None or isinstance(rs, (int, np.integer)):
            return rs
        return rs.integers(2**32) if hasattr(rs, "integers") else rs.randint(2**32)

    def _run(self, data, basis, hyper):
        return run_chain(
            data, basis, hyper, self.n_iter, self.burnin, self.thinning,
            seed=self._seed(), mode=self.mode, laplacian=self.laplacian,
        )

    def fit(self, X, y):
        """Sample the posterior given labels ``y`` observed at vertices ``X``."""
        n = self._n_vertices()
        vertices = check_vertices(X, n, "X")
        y = check_binary_labels(y, "y")
        hyper = self._hyperparams(n)
        basis = self._resolve_basis(hyper)
        data = LabelData(n, vertices, y)
        self.trace_ = self._run(data, basis, hyper)
        self.basis_ = basis
        self.hyperparams_ = hyper
        self.summary_ = summarize(self.trace_, self.level)
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "summary_")
        v = check_vertices(X, len(self.summary_.mean), "X")
        p = self.summary_.mean[v]
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        check_is_fitted(self, "summary_")
        v = check_vertices(X, len(self.summary_.mean), "X")
        return self.summary_.hard[v].astype(np.int64)

    def credible_interval(self, X):
        """Pointwise ``(lower, upper)`` posterior bands for ``P(label = 1)``."""
        check_is_fitted(self, "summary_")
        v = check_vertices(X, len(self.summary_.mean), "X")
        return self.summary_.lower[v], self.summary_.upper[v]


class FullLaplacianClassifier(TruncatedSeriesClassifier):
    """Untruncated baseline: all ``n`` eigenvectors, no jump move on ``k``.

    The basis is the full dense eigendecomposition, so this is only
    practical for graphs of a few thousand vertices.
    """

    def _resolve_basis(self, hyper):
        if self.basis is not None and self.basis.m == self.basis.n:
            return self.basis
        if self.laplacian is None:
            raise ValueError("the full baseline needs the Laplacian or a complete basis")
        return spectral.full_eigensolve(self.laplacian)

    def _run(self, data, basis, hyper):
        return run_baseline_full(
            data, basis, hyper, self.n_iter, self.burnin, self.thinning, seed=self._seed()
        )
