"""Hierarchical probit model with a randomly truncated Laplacian series prior.

Latent ``z ~ N(f, I)`` with ``f = sum_{i<=k} g_i u_i``; coefficients
``g_i ~ N(0, 1 / (c tau_i))`` where ``tau_i = (lambda_i + n^-2)^q``; truncation
level ``P(k = l) ~ exp(-gamma l)``; scale ``c ~ Gamma(a, rate b)``. Everything
here works in log space.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._validation import check_count, check_nonnegative

_LOG_2PI = np.log(2.0 * np.pi)


class BasisExhaustedError(IndexError):
    """A truncation level beyond the computed eigenpairs was requested."""


@dataclass(frozen=True, eq=False)
class ProposalSpec:
    """Random-walk proposal on the truncation level: ``k' = k + offset``.

    The default is ``k - 2 + Binomial(4, 1/2)``.
    """

    offsets: np.ndarray = field(default_factory=lambda: np.arange(-2, 3))
    probabilities: np.ndarray = field(
        default_factory=lambda: np.array([0.0625, 0.25, 0.375, 0.25, 0.0625])
    )

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=np.int64)
        prob = np.asarray(self.probabilities, dtype=np.float64)
        if off.ndim != 1 or off.shape != prob.shape or off.size == 0:
            raise ValueError("offsets and probabilities must be matching 1-D arrays")
        if len(np.unique(off)) != len(off):
            raise ValueError("offsets must be distinct")
        if np.any(prob < 0) or abs(prob.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "offsets", off)
        object.__setattr__(self, "probabilities", prob)
        object.__setattr__(self, "_lookup", dict(zip(off.tolist(), prob.tolist())))
        object.__setattr__(self, "_cum", np.cumsum(prob))

    @classmethod
    def binomial(cls, trials=4):
        from scipy.stats import binom

        j = np.arange(trials + 1)
        return cls(j - trials // 2, binom.pmf(j, trials, 0.5))

    @classmethod
    def point_mass(cls):
        return cls(np.array([0]), np.array([1.0]))

    @property
    def is_symmetric(self):
        return all(
            np.isclose(p, self._lookup.get(-o, 0.0), rtol=0, atol=1e-15)
            for o, p in self._lookup.items()
        )

    def log_prob(self, offset):
        p = self._lookup.get(int(offset), 0.0)
        return np.log(p) if p > 0 else -np.inf

    def sample(self, rng):
        j = int(np.searchsorted(self._cum, rng.random() * self._cum[-1], side="right"))
        return int(self.offsets[min(j, len(self.offsets) - 1)])


@dataclass(frozen=True)
class Hyperparams:
    """Model hyperparameters.

    ``gamma=None`` means the ``20 / n`` rule of thumb, resolved once the graph
    size is known (see :meth:`resolve`). ``a = b = 0`` gives the improper
    scale prior ``p(c) ~ 1/c``.
    """

    q: float = 1.0
    gamma: float = None
    a: float = 0.0
    b: float = 0.0
    proposal: ProposalSpec = field(default_factory=ProposalSpec)

    def __post_init__(self):
        check_nonnegative(self.q, "q")
        check_nonnegative(self.a, "a")
        check_nonnegative(self.b, "b")
        if self.gamma is not None:
            check_nonnegative(self.gamma, "gamma")

    def resolve(self, n):
        if self.gamma is not None:
            return self
        return Hyperparams(self.q, 20.0 / n, self.a, self.b, self.proposal)


def tau(lam, n, q):
    """Per-coefficient prior precision factor ``(lambda + 1/n^2)^q``."""
    return (np.asarray(lam, dtype=np.float64) + 1.0 / n**2) ** q


def log_prior_k(k, gamma, kmax):
    """Log of ``P(k)`` for the truncated geometric-type prior on ``1..kmax``.

    Returns ``-inf`` outside the support.
    """
    if k < 1 or k > kmax:
        return -np.inf
    return -gamma * k - _log_norm_k(gamma, kmax)


def _log_norm_k(gamma, kmax):
    if gamma == 0:
        return np.log(kmax)
    # sum_{l=1}^K e^{-gamma l} = e^{-gamma} (1 - e^{-gamma K}) / (1 - e^{-gamma})
    return -gamma + np.log(-np.expm1(-gamma * kmax)) - np.log(-np.expm1(-gamma))


def prior_k_cdf(l, gamma, n):
    """Prior mass on ``{1, .., l}``: ``(1 - e^{-gamma l}) / (1 - e^{-gamma n})``."""
    l = check_count(l, "l", minimum=1)
    n = check_count(n, "n", minimum=1)
    if l > n:
        raise ValueError(f"l={l} exceeds n={n}")
    if gamma == 0:
        return l / n
    return np.expm1(-gamma * l) / np.expm1(-gamma * n)


def _coef_terms(proj, taus, c):
    """Per-coefficient contributions to ``log p(z | k, c)``."""
    ct = c * taus
    return 0.5 * (-np.log1p(1.0 / ct) + proj**2 / (1.0 + ct))


def log_marginal_z(z, basis, k, c, hyper):
    """``log p(z | k, c)`` with the coefficients ``g`` integrated out.

    Raises
    ------
    BasisExhaustedError
        When ``k`` exceeds the number of computed eigenpairs.
    """
    z = np.asarray(z, dtype=np.float64)
    n = basis.n
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > basis.m:
        raise BasisExhaustedError(f"k={k} but only {basis.m} eigenpairs available")
    if not c > 0:
        raise ValueError("c must be positive")
    proj = basis.project(z, k)
    taus = tau(basis.eigenvalues[:k], n, hyper.q)
    base = -0.5 * n * _LOG_2PI - 0.5 * z @ z
    return base + np.sum(_coef_terms(proj, taus, c))


def log_accept_ratio(k, kprime, z, c, basis, hyper, kmax=None, proj=None):
    """Log Metropolis-Hastings ratio for moving the truncation level ``k -> kprime``.

    Only the coefficients between the two levels enter, so the cost is
    ``O(|k' - k| n)``. ``kmax`` is the upper end of the prior support
    (defaults to ``basis.m``); out-of-support proposals give ``-inf``.
    ``proj``, if given, holds precomputed ``u_i^T z`` for at least
    ``max(k, kprime)`` leading eigenvectors.
    """
    if kmax is None:
        kmax = basis.m
    if kprime < 1 or kprime > kmax:
        return -np.inf
    if kprime == k:
        return 0.0
    gamma = hyper.gamma if hyper.gamma is not None else 20.0 / basis.n
    lo, hi = min(k, kprime), max(k, kprime)
    if hi > basis.m:
        raise BasisExhaustedError(f"level {hi} but only {basis.m} eigenpairs available")
    if proj is None:
        p = basis.project(z, hi, start=lo)
    else:
        p = proj[lo:hi]
    taus = tau(basis.eigenvalues[lo:hi], basis.n, hyper.q)
    delta = np.sum(_coef_terms(p, taus, c))
    if kprime < k:
        delta = -delta
    s = hyper.proposal
    return -gamma * (kprime - k) + s.log_prob(k - kprime) - s.log_prob(kprime - k) + delta


def log_posterior_k(z, c, basis, hyper, kmax=None):
    """Normalised ``log p(k | z, c)`` for ``k = 1..kmax`` by enumeration."""
    kmax = basis.m if kmax is None else kmax
    gamma = hyper.gamma if hyper.gamma is not None else 20.0 / basis.n
    proj = basis.project(np.asarray(z, dtype=np.float64), kmax)
    taus = tau(basis.eigenvalues[:kmax], basis.n, hyper.q)
    ks = np.arange(1, kmax + 1)
    lp = np.cumsum(_coef_terms(proj, taus, c)) - gamma * ks
    return lp - logsumexp(lp)
