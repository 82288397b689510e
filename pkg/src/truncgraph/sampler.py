"""Reversible-jump Gibbs sampler for the truncated series probit model.

One sweep updates, in order, the latent Gaussians ``z``, the pair
``(g, k)`` by a reversible-jump move, and the scale ``c`` from its gamma
full conditional. The untruncated baseline is the same sweep with ``k``
pinned to ``n`` and the jump skipped.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr, ndtri

from . import spectral
from ._validation import check_binary_labels, check_count, check_vertices
from .model import BasisExhaustedError, log_accept_ratio, tau

# below this constraint mass, plain rejection from N(mean, 1) gets wasteful
_NAIVE_MASS = 0.3
_NAIVE_CUTOFF = -ndtri(_NAIVE_MASS)


class DegenerateStateError(RuntimeError):
    """The scale update hit a zero rate under the improper prior."""


@dataclass(frozen=True, eq=False)
class LabelData:
    """Observed hard labels on a subset of the ``n`` vertices (0-based ids)."""

    n: int
    vertices: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        v = check_vertices(self.vertices, self.n)
        y = check_binary_labels(self.labels)
        if v.shape != y.shape:
            raise ValueError("vertices and labels differ in length")
        if len(np.unique(v)) != len(v):
            raise ValueError("observed vertices must be unique")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "labels", y)

    @classmethod
    def from_full(cls, labels, observed):
        """Keep ``labels[i]`` for every ``i`` where the boolean mask ``observed`` holds."""
        labels = np.asarray(labels)
        idx = np.flatnonzero(np.asarray(observed, dtype=bool))
        return cls(len(labels), idx, labels[idx])

    def signs(self):
        """+1 / -1 for vertices observed with label 1 / 0, 0 where unobserved."""
        s = np.zeros(self.n, dtype=np.int8)
        s[self.vertices] = np.where(self.labels == 1, 1, -1)
        return s


@dataclass(frozen=True, eq=False)
class ChainState:
    z: np.ndarray
    g: np.ndarray
    k: int
    c: float

    def __post_init__(self):
        if self.k < 1 or len(self.g) != self.k:
            raise ValueError(f"invalid state: k={self.k}, len(g)={len(self.g)}")
        if not self.c > 0:
            raise ValueError("c must be positive")


@dataclass
class Trace:
    """Chain output.

    ``k``, ``c``, ``accepted`` and ``micros`` have one entry per iteration,
    burn-in included. ``f`` holds the thinned post-burn-in draws of the
    latent function, one row per stored draw.
    """

    k: np.ndarray
    c: np.ndarray
    accepted: np.ndarray
    micros: np.ndarray
    f: np.ndarray
    burnin: int
    thinning: int
    basis_size: int = 0

    @property
    def n_iter(self):
        return len(self.k)


@dataclass
class PosteriorSummary:
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    hard: np.ndarray
    k_values: np.ndarray
    k_counts: np.ndarray
    acceptance_rate: float
    level: float = 0.95

    @property
    def ci_width(self):
        return self.upper - self.lower


def truncated_normal(mean, positive, rng):
    """Vectorised draws from ``N(mean, 1)`` conditioned on the sign of the draw.

    ``positive`` is a boolean array: True asks for ``X > 0``, False for
    ``X < 0``. Where the allowed half-line holds at least 30% of the mass,
    plain rejection is used; otherwise an exponential proposal on the tail
    (Robert, 1995), which stays efficient however far out the mean is.
    """
    mean = np.asarray(mean, dtype=np.float64)
    positive = np.broadcast_to(np.asarray(positive, dtype=bool), mean.shape)
    # reflect so every draw is of the form m + Y, Y ~ N(0,1) restricted to Y > a
    m = np.where(positive, mean, -mean)
    a = -m
    y = np.empty_like(m)

    naive = a <= _NAIVE_CUTOFF
    todo = np.flatnonzero(naive)
    while todo.size:
        draw = rng.standard_normal(todo.size)
        ok = draw > a[todo]
        y[todo[ok]] = draw[ok]
        todo = todo[~ok]

    todo = np.flatnonzero(~naive)
    if todo.size:
        at = a[todo]
        alpha = 0.5 * (at + np.sqrt(at * at + 4.0))
        while todo.size:
            draw = at + rng.standard_exponential(todo.size) / alpha
            ok = rng.random(todo.size) <= np.exp(-0.5 * (draw - alpha) ** 2)
            y[todo[ok]] = draw[ok]
            todo, at, alpha = todo[~ok], at[~ok], alpha[~ok]

    x = m + y
    return np.where(positive, x, -x)


def sample_truncated_normal(mean, side, rng):
    """One draw from ``N(mean, 1)`` restricted to ``side`` (``"positive"``/``"negative"``)."""
    if side not in ("positive", "negative"):
        raise ValueError(f"side must be 'positive' or 'negative', got {side!r}")
    return float(truncated_normal(np.array([mean]), np.array([side == "positive"]), rng)[0])


def update_z(state, data, basis, rng, signs=None):
    """Redraw every latent ``z_i`` given ``f = sum_{i<=k} g_i u_i``."""
    if signs is None:
        signs = data.signs()
    f = basis.synthesize(state.g)
    z = f + rng.standard_normal(len(f))
    obs = np.flatnonzero(signs)
    if obs.size:
        z[obs] = truncated_normal(f[obs], signs[obs] > 0, rng)
    return replace(state, z=z)


def _draw_g(proj, taus, c, rng):
    prec = 1.0 + c * taus
    return proj / prec + rng.standard_normal(len(proj)) / np.sqrt(prec)


def update_gk(state, basis, hyper, rng, mode="reject", laplacian=None, kmax=None):
    """Reversible-jump move on ``(g, k)``.

    Proposes ``k' = k + offset``, accepts with the integrated-likelihood
    Metropolis-Hastings ratio, and on acceptance redraws ``g_1..g_k'`` from
    their exact Gaussian conditional. Proposals past the computed eigenpairs
    are rejected (``mode="reject"``) or trigger a basis extension
    (``mode="extend"``, needs ``laplacian`` unless the basis is closed-form).
    An extension adds at least a quarter of the current basis size.

    Returns
    -------
    state : ChainState
    accepted : bool
    basis : SpectralBasis
        Possibly extended.
    """
    if mode not in ("reject", "extend"):
        raise ValueError(f"mode must be 'reject' or 'extend', got {mode!r}")
    if kmax is None:
        kmax = basis.m if mode == "reject" else basis.n
    k = state.k
    kprime = k + hyper.proposal.sample(rng)
    u = rng.random()
    if kprime > basis.m and kprime <= kmax:
        if mode == "extend":
            # grow by a quarter at least, so a chain triggers few eigensolves
            extra = min(max(kprime - basis.m, -(-basis.m // 4)), basis.n - basis.m)
            basis = spectral.extend_basis(basis, laplacian, extra)
        else:
            return state, False, basis
    hi = min(max(k, kprime), basis.m)
    proj = basis.project(state.z, hi)
    log_r = log_accept_ratio(k, kprime, state.z, state.c, basis, hyper, kmax=kmax, proj=proj)
    if log_r == -np.inf or np.log(u) > log_r:
        return state, False, basis
    taus = tau(basis.eigenvalues[:kprime], basis.n, hyper.q)
    g = _draw_g(proj[:kprime], taus, state.c, rng)
    return replace(state, g=g, k=kprime), True, basis


def update_c(state, basis, hyper, rng):
    """Draw ``c ~ Gamma(a + k/2, rate = b + sum_i tau_i g_i^2 / 2)``."""
    taus = tau(basis.eigenvalues[: state.k], basis.n, hyper.q)
    shape = hyper.a + 0.5 * state.k
    rate = hyper.b + 0.5 * np.sum(taus * state.g**2)
    if not rate > 0:
        raise DegenerateStateError("gamma rate is zero; c update undefined")
    return replace(state, c=rng.gamma(shape, 1.0 / rate))


def initial_k(gamma, kmax):
    if gamma == 0:
        return min(10, kmax)
    return int(min(max(1, np.ceil(1.0 / gamma)), kmax))


def init_state(data, basis, hyper, rng, k=None, signs=None):
    """Start at ``k = ceil(1/gamma)`` (10 when gamma is 0), ``c = 1``, ``g`` from its prior."""
    if k is None:
        k = initial_k(hyper.gamma, basis.m)
    if k > basis.m:
        raise BasisExhaustedError(f"initial k={k} exceeds {basis.m} eigenpairs")
    taus = tau(basis.eigenvalues[:k], basis.n, hyper.q)
    g = rng.standard_normal(k) / np.sqrt(taus)
    state = ChainState(np.zeros(basis.n), g, k, 1.0)
    return update_z(state, data, basis, rng, signs)


def run_chain(
    data,
    basis,
    hyper,
    n_iter=10_000,
    burnin=2_000,
    thinning=5,
    seed=None,
    mode="reject",
    laplacian=None,
    k_init=None,
    fixed_k=False,
):
    """Run the sampler and return a :class:`Trace`.

    Deterministic for a fixed integer ``seed``. With ``fixed_k=True`` the
    jump step is skipped and only ``g`` is redrawn each sweep; combined with
    a full basis and ``k_init = n`` this is the untruncated baseline.
    """
    n_iter = check_count(n_iter, "n_iter", minimum=1)
    burnin = check_count(burnin, "burnin", minimum=0)
    thinning = check_count(thinning, "thinning", minimum=1)
    if burnin >= n_iter:
        raise ValueError("n_iter must exceed burnin")
    if data.n != basis.n:
        raise ValueError(f"labels cover {data.n} vertices but basis has {basis.n}")
    hyper = hyper.resolve(basis.n)
    rng = np.random.default_rng(seed)
    signs = data.signs()
    state = init_state(data, basis, hyper, rng, k_init, signs)

    n_keep = (n_iter - burnin) // thinning
    ks = np.empty(n_iter, dtype=np.int64)
    cs = np.empty(n_iter)
    acc = np.empty(n_iter, dtype=bool)
    micros = np.empty(n_iter, dtype=np.int64)
    F = np.empty((n_keep, basis.n))
    stored = 0
    for it in range(n_iter):
        t0 = time.perf_counter_ns()
        state = update_z(state, data, basis, rng, signs)
        if fixed_k:
            proj = basis.project(state.z, state.k)
            taus = tau(basis.eigenvalues[: state.k], basis.n, hyper.q)
            state = replace(state, g=_draw_g(proj, taus, state.c, rng))
            accepted = True
        else:
            state, accepted, basis = update_gk(state, basis, hyper, rng, mode, laplacian)
        state = update_c(state, basis, hyper, rng)
        if it >= burnin and (it - burnin + 1) % thinning == 0 and stored < n_keep:
            F[stored] = basis.synthesize(state.g)
            stored += 1
        micros[it] = (time.perf_counter_ns() - t0) // 1000
        ks[it], cs[it], acc[it] = state.k, state.c, accepted
    return Trace(ks, cs, acc, micros, F, burnin, thinning, basis.m)


def run_baseline_full(data, basis, hyper, n_iter=10_000, burnin=2_000, thinning=5, seed=None):
    """Untruncated Laplacian prior: all ``n`` eigenvectors, ``k`` fixed at ``n``."""
    if basis.m != basis.n:
        raise ValueError("the untruncated baseline needs the full eigenbasis")
    return run_chain(
        data, basis, hyper, n_iter, burnin, thinning, seed, k_init=basis.n, fixed_k=True
    )


def summarize(trace, level=0.95):
    """Posterior mean, pointwise credible bands of ``Phi(f)``, hard labels, ``k`` counts."""
    if trace.f.shape[0] == 0:
        raise ValueError("trace holds no stored samples")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    probs = ndtr(trace.f)
    tail = 0.5 * (1.0 - level)
    mean = probs.mean(axis=0)
    lower, upper = np.quantile(probs, [tail, 1.0 - tail], axis=0)
    post = trace.k[trace.burnin :]
    k_values, k_counts = np.unique(post, return_counts=True)
    return PosteriorSummary(
        mean=mean,
        lower=lower,
        upper=upper,
        hard=(mean > 0.5).astype(np.int8),
        k_values=k_values,
        k_counts=k_counts,
        acceptance_rate=float(trace.accepted[trace.burnin :].mean()),
        level=level,
    )


def accuracy(predicted, truth, eval_set):
    """Fraction of ``eval_set`` vertices whose predicted hard label equals ``truth``.

    ``predicted`` is a :class:`PosteriorSummary` or a full hard-label vector;
    ``truth`` a full label vector or :class:`LabelData`.
    """
    hard = predicted.hard if isinstance(predicted, PosteriorSummary) else np.asarray(predicted)
    idx = check_vertices(eval_set, len(hard), "eval_set")
    if idx.size == 0:
        raise ValueError("eval_set is empty")
    if isinstance(truth, LabelData):
        lookup = dict(zip(truth.vertices.tolist(), truth.labels.tolist()))
        if not all(i in lookup for i in idx.tolist()):
            raise ValueError("truth does not cover every vertex in eval_set")
        ref = np.array([lookup[i] for i in idx.tolist()])
    else:
        ref = np.asarray(truth)[idx]
    return float(np.mean(hard[idx] == ref))
