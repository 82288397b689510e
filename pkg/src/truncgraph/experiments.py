"""Data generators and end-to-end experiment drivers.

Each ``run_*`` function builds a graph and labels, samples the posterior,
and writes ``trace.csv``, ``summary.csv``, ``khist.csv``, ``timing.csv`` and
``metrics.csv`` into an output directory. The CLI in
:mod:`truncgraph.cli` is a thin layer over these.
"""

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import binary_dilation
from scipy.special import ndtr

from . import io, spectral
from ._validation import check_count, check_features, check_probability
from .estimator import default_basis_size
from .graph import build_grid3d, build_knn_graph, build_watts_strogatz, laplacian
from .model import Hyperparams
from .sampler import LabelData, accuracy, run_baseline_full, run_chain, summarize

log = logging.getLogger(__name__)

# eigenpair cap for the 100x100x9 tracking run (dense columns, ~1.4 GB)
FULL_TRACKING_BASIS = 2000
# truncation-prior mass covered by the initial basis in the scaling bench
BENCH_PRIOR_MASS = 0.75

# class/split sizes of the MNIST 4-vs-9 problem, used by the synthetic stand-in
MNIST_49_COUNTS = {("train", 0): 5842, ("train", 1): 5949, ("test", 0): 982, ("test", 1): 1009}


# -- ground truth and labels ------------------------------------------------------


def series_weights(n, m=None):
    """``w_1 = 0`` and ``w_k = sqrt(n) (k-1)^{-1.5} sin(k-1)`` for ``k = 2..m``."""
    m = n if m is None else m
    j = np.arange(1, m, dtype=np.float64)
    return np.concatenate([[0.0], np.sqrt(n) * j**-1.5 * np.sin(j)])


def gen_series_truth(basis):
    """Latent truth ``f0 = sum_k w_k u_k`` over the eigenpairs in ``basis``."""
    return basis.eigenvectors @ series_weights(basis.n, basis.m)


def gen_path_truth(n):
    n = check_count(n, "n", minimum=2)
    return gen_series_truth(spectral.path_eigenpairs(n))


def gen_labels(f0, rng):
    """Independent labels with ``P(y_i = 1) = Phi(f0_i)``."""
    f0 = np.asarray(f0, dtype=np.float64)
    if not np.all(np.isfinite(f0)):
        raise ValueError("f0 must be finite")
    return (rng.random(f0.shape) < ndtr(f0)).astype(np.int8)


def mask_labels(labels, observe_frac, rng):
    """Keep a uniformly random ``round(observe_frac * n)`` subset of the labels.

    Returns the observed :class:`LabelData` and the sorted hidden vertex ids.
    """
    labels = np.asarray(labels)
    frac = check_probability(observe_frac, "observe_frac", allow_zero=False)
    n = len(labels)
    n_obs = int(round(frac * n))
    obs = np.sort(rng.choice(n, size=n_obs, replace=False))
    mask = np.zeros(n, dtype=bool)
    mask[obs] = True
    return LabelData.from_full(labels, mask), np.flatnonzero(~mask)


# -- features --------------------------------------------------------------------


def pca_project(X, dims):
    """Project mean-centred rows of ``X`` on the top ``dims`` principal directions.

    Each direction is signed so that its largest-magnitude loading is positive.
    """
    X = check_features(X)
    dims = check_count(dims, "dims", minimum=1)
    if dims > min(X.shape):
        raise ValueError(f"dims={dims} exceeds min(n, d)={min(X.shape)}")
    Xc = X - X.mean(axis=0)
    _, _, Vt = np.linalg.svd(Xc, full_matrices=False)
    V = Vt[:dims].T
    pivot = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[pivot, np.arange(dims)])
    return Xc @ V


def filter_digits(X, labels, digits=(4, 9)):
    """Rows whose label is one of ``digits``; returned labels are 0/1 by position in ``digits``."""
    keep = np.isin(labels, digits)
    return X[keep], (labels[keep] == digits[1]).astype(np.int8)


def two_cluster_standin(rng, counts=None, dim=50, separation=5.0):
    """Synthetic replacement for the MNIST 4/9 features.

    Two Gaussian clouds in ``dim`` dimensions with unit noise whose centres
    are ``separation`` apart; split and class sizes follow ``counts``
    (default: the real 4-vs-9 train/test sizes).

    Returns ``(X, y, is_test)``.
    """
    counts = MNIST_49_COUNTS if counts is None else counts
    blocks, ys, tests = [], [], []
    for (split, cls), size in counts.items():
        centre = np.zeros(dim)
        centre[0] = separation / 2 if cls else -separation / 2
        blocks.append(centre + rng.standard_normal((size, dim)))
        ys.append(np.full(size, cls, dtype=np.int8))
        tests.append(np.full(size, split == "test"))
    return np.vstack(blocks), np.concatenate(ys), np.concatenate(tests)


def stratified_subsample(y, is_test, size, rng):
    """Sorted indices of ``size`` points keeping each (split, class) share of the whole.

    Group counts come from largest-remainder rounding, so each stays within
    one of its exact proportional share.
    """
    groups = [np.flatnonzero((is_test == t) & (y == c)) for t in (False, True) for c in (0, 1)]
    total = sum(len(g) for g in groups)
    if size > total:
        raise ValueError(f"size {size} exceeds {total} available points")
    exact = np.array([size * len(g) / total for g in groups])
    take = np.floor(exact).astype(int)
    for i in np.argsort(-(exact - take), kind="stable")[: size - take.sum()]:
        take[i] += 1
    picked = [rng.choice(g, size=t, replace=False) for g, t in zip(groups, take)]
    return np.sort(np.concatenate(picked))


# -- tracking animation -------------------------------------------------------------


@dataclass
class ImageStack:
    """Frames of pixel states: 1 object, 0 background, -1 unobserved.

    ``state`` has shape ``(frames, height, width)``; flattening it in C order
    gives grid vertex ids (see :func:`truncgraph.graph.grid_index`).
    """

    width: int
    height: int
    frames: int
    state: np.ndarray

    def __post_init__(self):
        if min(self.width, self.height, self.frames) < 1:
            raise ValueError("dimensions must be positive")
        if self.state.shape != (self.frames, self.height, self.width):
            raise ValueError("state shape does not match dimensions")

    def label_data(self):
        flat = self.state.ravel()
        return LabelData.from_full(np.where(flat < 0, 0, flat), flat >= 0)


def _disc(height, width, cy, cx, radius):
    rows, cols = np.mgrid[0:height, 0:width]
    return (rows - cy) ** 2 + (cols - cx) ** 2 <= radius**2


def gen_tracking(width, height, frames, unobserved_frac=0.1, corrupt_frame=None, rng=None,
                 radius=None, spurious_radius=None, travel=1.0):
    """Moving disc animation with hidden pixels and an optional spurious disc.

    The object (label 1) moves linearly from the top-left corner toward the
    bottom-right one, covering the fraction ``travel`` of that diagonal.
    ``corrupt_frame`` (0-based) receives an extra disc in the top-right
    corner, in the observed labels only. The extra disc must stay clear of
    the object in that frame so that it is unambiguously spurious.

    Returns
    -------
    stack : ImageStack
        Observed states.
    truth : ndarray of shape (frames, height, width)
    spurious : ndarray of bool, same shape
        Pixels covered by the injected disc.
    """
    width = check_count(width, "width", minimum=1)
    height = check_count(height, "height", minimum=1)
    frames = check_count(frames, "frames", minimum=1)
    frac = check_probability(unobserved_frac, "unobserved_frac", allow_one=False)
    travel = check_probability(travel, "travel")
    rng = np.random.default_rng(rng)
    r = 0.1 * min(width, height) if radius is None else float(radius)
    rs = r if spurious_radius is None else float(spurious_radius)
    if 2 * r > min(width, height) - 1 or 2 * rs > min(width, height) - 1:
        raise ValueError("disc does not fit inside the frame")

    truth = np.zeros((frames, height, width), dtype=np.int8)
    for t in range(frames):
        s = travel * t / (frames - 1) if frames > 1 else 0.0
        cy = r + s * (height - 1 - 2 * r)
        cx = r + s * (width - 1 - 2 * r)
        truth[t] = _disc(height, width, cy, cx, r)

    spurious = np.zeros_like(truth, dtype=bool)
    observed = truth.copy()
    if corrupt_frame is not None:
        if not 0 <= corrupt_frame < frames:
            raise ValueError(f"corrupt_frame {corrupt_frame} outside 0..{frames - 1}")
        spurious[corrupt_frame] = _disc(height, width, rs, width - 1 - rs, rs)
        if np.any(binary_dilation(truth[corrupt_frame]) & spurious[corrupt_frame]):
            raise ValueError("spurious disc touches the object; shrink it or the travel")
        observed[spurious] = 1

    n = truth.size
    hidden = rng.choice(n, size=int(round(frac * n)), replace=False)
    flat = observed.ravel()
    flat[hidden] = -1
    return ImageStack(width, height, frames, flat.reshape(truth.shape)), truth, spurious


def boundary_mask(truth):
    """Pixels whose 4-neighbourhood within the frame contains the other class."""
    edge = np.zeros(truth.shape, dtype=bool)
    edge[:, 1:, :] |= truth[:, 1:, :] != truth[:, :-1, :]
    edge[:, :-1, :] |= truth[:, :-1, :] != truth[:, 1:, :]
    edge[:, :, 1:] |= truth[:, :, 1:] != truth[:, :, :-1]
    edge[:, :, :-1] |= truth[:, :, :-1] != truth[:, :, 1:]
    return edge


# -- drivers ---------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    kind: str = "path-demo"
    seed: int = 0
    gamma: float = None
    q: float = 1.0
    a: float = 0.0
    b: float = 0.0
    iters: int = 10_000
    burnin: int = 2_000
    thin: int = 5
    mode: str = "reject"
    basis_size: int = None
    out: str = "."
    n: int = None
    observe_frac: float = 0.8
    rewire_prob: float = 0.25
    knn: int = 15
    pca_dims: int = 50
    train_images: str = None
    train_labels: str = None
    test_images: str = None
    test_labels: str = None
    synthetic: bool = False
    sizes: str = "250,500,1000,2000,4000"
    width: int = 20
    height: int = 20
    frames: int = 5
    unobserved_frac: float = 0.1
    corrupt_frame: int = 3
    radius: float = None
    spurious_radius: float = None
    travel: float = 1.0
    full: bool = False

    def validate(self):
        """Raise ``ValueError`` on bad settings, ``FileNotFoundError`` on missing inputs."""
        if self.kind not in RUNNERS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.mode not in ("reject", "extend"):
            raise ValueError(f"mode must be 'reject' or 'extend', got {self.mode!r}")
        check_count(self.iters, "iters", minimum=1)
        check_count(self.burnin, "burnin", minimum=0)
        check_count(self.thin, "thin", minimum=1)
        if self.burnin >= self.iters:
            raise ValueError("iters must exceed burnin")
        self.hyperparams()
        for name in ("n", "basis_size"):
            if getattr(self, name) is not None:
                check_count(getattr(self, name), name, minimum=1)
        check_probability(self.observe_frac, "observe_frac", allow_zero=False)
        check_probability(self.rewire_prob, "rewire_prob")
        check_probability(self.unobserved_frac, "unobserved_frac", allow_one=False)
        check_probability(self.travel, "travel")
        for name in ("knn", "pca_dims", "width", "height", "frames"):
            check_count(getattr(self, name), name, minimum=1)
        if self.corrupt_frame and not 1 <= self.corrupt_frame <= self.frames:
            raise ValueError(f"corrupt_frame must be in 1..{self.frames} (0 disables it)")
        for name in ("train_images", "train_labels", "test_images", "test_labels"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise FileNotFoundError(f"{name}: no such file {path!r}")
        sizes = [int(v) for v in str(self.sizes).split(",") if v.strip()]
        if not sizes or sizes != sorted(sizes) or sizes[0] < 1:
            raise ValueError("sizes must be a comma-separated ascending list of positive ints")
        return self

    def hyperparams(self):
        return Hyperparams(q=self.q, gamma=self.gamma, a=self.a, b=self.b)

    def mcmc(self):
        return dict(n_iter=self.iters, burnin=self.burnin, thinning=self.thin)


def _write_outputs(out, trace, summary, timing, metrics):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_trace_csv(trace, out / "trace.csv")
    io.write_summary_csv(summary, out / "summary.csv")
    io.write_khist_csv(summary, out / "khist.csv")
    io.write_rows_csv(["phase", "seconds"], [(k, f"{v:.6f}") for k, v in timing.items()],
                      out / "timing.csv")
    io.write_rows_csv(["metric", "value"], [(k, repr(v)) for k, v in metrics.items()],
                      out / "metrics.csv")


def _sample(cfg, basis, data, L=None, hyper=None):
    hyper = (hyper or cfg.hyperparams()).resolve(basis.n)
    t0 = time.perf_counter()
    trace = run_chain(data, basis, hyper, seed=cfg.seed, mode=cfg.mode, laplacian=L, **cfg.mcmc())
    t1 = time.perf_counter()
    return trace, summarize(trace), t1 - t0


def _metrics(trace, summary, truth, hidden):
    post = trace.k[trace.burnin :]
    m = {
        "mean_k": float(post.mean()),
        "acceptance_rate": summary.acceptance_rate,
        "basis_size": trace.basis_size,
    }
    if truth is not None and len(hidden):
        m["heldout_accuracy"] = accuracy(summary, truth, hidden)
    return m


def run_path_demo(cfg):
    """Path graph with the decaying-cosine truth, 20% of labels hidden."""
    n = cfg.n or 500
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    full = spectral.path_eigenpairs(n)
    f0 = gen_series_truth(full)
    labels = gen_labels(f0, rng)
    data, hidden = mask_labels(labels, cfg.observe_frac, rng)
    m = cfg.basis_size or n
    basis = spectral.path_eigenpairs(n, m)
    t_eig = time.perf_counter() - t0
    trace, summary, t_mc = _sample(cfg, basis, data)
    metrics = _metrics(trace, summary, labels, hidden)
    metrics["truth_agreement"] = float(np.mean(summary.hard == (f0 > 0)))
    timing = {"eigensolve": t_eig, "sampling": t_mc, "total": t_eig + t_mc}
    _write_outputs(cfg.out, trace, summary, timing, metrics)
    return dict(trace=trace, summary=summary, labels=labels, hidden=hidden, f0=f0,
                metrics=metrics)


def run_ws_demo(cfg):
    """Watts-Strogatz small-world graph; truth built from its own eigenbasis."""
    n = cfg.n or 1000
    rng = np.random.default_rng(cfg.seed)
    g = build_watts_strogatz(n, cfg.rewire_prob, rng)
    L = laplacian(g)
    hyper = cfg.hyperparams().resolve(g.n)
    m = cfg.basis_size or default_basis_size(g.n, hyper.gamma)
    t0 = time.perf_counter()
    basis = spectral.partial_eigensolve(L, m)
    t_eig = time.perf_counter() - t0
    f0 = gen_series_truth(basis)
    labels = gen_labels(f0, rng)
    data, hidden = mask_labels(labels, cfg.observe_frac, rng)
    trace, summary, t_mc = _sample(cfg, basis, data, L, hyper)
    metrics = _metrics(trace, summary, labels, hidden)
    metrics["n_vertices"] = g.n
    timing = {"eigensolve": t_eig, "sampling": t_mc, "total": t_eig + t_mc}
    _write_outputs(cfg.out, trace, summary, timing, metrics)
    io.write_edgelist(g, Path(cfg.out) / "graph.txt")
    return dict(graph=g, trace=trace, summary=summary, labels=labels, hidden=hidden,
                metrics=metrics)


def load_mnist_49(cfg):
    """Train+test 4/9 images as ``(X, y, is_test)``, or the synthetic stand-in."""
    paths = (cfg.train_images, cfg.train_labels, cfg.test_images, cfg.test_labels)
    if cfg.synthetic or not all(paths):
        if not cfg.synthetic:
            raise ValueError("mnist needs --train-images/--train-labels/--test-images/"
                             "--test-labels, or --synthetic")
        return two_cluster_standin(np.random.default_rng(cfg.seed))
    Xtr, ytr = filter_digits(*io.load_idx(cfg.train_images, cfg.train_labels))
    Xte, yte = filter_digits(*io.load_idx(cfg.test_images, cfg.test_labels))
    X = np.vstack([Xtr, Xte])
    y = np.concatenate([ytr, yte])
    is_test = np.concatenate([np.zeros(len(ytr), bool), np.ones(len(yte), bool)])
    return X, y, is_test


def run_mnist(cfg):
    """Training images observed, test images predicted, on one 15-NN graph."""
    X, y, is_test = load_mnist_49(cfg)
    if cfg.n:
        idx = stratified_subsample(y, is_test, cfg.n, np.random.default_rng(cfg.seed))
        X, y, is_test = X[idx], y[idx], is_test[idx]
    dims = min(cfg.pca_dims, *X.shape)
    t0 = time.perf_counter()
    g = build_knn_graph(pca_project(X, dims), cfg.knn)
    L = laplacian(g)
    hyper = cfg.hyperparams().resolve(g.n)
    m = cfg.basis_size or default_basis_size(g.n, hyper.gamma)
    basis = spectral.partial_eigensolve(L, m)
    t_eig = time.perf_counter() - t0
    data = LabelData.from_full(y, ~is_test)
    trace, summary, t_mc = _sample(cfg, basis, data, L, hyper)
    metrics = _metrics(trace, summary, y, np.flatnonzero(is_test))
    timing = {"graph_and_eigensolve": t_eig, "sampling": t_mc, "total": t_eig + t_mc}
    _write_outputs(cfg.out, trace, summary, timing, metrics)
    return dict(trace=trace, summary=summary, metrics=metrics)


def run_tracking(cfg):
    """Moving-disc animation on a 3-D grid graph; writes per-frame PGM maps."""
    if cfg.full:
        w, h, nt = 100, 100, 9
        corrupt = 5
    else:
        w, h, nt = cfg.width, cfg.height, cfg.frames
        corrupt = cfg.corrupt_frame
    rng = np.random.default_rng(cfg.seed)
    stack, truth, spurious = gen_tracking(
        w, h, nt, cfg.unobserved_frac, None if not corrupt else corrupt - 1, rng,
        cfg.radius, cfg.spurious_radius, cfg.travel,
    )
    n = w * h * nt
    hyper = cfg.hyperparams().resolve(n)
    m = cfg.basis_size or default_basis_size(n, hyper.gamma)
    if cfg.full and not cfg.basis_size:
        # the prior-mass rule asks for ~20k dense columns at this size
        m = min(m, FULL_TRACKING_BASIS)
    t0 = time.perf_counter()
    basis = spectral.grid3d_eigenpairs(w, h, nt, m)
    t_eig = time.perf_counter() - t0
    data = stack.label_data()
    trace, summary, t_mc = _sample(cfg, basis, data, hyper=hyper)

    hard = summary.hard.reshape(truth.shape).astype(bool)
    tb = truth.astype(bool)
    inter, union = np.sum(hard & tb), np.sum(hard | tb)
    width_map = summary.ci_width.reshape(truth.shape)
    edge = boundary_mask(truth)
    metrics = _metrics(trace, summary, None, [])
    metrics.update(
        iou=float(inter / union) if union else 1.0,
        spurious_pixels_labelled=int(np.sum(hard & spurious)),
        mean_ci_width_boundary=float(width_map[edge].mean()),
        mean_ci_width_interior=float(width_map[~edge].mean()),
    )
    timing = {"eigensolve": t_eig, "sampling": t_mc, "total": t_eig + t_mc}
    _write_outputs(cfg.out, trace, summary, timing, metrics)
    out = Path(cfg.out)
    mean_map = summary.mean.reshape(truth.shape)
    for t in range(nt):
        io.write_pgm(mean_map[t], out / f"frame_{t + 1}_mean.pgm")
        io.write_pgm(hard[t].astype(float), out / f"frame_{t + 1}_hard.pgm")
        io.write_pgm(np.clip(width_map[t], 0, 1), out / f"frame_{t + 1}_ciwidth.pgm")
    return dict(trace=trace, summary=summary, truth=truth, spurious=spurious, stack=stack,
                metrics=metrics)


def bench_scaling(X, y, is_test, sizes, hyper, mcmc, seed=0, knn=15, basis_size=None):
    """Time and score the truncated sampler against the untruncated baseline.

    ``X`` should already be the projected features. For each subsample
    size a k-NN graph is built on a class- and split-stratified subsample;
    both methods observe the training vertices and are scored on the test
    vertices. Times include the eigensolve each method needs. Unless
    ``basis_size`` is given, the truncated run starts from the eigenpairs
    covering 75% of the truncation prior and extends them when the chain
    asks for more.

    Returns rows ``(size, method, seconds, accuracy)``.
    """
    sizes = [int(s) for s in sizes]
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    rng = np.random.default_rng(seed)
    rows = []
    for size in sizes:
        idx = stratified_subsample(y, is_test, size, rng)
        ys, test = y[idx], is_test[idx]
        g = build_knn_graph(X[idx], knn)
        L = laplacian(g)
        h = hyper.resolve(g.n)
        data = LabelData.from_full(ys, ~test)
        evalset = np.flatnonzero(test)

        t0 = time.perf_counter()
        if basis_size:
            basis = spectral.partial_eigensolve(L, min(basis_size, g.n))
            trace = run_chain(data, basis, h, seed=seed, **mcmc)
        else:
            # start from a modest basis and let the chain extend it on demand
            m = default_basis_size(g.n, h.gamma, mass=BENCH_PRIOR_MASS)
            basis = spectral.partial_eigensolve(L, min(m, g.n))
            trace = run_chain(data, basis, h, seed=seed, mode="extend", laplacian=L, **mcmc)
        acc_t = accuracy(summarize(trace), ys, evalset)
        t_trunc = time.perf_counter() - t0

        t0 = time.perf_counter()
        full = spectral.full_eigensolve(L)
        trace = run_baseline_full(data, full, h, seed=seed, **mcmc)
        acc_f = accuracy(summarize(trace), ys, evalset)
        t_full = time.perf_counter() - t0

        log.info("size %d: truncated %.2fs acc %.3f | full %.2fs acc %.3f",
                 size, t_trunc, acc_t, t_full, acc_f)
        rows.append((size, "truncated", t_trunc, acc_t))
        rows.append((size, "full", t_full, acc_f))
    return rows


def run_bench(cfg):
    X, y, is_test = load_mnist_49(cfg)
    X = pca_project(X, min(cfg.pca_dims, *X.shape))
    sizes = [int(s) for s in str(cfg.sizes).split(",") if s.strip()]
    rows = bench_scaling(X, y, is_test, sizes, cfg.hyperparams(), cfg.mcmc(), cfg.seed,
                         cfg.knn, cfg.basis_size)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_rows_csv(
        ["size", "method", "seconds", "accuracy"],
        [(s, meth, f"{sec:.6f}", repr(acc)) for s, meth, sec, acc in rows],
        out / "timing.csv",
    )
    return dict(rows=rows)


RUNNERS = {
    "path-demo": run_path_demo,
    "ws-demo": run_ws_demo,
    "mnist": run_mnist,
    "tracking": run_tracking,
    "bench": run_bench,
}
