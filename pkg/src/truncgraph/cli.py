"""Command-line front end: ``truncgraph <experiment> [options]``.

Every experiment accepts ``--config FILE`` holding ``key = value`` lines
(``#`` starts a comment). Keys are the long option names, with dashes or
underscores. Options given on the command line override the file.
"""

import argparse
import dataclasses
import logging
import sys

from .experiments import RUNNERS, ExperimentConfig

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}

_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _parse_bool(text):
    t = str(text).strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_optional_float(text):
    t = str(text).strip().lower()
    return None if t in ("none", "") else float(text)


def _convert(name, text):
    """Turn a config-file string into the type of the ``ExperimentConfig`` field."""
    if name == "gamma":
        return _parse_optional_float(text)
    kind = _FIELDS[name].type
    if kind is bool:
        return _parse_bool(text)
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return str(text)


def read_config(path):
    """Parse a ``key = value`` file into a dict of typed ``ExperimentConfig`` fields."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, raw = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key = key.strip().replace("-", "_")
            if key not in _FIELDS or key == "kind":
                raise ValueError(f"{path}:{lineno}: unknown key {key.strip()!r}")
            try:
                values[key] = _convert(key, raw.strip())
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {key}: {exc}") from None
    return values


def _common(p):
    p.add_argument("--config", metavar="FILE", help="key = value settings file")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--gamma", type=_parse_optional_float,
                   help="truncation rate; 'none' for 20/n (default)")
    p.add_argument("--q", type=float, help="Laplacian power (default 1)")
    p.add_argument("--a", type=float, help="gamma prior shape on the scale (default 0)")
    p.add_argument("--b", type=float, help="gamma prior rate on the scale (default 0)")
    p.add_argument("--iters", type=int, help="MCMC iterations (default 10000)")
    p.add_argument("--burnin", type=int, help="discarded iterations (default 2000)")
    p.add_argument("--thin", type=int, help="storage stride for f (default 5)")
    p.add_argument("--mode", choices=("reject", "extend"),
                   help="handling of k beyond the computed eigenpairs")
    p.add_argument("--basis-size", type=int, help="eigenpairs to precompute")
    p.add_argument("--out", metavar="DIR", help="output directory (default .)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")


def _mnist_inputs(p):
    p.add_argument("--train-images", metavar="IDX")
    p.add_argument("--train-labels", metavar="IDX")
    p.add_argument("--test-images", metavar="IDX")
    p.add_argument("--test-labels", metavar="IDX")
    p.add_argument("--synthetic", action="store_const", const=True,
                   help="use a two-cluster stand-in instead of MNIST files")
    p.add_argument("--knn", type=int, help="neighbours per vertex (default 15)")
    p.add_argument("--pca-dims", type=int, help="projection dimension (default 50)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="truncgraph",
        description="Graph-based binary classification with a randomly truncated "
        "Laplacian eigenbasis prior.",
    )
    sub = parser.add_subparsers(dest="kind", required=True, metavar="experiment")

    p = sub.add_parser("path-demo", help="path graph with synthetic labels")
    _common(p)
    p.add_argument("--n", type=int, help="vertices (default 500)")
    p.add_argument("--observe-frac", type=float, help="share of labels observed (default 0.8)")

    p = sub.add_parser("ws-demo", help="Watts-Strogatz small-world graph")
    _common(p)
    p.add_argument("--n", type=int, help="vertices before taking the largest component "
                   "(default 1000)")
    p.add_argument("--observe-frac", type=float, help="share of labels observed (default 0.8)")
    p.add_argument("--rewire-prob", type=float, help="rewiring probability (default 0.25)")

    p = sub.add_parser("mnist", help="4-vs-9 digits on a k-NN graph")
    _common(p)
    _mnist_inputs(p)
    p.add_argument("--n", type=int, help="stratified subsample size (default: all)")

    p = sub.add_parser("tracking", help="moving disc on a 3-D pixel grid")
    _common(p)
    p.add_argument("--width", type=int, help="frame width (default 20)")
    p.add_argument("--height", type=int, help="frame height (default 20)")
    p.add_argument("--frames", type=int, help="frame count (default 5)")
    p.add_argument("--unobserved-frac", type=float, help="hidden pixel share (default 0.1)")
    p.add_argument("--corrupt-frame", type=int,
                   help="1-based frame given a spurious disc; 0 for none (default 3)")
    p.add_argument("--radius", type=float, help="disc radius (default 10%% of the frame)")
    p.add_argument("--spurious-radius", type=float, help="spurious disc radius (default: radius)")
    p.add_argument("--travel", type=float,
                   help="share of the diagonal the disc covers (default 1)")
    p.add_argument("--full", action="store_const", const=True,
                   help="100x100x9 animation, spurious disc in frame 5")

    p = sub.add_parser("bench", help="truncated vs untruncated timing on k-NN subsamples")
    _common(p)
    _mnist_inputs(p)
    p.add_argument("--sizes", help="ascending comma-separated sizes "
                   "(default 250,500,1000,2000,4000)")
    return parser


def make_config(args):
    """Merge defaults, the optional config file and explicit flags."""
    values = read_config(args.config) if args.config else {}
    for name, value in vars(args).items():
        if name in _FIELDS and value is not None:
            values[name] = value
    values["kind"] = args.kind
    return ExperimentConfig(**values).validate()


def _report(cfg, result):
    metrics = result.get("metrics")
    if metrics:
        shown = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in metrics.items())
        print(f"{cfg.kind}: {shown}")
    for row in result.get("rows", []):
        print("{}: size={} method={} seconds={:.3f} accuracy={:.4f}".format(cfg.kind, *row))
    print(f"outputs written to {cfg.out}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        result = RUNNERS[cfg.kind](cfg)
    except (ValueError, OSError, RuntimeError, IndexError) as exc:
        print(f"truncgraph {args.kind}: error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print(f"truncgraph {args.kind}: interrupted", file=sys.stderr)
        return 130
    _report(cfg, result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
