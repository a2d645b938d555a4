"""Command-line interface chaining degradation, training, reconstruction and
evaluation. Exit codes: 0 success, 2 invalid arguments, 3 data or format
error, 4 numerical failure."""

import argparse
import sys

import numpy as np

from .degrade import degrade
from .errors import (
    ConvergenceDomainViolated,
    CorruptHeader,
    DegenerateDensity,
    EmptyComponent,
    InvalidShape,
    LineSearchFailed,
    NotPositiveDefinite,
    RankDeficient,
    UncoveredPixel,
    UnsupportedFormat,
    VersionMismatch,
)
from .formats import load_model, read_image, save_model, write_image
from .gmm import EmConfig, fit_gmm
from .metrics import psnr
from .patches import PatchGeometry, extract_pairs
from .pca_gmm import PcaGmmModel, fit_pcagmm
from .superres import reconstruct

_DATA_ERRORS = (
    UnsupportedFormat,
    CorruptHeader,
    VersionMismatch,
    InvalidShape,
    FileNotFoundError,
    IsADirectoryError,
)
_NUMERIC_ERRORS = (
    NotPositiveDefinite,
    RankDeficient,
    ConvergenceDomainViolated,
    DegenerateDensity,
    EmptyComponent,
    LineSearchFailed,
    UncoveredPixel,
)

# default training patch budget for volumes; 2D enumerates exhaustively
_MAX_PATCHES_3D = 1_000_000


def _cmd_degrade(args):
    image = read_image(args.input)
    out = degrade(
        image,
        args.factor,
        blur_std=args.blur_std,
        noise_std=args.noise_std,
        seed=args.seed,
    )
    write_image(args.output, out)
    print(f"degraded {tuple(image.shape)} -> {tuple(out.shape)}")
    return 0


def _cmd_train(args):
    high = read_image(args.high)
    low = read_image(args.low)
    geom = PatchGeometry(tau=args.tau, q=args.factor, dims=high.ndim)
    max_patches = args.max_patches
    if max_patches is None and high.ndim == 3:
        max_patches = _MAX_PATCHES_3D
    pairs = extract_pairs(
        high, low, geom, stride=args.stride, max_patches=max_patches, seed=args.seed
    )
    print(f"training on {pairs.count} joint patches of dimension {geom.n_joint}")
    config = EmConfig(max_iters=args.em_iters, tol=args.em_tol)
    if args.kind == "gmm":
        model, trace = fit_gmm(pairs.data, args.components, config, seed=args.seed)
    else:
        model, trace = fit_pcagmm(
            pairs.data,
            args.components,
            args.reduced_dim,
            args.sigma,
            em_config=config,
            seed=args.seed,
        )
    for it, value in enumerate(trace.objective):
        print(f"iter {it:3d}  objective {value:.6f}")
    if trace.n_reseeds:
        print(f"reseeded {trace.n_reseeds} starved component(s)")
    save_model(args.model, model, geom)
    print(f"saved {args.kind} model to {args.model}")
    return 0


def _cmd_superres(args):
    low = read_image(args.low)
    model, geom = load_model(args.model)
    if geom is None:
        raise CorruptHeader("model file carries no patch geometry")
    out = reconstruct(low, model, geom, gamma=args.gamma)
    write_image(args.output, out)
    print(f"reconstructed {tuple(low.shape)} -> {tuple(out.shape)}")
    return 0


def _cmd_psnr(args):
    value = psnr(read_image(args.ref), read_image(args.test))
    print(f"psnr={value}")
    return 0


def _cmd_inspect(args):
    model, geom = load_model(args.model)
    kind = "pcagmm" if isinstance(model, PcaGmmModel) else "gmm"
    d = model.reduced_dim if kind == "pcagmm" else model.dim
    sigma = model.sigma if kind == "pcagmm" else 0.0
    q, tau, dims = (geom.q, geom.tau, geom.dims) if geom else (0, 0, 0)
    print(
        f"kind={kind} K={model.n_components} n={model.dim} d={d} "
        f"sigma={sigma!r} q={q} tau={tau} dims={dims}"
    )
    norms = np.linalg.norm(model.means, axis=1)
    for k in range(model.n_components):
        print(f"component {k:3d}  alpha={model.alpha[k]:.6e}  |mean|={norms[k]:.6e}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pcagmm",
        description="Mixture-model superresolution for 2D images and 3D volumes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="blur, downsample and add noise")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--factor", type=int, required=True)
    p.add_argument("--blur-std", type=float, default=0.5)
    p.add_argument("--noise-std", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_degrade)

    p = sub.add_parser("train", help="fit a mixture model on joint patches")
    p.add_argument("--high", required=True)
    p.add_argument("--low", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--kind", choices=("gmm", "pcagmm"), default="pcagmm")
    p.add_argument("--components", type=int, default=100)
    p.add_argument("--tau", type=int, default=4)
    p.add_argument("--factor", type=int, required=True)
    p.add_argument("--reduced-dim", type=int, default=20)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--max-patches", type=int, default=None)
    p.add_argument("--em-iters", type=int, default=100)
    p.add_argument("--em-tol", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--deterministic",
        action="store_true",
        help="force serial reductions (reductions are always serial here, so "
        "this flag only documents the intent)",
    )
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("superres", help="reconstruct a high-resolution image")
    p.add_argument("--low", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--gamma", type=float, default=0.1)
    p.set_defaults(func=_cmd_superres)

    p = sub.add_parser("psnr", help="peak signal-to-noise ratio of two images")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=_cmd_psnr)

    p = sub.add_parser("inspect", help="print model header and diagnostics")
    p.add_argument("--model", required=True)
    p.set_defaults(func=_cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
