"""
Command-line surface: one subcommand per pipeline.

Exit codes: 0 success, 2 invalid input or flags, 1 runtime failure.
"""
import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from models import (
    ChirpParams,
    DiffusionParams,
    GaborParams,
    PhantomSpec,
    ReassignParams,
    RunConfig,
    SmoothingParams,
)
from orchestrator import handle_run, report_summary
from utils.config import configure_logging
from utils.errors import GaborFlowError, InputValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--report", help="write the JSON run report here")
    sub.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ...")
    sub.add_argument("--render", help="write a PPM/PGM picture of the result here")
    sub.add_argument("--style", default="overlay", choices=["phase-hue", "modulus-gray", "overlay"])


def _add_grid(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--preset", help="named parameter set, e.g. paper128")
    for name in ("N", "K", "M", "L", "Q"):
        sub.add_argument(f"--{name}", type=int)
    sub.add_argument("--a", type=float, help="window scale")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaborflow", description="Gabor transforms and left-invariant evolutions")
    subs = parser.add_subparsers(dest="command", required=True)

    gabor = subs.add_parser("gabor", help="analysis (signal -> field) or --inverse synthesis")
    gabor.add_argument("input")
    gabor.add_argument("output")
    gabor.add_argument("--window", default="gaussian", choices=["gaussian", "cr"])
    gabor.add_argument("--inverse", action="store_true")
    gabor.add_argument("--reference", help="signal to compare the synthesis against")
    _add_grid(gabor)
    _add_common(gabor)

    reassign = subs.add_parser("reassign", help="sharpen a phase field")
    reassign.add_argument("input")
    reassign.add_argument("output")
    reassign.add_argument("--method", default="erosion", choices=["upwind", "erosion"])
    reassign.add_argument("--window", default="gaussian", choices=["gaussian", "cr"])
    reassign.add_argument("--a", type=float)
    reassign.add_argument("--t", type=float, default=0.1)
    reassign.add_argument("--dt", type=float, default=1e-3)
    reassign.add_argument("--eta", type=float, default=1.0)
    reassign.add_argument("--mobility", default="unit", choices=["unit", "modulus"])
    reassign.add_argument("--scheme", default="upwind", choices=["upwind", "as-written"])
    reassign.add_argument("--step-scale", default="unit", choices=["unit", "literal"])
    reassign.add_argument("--erosion-sampling", default="interpolated", choices=["interpolated", "grid"])
    reassign.add_argument("--reference", help="original signal; reports eps1/eps2")
    _add_common(reassign)

    diffuse = subs.add_parser("diffuse", help="CED or linear left-invariant smoothing")
    diffuse.add_argument("input")
    diffuse.add_argument("output")
    diffuse.add_argument("--mode", default="ced", choices=["ced", "linear"])
    diffuse.add_argument("--beta", type=float)
    diffuse.add_argument("--eps", type=float, default=0.1)
    diffuse.add_argument("--c", type=float, default=1.0)
    diffuse.add_argument("--sigma", type=float, default=1.0)
    diffuse.add_argument("--rho", type=float)
    diffuse.add_argument("--dt", type=float, default=0.05)
    diffuse.add_argument("--t", type=float, default=0.5)
    diffuse.add_argument("--adaptivity", default="hessian", choices=["hessian", "structure-tensor"])
    diffuse.add_argument("--ordering", default="ascending", choices=["ascending", "descending"])
    diffuse.add_argument("--readapt", action="store_true")
    diffuse.add_argument("--D11", type=float, default=1.0)
    diffuse.add_argument("--D22", type=float, default=1.0)
    diffuse.add_argument("--c-loc", type=float, default=1.0)
    _add_common(diffuse)

    oracle = subs.add_parser("chirp-oracle", help="exact (eroded) chirp transform and its eigenframe")
    oracle.add_argument("-o", "--output")
    oracle.add_argument("--b", type=float, default=0.5)
    oracle.add_argument("--r", type=float, default=1.0)
    oracle.add_argument("--a", type=float, default=1 / 8)
    oracle.add_argument("--t", type=float, default=0.0)
    oracle.add_argument("--eta", type=float, default=0.5)
    oracle.add_argument("--grid", type=int, nargs=2, metavar=("K", "M"))
    _add_common(oracle)

    freq = subs.add_parser("freqfield", help="local frequency covectors of tagged images")
    freq.add_argument("inputs", nargs="+", help="one PGM per tag direction, or one raw [T, n, N, N] stack")
    freq.add_argument("-o", "--output", required=True)
    freq.add_argument("--directions", type=float, nargs="+")
    freq.add_argument("--dc-mask-radius", type=float, default=2.0)
    freq.add_argument("--refine", default="center-of-mass", choices=["argmax", "center-of-mass"])
    freq.add_argument("--smooth-t", type=float, help="linear smoothing time before extraction")
    _add_grid(freq)
    _add_common(freq)

    for name, help_text in (("phantom", "synthetic tagged phantom"), ("defnet", "deformation net of a tag stack")):
        sub = subs.add_parser(name, help=help_text)
        if name == "defnet":
            sub.add_argument("inputs", nargs="*", help="raw tag stack; omitted -> phantom from the flags")
            sub.add_argument("--reference", help="ground-truth net CSV (t,r,j,x,y,masked)")
            sub.add_argument("--dc-mask-radius", type=float, default=2.0)
            sub.add_argument("--refine", default="center-of-mass", choices=["argmax", "center-of-mass"])
            sub.add_argument("--smooth-t", type=float)
            _add_grid(sub)
        sub.add_argument("-o", "--output", required=True)
        sub.add_argument("--size", type=int, default=64)
        sub.add_argument("--frames", type=int, default=10)
        sub.add_argument("--directions", type=float, nargs="+")
        sub.add_argument("--tag-period", type=float, default=8.0)
        sub.add_argument("--scaling", type=float, default=0.02)
        sub.add_argument("--rotation", type=float, default=0.01)
        sub.add_argument("--radius", type=float, default=32.0)
        sub.add_argument("--fading", type=float, default=0.0)
        sub.add_argument("--rings", type=int, default=6)
        sub.add_argument("--points", type=int, default=40)
        sub.add_argument("--inner-radius", type=float, default=8.0)
        sub.add_argument("--outer-radius", type=float, default=20.0)
        _add_common(sub)

    table = subs.add_parser("table", help="chirp reassignment error table as CSV")
    table.add_argument("-o", "--output")
    table.add_argument("--N", type=int, default=128)
    table.add_argument("--a", type=float, nargs="+", default=[1 / 8, 1 / 6])
    table.add_argument("--t", type=float, default=0.1)
    table.add_argument("--dt", type=float, default=1e-3)
    _add_common(table)
    return parser


def _gabor_params(args: argparse.Namespace) -> Optional[GaborParams]:
    """Explicit grid flags; missing K/M/L/Q default to extreme oversampling of N."""
    if getattr(args, "N", None) is None:
        if getattr(args, "preset", None) and getattr(args, "a", None) is not None:
            return GaborParams.preset(args.preset).with_scale(args.a)
        return None
    N = args.N
    return GaborParams(
        N=N,
        K=args.K or N,
        M=args.M or N,
        L=args.L or 1,
        Q=args.Q or 2 * (args.M or N),
        a=args.a if args.a is not None else 1 / 8,
    )


def _phantom_spec(args: argparse.Namespace) -> PhantomSpec:
    fields = dict(
        size=args.size,
        frames=args.frames,
        tag_period=args.tag_period,
        scaling=args.scaling,
        rotation=args.rotation,
        radius=args.radius,
        fading=args.fading,
        rings=args.rings,
        points=args.points,
        inner_radius=args.inner_radius,
        outer_radius=args.outer_radius,
    )
    if args.directions:
        fields["directions"] = args.directions
    return PhantomSpec(**fields)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cmd = args.command
    base = dict(command=cmd, report=args.report, render=args.render, style=args.style)

    if cmd == "gabor":
        return RunConfig(
            **base, inputs=[args.input], output=args.output, preset=args.preset, gabor=_gabor_params(args),
            window=args.window, inverse=args.inverse, reference=args.reference,
        )
    if cmd == "reassign":
        rp = ReassignParams(
            method=args.method, t_final=args.t, dt=args.dt, a=args.a, eta=args.eta,
            mobility=args.mobility, scheme=args.scheme, step_scale=args.step_scale,
            erosion_sampling=args.erosion_sampling,
        )
        return RunConfig(
            **base, inputs=[args.input], output=args.output, window=args.window, reassign=rp, reference=args.reference,
        )
    if cmd == "diffuse":
        dp = DiffusionParams(
            beta=args.beta, eps=args.eps, c=args.c, sigma=args.sigma, rho=args.rho, dt=args.dt, t_final=args.t,
            adaptivity=args.adaptivity, ordering=args.ordering, readapt=args.readapt,
        )
        sp = SmoothingParams(D11=args.D11, D22=args.D22, c_loc=args.c_loc, t=args.t) if args.mode == "linear" else None
        return RunConfig(
            **base, inputs=[args.input], output=args.output, mode=args.mode, diffusion=dp, smoothing=sp, t=args.t,
        )
    if cmd == "chirp-oracle":
        if args.grid and args.grid[0] != args.grid[1]:
            raise InputValidationError("invalid-argument", f"chirp oracle grid needs K == M, got {args.grid}")
        K = args.grid[0] if args.grid else 128
        return RunConfig(
            **base, output=args.output, chirp=ChirpParams(b=args.b, r=args.r), t=args.t,
            gabor=GaborParams.extreme(K, args.a), reassign=ReassignParams(eta=args.eta),
            grid=args.grid,
        )
    if cmd == "freqfield":
        phantom = PhantomSpec(directions=args.directions) if args.directions else PhantomSpec()
        smoothing = SmoothingParams(t=args.smooth_t) if args.smooth_t else None
        return RunConfig(
            **base, inputs=args.inputs, output=args.output, preset=args.preset, gabor=_gabor_params(args),
            phantom=phantom, dc_mask_radius=args.dc_mask_radius, refine=args.refine, smoothing=smoothing,
        )
    if cmd == "phantom":
        return RunConfig(**base, output=args.output, phantom=_phantom_spec(args))
    if cmd == "defnet":
        smoothing = SmoothingParams(t=args.smooth_t) if args.smooth_t else None
        return RunConfig(
            **base, inputs=args.inputs, output=args.output, reference=args.reference, preset=args.preset,
            gabor=_gabor_params(args), phantom=_phantom_spec(args), dc_mask_radius=args.dc_mask_radius,
            refine=args.refine, smoothing=smoothing,
        )
    # table
    return RunConfig(
        **base, output=args.output, grid=[args.N], a_values=args.a, reassign=ReassignParams(t_final=args.t, dt=min(args.dt, args.t)),
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        config = config_from_args(args)
        report = handle_run(config)
    except ValidationError as e:
        logger.error(f"invalid parameters: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except InputValidationError as e:
        logger.error(f"invalid input: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except GaborFlowError as e:
        logger.error(f"run failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception(f"unexpected failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(report_summary(report))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
