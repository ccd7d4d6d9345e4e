import json
import logging
import time
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from engines import chirp as chirp_engine
from engines import deform2d
from engines.diffusion import ced_evolve, linear_smooth
from engines.fields import PhaseField
from engines.gabor import gabor_analysis, gabor_synthesis, get_window, make_gaussian_window
from engines.reassignment import energy_rescale, reassign, reassign_signal, reconstruction_errors
from models import ChirpParams, GaborParams, ReassignParams, RunConfig, RunReport, SmoothingParams
from utils import render, signal_io
from utils.errors import GaborFlowError, InputValidationError, require

logger = logging.getLogger(__name__)

DRIFT_TOLERANCE = 0.5
TABLE_A_VALUES = (1 / 8, 1 / 6)

# (method, window, t) -> reference (eps1, eps2); "gaussian" is the sampled continuous window
REFERENCE_ERRORS: Dict[Tuple[str, str, float], Tuple[float, float]] = {
    ("erosion", "gaussian", 0.1): (2.41e-2, 8.38e-3),
    ("erosion", "cr", 0.1): (8.25e-2, 7.89e-2),
    ("upwind", "gaussian", 0.1): (2.16e-2, 2.21e-3),
    ("upwind", "cr", 0.1): (1.47e-2, 3.32e-4),
    ("upwind", "cr", 0.16): (2.43e-2, 6.43e-3),
}


def _params(config: RunConfig, fallback: Optional[GaborParams] = None) -> GaborParams:
    p = config.gabor_params() or fallback
    if p is None:
        raise InputValidationError("invalid-argument", "Gabor parameters required: pass --preset or N/K/M/L/Q/a")
    return p


def _input(config: RunConfig, index: int = 0) -> str:
    require(len(config.inputs) > index, "invalid-argument", f"{config.command}: missing input file #{index + 1}")
    return config.inputs[index]


def _output(config: RunConfig) -> str:
    require(bool(config.output), "invalid-argument", f"{config.command}: an output path is required")
    return config.output


def _maybe_render_field(config: RunConfig, G, report: RunReport) -> None:
    if config.render and G.dim == 1:
        report.outputs.append(render.write_ppm(config.render, render.render_field(G, config.style)))


# ---------------------------------------------------------
# 1D pipelines
# ---------------------------------------------------------

def _run_gabor(config: RunConfig, report: RunReport) -> None:
    if config.inverse:
        G = signal_io.read_field(_input(config))
        p = G.params
        w = get_window(config.window, p)
        f = gabor_synthesis(G, w, p)
        report.outputs.append(signal_io.write_signal(_output(config), f))
        if config.reference:
            eps1, eps2 = reconstruction_errors(signal_io.read_signal(config.reference), f)
            report.metrics.update({"eps1": eps1, "eps2": eps2})
        report.parameters["gabor"] = p.model_dump()
        return

    f = signal_io.read_signal(_input(config))
    p = _params(config)
    require(f.size == p.N, "shape-mismatch", f"signal length {f.size} != N={p.N}")
    G = gabor_analysis(f, get_window(config.window, p), p)
    report.outputs.append(signal_io.write_field(_output(config), G))
    report.metrics["l2_norm"] = float(np.linalg.norm(G.data))
    report.parameters["gabor"] = p.model_dump()
    _maybe_render_field(config, G, report)


def _run_reassign(config: RunConfig, report: RunReport) -> None:
    G = signal_io.read_field(_input(config))
    p = G.params
    rp = config.reassign
    report.parameters.update({"gabor": p.model_dump(), "reassign": rp.model_dump()})

    if G.dim == 2:
        out = deform2d.reassign2d(G, rp, p)
        report.outputs.append(signal_io.write_field(_output(config), out))
        return

    outcome = reassign(G, rp, p)
    report.frozen_cells = outcome.frozen_cells
    report.warnings.extend(outcome.warnings)
    report.metrics.update({"steps": outcome.steps, "substeps": outcome.substeps, "courant": outcome.courant})
    report.outputs.append(signal_io.write_field(_output(config), outcome.field))
    _maybe_render_field(config, outcome.field, report)

    if config.reference:
        f = signal_io.read_signal(config.reference)
        w = get_window(config.window, p)
        f_tilde = energy_rescale(gabor_synthesis(outcome.field, w, p), f)
        eps1, eps2 = reconstruction_errors(f, f_tilde)
        report.metrics.update({"eps1": eps1, "eps2": eps2})


def _run_diffuse(config: RunConfig, report: RunReport) -> None:
    G = signal_io.read_field(_input(config))
    p = G.params
    if config.mode == "linear":
        sp = config.smoothing or SmoothingParams(t=config.t or 0.1)
        out = deform2d.linear_smooth2d(G, sp, p) if G.dim == 2 else linear_smooth(G, sp, p)
        report.parameters["smoothing"] = sp.model_dump()
    else:
        require(G.dim == 1, "invalid-argument", "CED runs on d=1 phase fields")
        out = ced_evolve(G, config.diffusion, p)
        report.parameters["diffusion"] = config.diffusion.model_dump()
    report.metrics.update({"l2_before": float(np.linalg.norm(G.data)), "l2_after": float(np.linalg.norm(out.data))})
    report.outputs.append(signal_io.write_field(_output(config), out))
    _maybe_render_field(config, out, report)


def chirp_oracle(c: ChirpParams, a: float = 1.0, t: float = 0.0, c_level: float = 1.0) -> Dict[str, Any]:
    """Eigenframe of the rescaled chirp transform plus, for t > 0, the anisotropy of the eroded contour."""
    form = chirp_engine.chirp_gabor_exact(chirp_engine.rescaled_chirp(c, a))
    frame = chirp_engine.eigenframe(form)
    out = {"form": form.to_dict(), "frame": frame.to_dict(c_level), "a": a, "t": t}
    if 0 < t < frame.finite_time(c_level):
        out["anisotropy"] = chirp_engine.collapse_anisotropy(frame, t, c_level)
    return out


def _run_chirp_oracle(config: RunConfig, report: RunReport) -> None:
    if config.grid:
        K = config.grid[0]
        require(len(config.grid) == 1 or config.grid[1] == K, "invalid-argument", "chirp oracle grid needs K == M")
        fallback = GaborParams.extreme(K, a=config.reassign.a or 1 / 8)
    else:
        fallback = GaborParams.preset("paper128")
    p = _params(config, fallback)
    oracle = chirp_oracle(config.chirp, p.a, config.t)
    report.metrics.update(oracle)
    report.parameters.update({"gabor": p.model_dump(), "chirp": config.chirp.model_dump(), "eta": config.reassign.eta})

    if config.t > 0:
        P_, Q_ = chirp_engine.phase_grid(p)
        values = chirp_engine.eroded_chirp_field(config.chirp, p.a, config.t, P_, Q_, eta=config.reassign.eta)
        G = PhaseField(values, p)
    else:
        G = chirp_engine.sampled_exact_field(config.chirp, p)
    report.metrics["max_modulus"] = float(G.modulus.max())
    if config.output:
        report.outputs.append(signal_io.write_field(config.output, G))
        _maybe_render_field(config, G, report)


# ---------------------------------------------------------
# 2D pipelines
# ---------------------------------------------------------

def _load_stack(config: RunConfig) -> deform2d.TagStack:
    """One raw [T, n, N, N] stack, or one image per tag direction forming a single frame."""
    first = _input(config)
    if not first.lower().endswith(".pgm"):
        data, directions = signal_io.read_array(first)
        if data.ndim == 4:
            return deform2d.TagStack(images=data, directions=directions or list(config.phantom.directions))
    images = [signal_io.read_image(path) for path in config.inputs]
    directions = list(config.phantom.directions)[: len(images)]
    return deform2d.TagStack(images=np.stack(images)[None], directions=directions)


def _run_freqfield(config: RunConfig, report: RunReport) -> None:
    stack = _load_stack(config)
    size = stack.images.shape[-1]
    p = _params(config, deform2d.image_gabor_params(size))
    w = make_gaussian_window(p)
    fields = deform2d.estimate_frequency_fields(stack, w, p, config.smoothing, config.dc_mask_radius, config.refine)
    q = np.stack([[f.q for f in row] for row in fields])
    valid = np.stack([[f.valid for f in row] for row in fields])
    report.outputs.append(signal_io.write_array(_output(config), q, stack.directions))
    report.metrics.update({"valid_fraction": float(valid.mean()), "frames": stack.frames})
    report.parameters["gabor"] = p.model_dump()
    if config.render:
        canvas = render.render_frequency_field(q[0, 0], valid[0, 0], p.L, stack.images[0, 0])
        report.outputs.append(render.write_ppm(config.render, canvas))


def _run_phantom(config: RunConfig, report: RunReport) -> None:
    phantom = deform2d.make_phantom(config.phantom)
    out = _output(config)
    report.outputs.append(signal_io.write_array(out, phantom.stack.images, phantom.stack.directions))
    report.outputs.append(signal_io.write_net_csv(f"{out}.truth.csv", phantom.truth.points, phantom.truth.masked))
    report.parameters["phantom"] = config.phantom.model_dump()
    if config.render:
        report.outputs.append(signal_io.write_pgm(config.render, phantom.stack.images[-1, 0]))


def _run_defnet(config: RunConfig, report: RunReport) -> None:
    truth = None
    if config.inputs:
        stack = _load_stack(config)
    else:
        phantom = deform2d.make_phantom(config.phantom)
        stack, truth = phantom.stack, phantom.truth.points
    if config.reference:
        truth, _ = signal_io.read_net_csv(config.reference)

    size = stack.images.shape[-1]
    p = _params(config, deform2d.image_gabor_params(size))
    w = make_gaussian_window(p)
    fields = deform2d.estimate_frequency_fields(stack, w, p, config.smoothing, config.dc_mask_radius, config.refine)
    D_fields = deform2d.estimate_deformation(fields)

    if truth is not None:
        require(truth.shape[0] == stack.frames, "shape-mismatch", "reference net and stack differ in frame count")
        grid0, seed = truth[0], truth[:, 0, 0]
    else:
        spec = config.phantom
        center = spec.center or [size / 2.0, size / 2.0]
        grid0 = deform2d.polar_grid(center, spec.inner_radius, spec.outer_radius, spec.rings, spec.points)
        seed = np.repeat(grid0[0, 0][None], stack.frames, axis=0)

    net = deform2d.deformation_net(D_fields, seed, grid0)
    report.outputs.append(signal_io.write_net_csv(_output(config), net.points, net.masked))
    masked = int(net.masked.sum())
    report.metrics.update({"masked_points": masked, "frames": stack.frames})
    if masked:
        report.warnings.append(f"{masked} net points sampled outside the valid deformation field")
    if truth is not None:
        truth_net = deform2d.DeformationNet(points=truth, masked=np.zeros(truth.shape[:-1], dtype=bool))
        static = deform2d.DeformationNet(points=np.repeat(grid0[None], stack.frames, axis=0), masked=net.masked)
        report.metrics["mean_error_px"] = deform2d.net_error(net, truth_net)
        report.metrics["static_error_px"] = deform2d.net_error(static, truth_net)
    if config.render:
        canvas = render.render_net(net.points[-1], net.masked[-1], stack.images[-1, 0])
        report.outputs.append(render.write_ppm(config.render, canvas))


# ---------------------------------------------------------
# Reassignment error table
# ---------------------------------------------------------

def run_table(
    a_values: Sequence[float] = TABLE_A_VALUES,
    t: float = 0.1,
    dt: float = 1e-3,
    N: int = 128,
    chirp: Optional[ChirpParams] = None,
) -> pd.DataFrame:
    """
    Reconstruction errors of chirp reassignment for both windows and both
    methods, plus upwind with the CR window at t=0.16, against reference values.
    """
    chirp = chirp or ChirpParams()
    f = chirp_engine.chirp_signal(chirp, N)
    runs = [(method, window, t) for method in ("erosion", "upwind") for window in ("gaussian", "cr")]
    runs.append(("upwind", "cr", 0.16))

    rows: List[Dict[str, Any]] = []
    for a in a_values:
        p = GaborParams.extreme(N, a)
        for method, window, t_run in runs:
            rp = ReassignParams(method=method, t_final=t_run, dt=dt, a=a)
            result = reassign_signal(f, get_window(window, p), rp, p)
            reference = REFERENCE_ERRORS.get((method, window, round(t_run, 6)), (np.nan, np.nan))
            row = {
                "a": a,
                "method": method,
                "window": window,
                "t": t_run,
                "eps1": result["eps1"],
                "eps2": result["eps2"],
                "reference_eps1": reference[0],
                "reference_eps2": reference[1],
            }
            for key in ("eps1", "eps2"):
                ref = row[f"reference_{key}"]
                row[f"{key}_drift"] = bool(np.isfinite(ref) and abs(row[key] - ref) > DRIFT_TOLERANCE * ref)
            if row["eps1_drift"] or row["eps2_drift"]:
                logger.warning(
                    f"table drift: a={a:.4g} {method}/{window} t={t_run}: "
                    f"eps1={row['eps1']:.3e} (reference {reference[0]:.3e}), "
                    f"eps2={row['eps2']:.3e} (reference {reference[1]:.3e})"
                )
            rows.append(row)
    return pd.DataFrame(rows)


def _run_table(config: RunConfig, report: RunReport) -> None:
    a_values = config.a_values or list(TABLE_A_VALUES)
    N = config.grid[0] if config.grid else 128
    df = run_table(a_values, config.reassign.t_final, config.reassign.dt, N, config.chirp)
    report.parameters.update({"N": N, "a_values": a_values})
    if config.output:
        df.to_csv(config.output, index=False)
        report.outputs.append(config.output)
    report.metrics["rows"] = json.loads(df.to_json(orient="records"))
    report.metrics["drift_count"] = int((df["eps1_drift"] | df["eps2_drift"]).sum())


# ---------------------------------------------------------
# Dispatch
# ---------------------------------------------------------

HANDLERS: Dict[str, Callable[[RunConfig, RunReport], None]] = {
    "gabor": _run_gabor,
    "reassign": _run_reassign,
    "diffuse": _run_diffuse,
    "chirp-oracle": _run_chirp_oracle,
    "freqfield": _run_freqfield,
    "phantom": _run_phantom,
    "defnet": _run_defnet,
    "table": _run_table,
}


def handle_run(config: RunConfig) -> RunReport:
    """
    Single entry point for the CLI and the HTTP API: runs one pipeline and
    returns its report. GaborFlowError propagates to the caller.
    """
    report = RunReport(command=config.command)
    logger.info(f"Processing: {config.command} | inputs={config.inputs} output={config.output}")
    started = time.perf_counter()
    try:
        HANDLERS[config.command](config, report)
    except GaborFlowError as e:
        logger.error(f"{config.command} failed: {e}")
        raise
    report.wall_time_ms = (time.perf_counter() - started) * 1000.0
    logger.info(f"{config.command} finished in {report.wall_time_ms:.1f} ms")

    if config.report:
        with open(config.report, "w", encoding="utf-8") as fh:
            fh.write(report.model_dump_json(indent=2))
        report.outputs.append(config.report)
    return report


def report_summary(report: RunReport) -> str:
    return json.dumps({"command": report.command, "metrics": report.metrics, "warnings": report.warnings}, default=str)
