"""Command-line entry point: ``riskfield {run,batch,render,validate}``.

Exit status is 0 on success, 1 for data or validation errors and 2 for usage
errors (bad flags, unknown override keys).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import PROVIDERS, ConfigError, parse_override
from .imageio import mask_to_gray, write_pgm, write_ppm
from .perception import PerceptionError, read_response, safe_name
from .planner import write_scores_csv
from .projection import project_ground_points, pixel_indices
from .scene import BUNDLED, MotorcycleState, ScenarioError, load_scenario, resolve_scenario_path
from .simulator import (
    MODES,
    risk_for_mode,
    make_provider,
    run_batch,
    run_episode,
    write_batch_csv,
    write_summary_json,
    write_trajectory_csv,
)

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2

TRACE_RGB = (255, 255, 255)


class UsageError(Exception):
    pass


def _load(ref, overrides):
    scenario = load_scenario(ref)
    try:
        parsed = [parse_override(text) for text in overrides or ()]
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    try:
        return scenario.with_overrides(parsed)
    except ConfigError as exc:
        # unknown names are usage errors; bad values are data errors
        if "unknown" in str(exc):
            raise UsageError(str(exc)) from None
        raise


def _check_provider(args):
    if args.provider == "external" and not args.endpoint:
        raise UsageError("--provider external requires --endpoint")


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _draw_trace(rgb: np.ndarray, xy: np.ndarray, camera, ground_offset: float) -> np.ndarray:
    out = rgb.copy()
    m, n, valid = project_ground_points(xy, camera, ground_offset)
    cols, rows = pixel_indices(m, n, camera)
    out[rows[valid], cols[valid]] = TRACE_RGB
    return out


def _parse_state(text: str) -> MotorcycleState:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--state expects comma-separated numbers, got {text!r}") from None
    if not 4 <= len(values) <= 6:
        raise UsageError("--state expects x,y,theta,v[,delta[,phi]]")
    return MotorcycleState(*values)


# --- commands ----------------------------------------------------------------


def cmd_run(args) -> int:
    _check_provider(args)
    scenario = _load(args.scenario, args.set)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pp = scenario.planner_params

    observer = None
    first_frame = {}
    if args.render:
        frames = out / "frames"
        frames.mkdir(exist_ok=True)

        def observer(frame, state, camera, detections, risk, result):
            stem = frames / f"frame_{frame:04d}"
            risk.write_pgm(f"{stem}_risk.pgm")
            risk.write_ppm(f"{stem}_risk.ppm")
            overlay = _draw_trace(risk.to_rgb(), result.trajectory.positions, camera, pp.ground_offset)
            write_ppm(f"{stem}_overlay.ppm", overlay)
            write_scores_csv(f"{stem}_scores.csv", result.scores)
            if frame == 0:
                first_frame.update(camera=camera, risk=risk)

    result = run_episode(
        scenario, args.mode, args.seed, provider=args.provider, endpoint=args.endpoint,
        observer=observer,
    )
    write_trajectory_csv(out / "trajectory.csv", result.trajectory, pp.dt)
    if first_frame:
        xy = np.array([(s.x, s.y) for s in result.trajectory])
        overlay = _draw_trace(first_frame["risk"].to_rgb(), xy, first_frame["camera"], pp.ground_offset)
        write_ppm(out / "overlay.ppm", overlay)
    doc = {
        "command": "run",
        "version": __version__,
        "config": {
            "scenario": scenario.to_dict(),
            "mode": args.mode,
            "seed": args.seed,
            "provider": args.provider or scenario.trials.provider,
            "endpoint": args.endpoint,
        },
        "result": result.summary(),
    }
    _write_json(out / "result.json", doc)
    summary = result.summary()
    exposure = summary["hazard_exposure_distance"]
    print(
        f"{scenario.name} [{args.mode}] seed={args.seed}: termination={result.termination} "
        f"success={result.success} steps={result.steps} "
        f"exposure={'n/a' if exposure is None else f'{exposure:.3f}'}"
    )
    return EXIT_OK


def _table(batches) -> str:
    lines = [f"{'scenario':<14}{'mode':<10}{'trials':>7}{'success %':>11}{'exposure m':>12}"]
    for b in batches:
        mean = b.mean_hazard_exposure_distance
        exp = f"{mean:.3f}" if math.isfinite(mean) else "n/a"
        lines.append(f"{b.scenario:<14}{b.mode:<10}{b.n_trials:>7}{b.success_rate:>11.1f}{exp:>12}")
    return "\n".join(lines)


def cmd_batch(args) -> int:
    _check_provider(args)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    refs = args.scenario or list(BUNDLED)
    modes = args.mode or list(MODES)
    scenarios = [_load(ref, args.set) for ref in refs]
    out = Path(args.out)
    traj_dir = out / "trajectories"
    traj_dir.mkdir(parents=True, exist_ok=True)
    batches = []
    for scenario in scenarios:
        for mode in modes:
            b = run_batch(
                scenario, mode, args.trials, args.seed, provider=args.provider,
                endpoint=args.endpoint, workers=args.workers,
            )
            batches.append(b)
            for i, r in enumerate(b.results):
                write_trajectory_csv(
                    traj_dir / f"{scenario.name}_{mode}_{i:03d}.csv",
                    r.trajectory, scenario.planner_params.dt,
                )
    write_batch_csv(out / "batch.csv", batches)
    config = {
        "command": "batch",
        "version": __version__,
        "scenarios": [s.to_dict() for s in scenarios],
        "modes": modes,
        "trials": args.trials,
        "seed": args.seed,
        "provider": args.provider,
        "endpoint": args.endpoint,
    }
    write_summary_json(out / "summary.json", batches, config)
    print(_table(batches))
    return EXIT_OK


def cmd_render(args) -> int:
    _check_provider(args)
    scenario = _load(args.scenario, args.set)
    state = _parse_state(args.state) if args.state else scenario.start
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    camera = scenario.camera_at(state)
    provider = make_provider(scenario, args.provider, args.seed, args.endpoint)
    detections = provider.perceive(scenario, camera, state, 0)
    for det in detections:
        write_pgm(out / f"mask_{safe_name(det.hazard_id)}.pgm", mask_to_gray(det.mask))
    risk = risk_for_mode(args.mode, detections, scenario, camera.shape)
    risk.write_pgm(out / "risk.pgm")
    risk.write_ppm(out / "risk.ppm")
    doc = {
        "command": "render",
        "version": __version__,
        "config": {
            "scenario": scenario.to_dict(),
            "state": state.to_dict(),
            "mode": args.mode,
            "provider": args.provider,
            "seed": args.seed,
        },
        "detections": [
            {"hazard_id": d.hazard_id, "label": d.label, "c_vlm": d.c_vlm,
             "confidence": d.confidence, "depth_m": d.depth_m, "pixels": int(d.mask.sum())}
            for d in detections
        ],
        "risk_max": float(risk.values.max()),
    }
    _write_json(out / "render.json", doc)
    print(f"{scenario.name}: {len(detections)} detection(s), max risk {doc['risk_max']:.3f}")
    return EXIT_OK


def cmd_validate(args) -> int:
    path = Path(args.path)
    if not path.exists():
        if args.path not in BUNDLED:
            raise FileNotFoundError(f"no such file: {path}")
        path = resolve_scenario_path(args.path)
    if path.is_dir() or _is_response(path):
        response = read_response(path)
        print(
            f"valid response: {response.width}x{response.height}, "
            f"{len(response.detections)} detection(s)"
        )
        return EXIT_OK
    scenario = load_scenario(path)
    print(f"valid scenario {scenario.name!r}: {len(scenario.hazards)} hazard(s)")
    return EXIT_OK


def _is_response(path: Path) -> bool:
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return False
    return isinstance(doc, dict) and "detections" in doc


# --- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskfield", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, repeat_scenario=False):
        if repeat_scenario:
            p.add_argument("--scenario", action="append", help="scenario file or bundled name (repeatable)")
        else:
            p.add_argument("--scenario", required=True, help="scenario file or bundled name")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--provider", choices=PROVIDERS, help="perception provider")
        p.add_argument("--endpoint", help="external provider command")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="parameter override, e.g. riskmap.alpha_vlm=0.9 (repeatable)")

    run = sub.add_parser("run", help="run one closed-loop episode")
    common(run)
    run.add_argument("--mode", choices=MODES, default="ours")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--render", action="store_true", help="write per-frame images and plan scores")
    run.set_defaults(func=cmd_run)

    batch = sub.add_parser("batch", help="run repeated trials and compare modes")
    common(batch, repeat_scenario=True)
    batch.add_argument("--mode", choices=MODES, action="append")
    batch.add_argument("--trials", type=int, default=50)
    batch.add_argument("--seed", type=int, default=0)
    batch.add_argument("--workers", type=int, help="worker processes (default: RISKFIELD_THREADS or CPU count)")
    batch.set_defaults(func=cmd_batch)

    render = sub.add_parser("render", help="write hazard masks and the fused risk map for one pose")
    common(render)
    render.add_argument("--mode", choices=MODES, default="ours")
    render.add_argument("--seed", type=int, default=0, help="noise seed for the noisy provider")
    render.add_argument("--state", help="x,y,theta,v[,delta[,phi]] (default: scenario start)")
    render.set_defaults(func=cmd_render, provider_default="oracle")

    validate = sub.add_parser("validate", help="check a scenario file or a provider response")
    validate.add_argument("path")
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "provider", None) is None and hasattr(args, "provider_default"):
        args.provider = args.provider_default
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"riskfield: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, ConfigError, PerceptionError, OSError, ValueError) as exc:
        print(f"riskfield: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
