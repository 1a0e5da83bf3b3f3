"""Closed-loop episodes (perceive -> risk map -> plan -> step) and batch metrics."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from shapely.geometry import Polygon

from .geometry import oriented_rectangle, polygon_centroid
from .perception import NoisyProvider, OracleProvider, ExternalProvider, SemanticLatch
from .planner import ControlSample, PlanResult, plan, step
from .riskmap import RiskMap, build_risk_map, fuse
from .scene import Hazard, MotorcycleState, Scenario

MODES = ("ours", "no_vlm", "baseline")
TERMINATIONS = ("goal", "hazard_contact", "timeout", "off_road")

__all__ = [
    "MODES",
    "EpisodeResult",
    "BatchMetrics",
    "footprint_intersects",
    "trial_seed",
    "step",
    "hazard_exposure",
    "make_provider",
    "run_episode",
    "run_batch",
]


def footprint_intersects(
    state: MotorcycleState, hazard: Hazard, length: float = 2.0, width: float = 0.8
) -> bool:
    """Does the oriented body rectangle touch the hazard footprint (closed sets)?"""
    body = Polygon(oriented_rectangle(state.x, state.y, state.theta, length, width))
    return bool(body.intersects(_hazard_polygon(hazard)))


_POLY_CACHE: dict[tuple, Polygon] = {}


def _hazard_polygon(hazard: Hazard) -> Polygon:
    poly = _POLY_CACHE.get(hazard.footprint)
    if poly is None:
        poly = _POLY_CACHE[hazard.footprint] = Polygon(hazard.footprint)
    return poly


def hazard_exposure(trajectory: Sequence[MotorcycleState], hazards: Sequence[Hazard]) -> float:
    """Minimum distance from any visited position to any hazard centroid."""
    if not trajectory or not hazards:
        raise ValueError("hazard exposure needs a nonempty trajectory and hazard list")
    xy = np.array([(s.x, s.y) for s in trajectory])
    centroids = np.array([polygon_centroid(h.footprint) for h in hazards])
    d = np.hypot(xy[:, None, 0] - centroids[None, :, 0], xy[:, None, 1] - centroids[None, :, 1])
    return float(d.min())


@dataclass(frozen=True)
class EpisodeResult:
    success: bool
    reached_goal: bool
    hazard_exposure_distance: float
    trajectory: tuple[MotorcycleState, ...]
    steps: int
    termination: str
    controls: tuple[ControlSample, ...] = ()
    lateral_offset: float = 0.0

    def summary(self) -> dict:
        exposure = self.hazard_exposure_distance
        return {
            "success": self.success,
            "reached_goal": self.reached_goal,
            "hazard_exposure_distance": exposure if math.isfinite(exposure) else None,
            "steps": self.steps,
            "termination": self.termination,
            "lateral_offset": self.lateral_offset,
            "final_state": self.trajectory[-1].to_dict(),
        }


@dataclass(frozen=True)
class BatchMetrics:
    scenario: str
    mode: str
    n_trials: int
    success_rate: float
    mean_hazard_exposure_distance: float
    results: tuple[EpisodeResult, ...] = field(repr=False, default=())

    def summary(self) -> dict:
        mean = self.mean_hazard_exposure_distance
        return {
            "scenario": self.scenario,
            "mode": self.mode,
            "n_trials": self.n_trials,
            "success_rate": self.success_rate,
            "mean_hazard_exposure_distance": mean if math.isfinite(mean) else None,
            "reached_goal_rate": 100.0 * sum(r.reached_goal for r in self.results) / self.n_trials,
            "terminations": {t: sum(r.termination == t for r in self.results) for t in TERMINATIONS},
        }


def make_provider(scenario: Scenario, provider: str | None, noise_seed: int, endpoint=None):
    kind = provider or scenario.trials.provider
    if kind == "oracle":
        return OracleProvider()
    if kind == "noisy":
        return NoisyProvider(scenario.trials.noise, noise_seed)
    if kind == "external":
        if endpoint is None:
            raise ValueError("external provider needs an endpoint")
        return ExternalProvider(endpoint)
    raise ValueError(f"unknown provider {kind!r}")


def _offset_start(start: MotorcycleState, offset: float) -> MotorcycleState:
    # shift along the body's left axis
    return dataclasses.replace(
        start,
        x=start.x - offset * math.sin(start.theta),
        y=start.y + offset * math.cos(start.theta),
    )


def risk_for_mode(mode, detections, scenario: Scenario, shape) -> RiskMap:
    rp = scenario.risk_params
    if mode == "ours":
        return build_risk_map(detections, rp, shape)
    if mode == "no_vlm":
        return build_risk_map(detections, rp.without_context(), shape)
    obstacles = set(scenario.sim_params.obstacle_labels)
    maps = [np.where(d.mask != 0, rp.c_max, 0.0) for d in detections if d.label in obstacles]
    return fuse(maps, rp.c_max, shape)


Observer = Callable[[int, MotorcycleState, object, list, RiskMap, PlanResult], None]


def run_episode(
    scenario: Scenario,
    mode: str,
    seed: int,
    provider=None,
    endpoint=None,
    observer: Observer | None = None,
) -> EpisodeResult:
    """Run one closed-loop episode.

    ``seed`` fixes the lateral start offset (drawn from the scenario's trial
    range) and the noisy provider's seed.  ``provider`` is a provider name,
    a provider object, or None for the scenario's configured provider.
    """
    if mode not in MODES:
        raise ValueError(f"invalid mode {mode!r}; expected one of {MODES}")
    rng = np.random.default_rng(seed)
    lo, hi = scenario.trials.lateral_offset
    offset = float(rng.uniform(lo, hi)) if hi > lo else lo
    noise_seed = int(rng.integers(0, 2**63 - 1))
    if provider is None or isinstance(provider, str):
        provider = make_provider(scenario, provider, noise_seed, endpoint)

    pp = scenario.planner_params
    sp = scenario.sim_params
    state = _offset_start(scenario.start, offset)
    states = [state]
    controls: list[ControlSample] = []
    latch = SemanticLatch()
    shape = scenario.camera.shape
    gx, gy = scenario.goal

    def contact(s: MotorcycleState) -> bool:
        return any(
            footprint_intersects(s, h, sp.body_length, sp.body_width) for h in scenario.hazards
        )

    termination = "timeout"
    touched = contact(state)
    if touched and sp.stop_on_contact:
        termination = "hazard_contact"
    else:
        for frame in range(sp.max_steps):
            camera = scenario.camera_at(state)
            detections = latch.apply(provider.perceive(scenario, camera, state, frame))
            risk = risk_for_mode(mode, detections, scenario, shape)
            result = plan(state, risk, camera, scenario.goal, pp)
            if observer is not None:
                observer(frame, state, camera, detections, risk, result)
            state = step(state, result.best, pp.dt, pp)
            states.append(state)
            controls.append(result.best)
            if contact(state):
                touched = True
                if sp.stop_on_contact:
                    termination = "hazard_contact"
                    break
            if math.hypot(state.x - gx, state.y - gy) <= sp.goal_radius:
                termination = "goal"
                break
            if not scenario.road.contains(state.x, state.y):
                termination = "off_road"
                break

    exposure = hazard_exposure(states, scenario.hazards) if scenario.hazards else math.inf
    return EpisodeResult(
        success=not touched,
        reached_goal=termination == "goal",
        hazard_exposure_distance=exposure,
        trajectory=tuple(states),
        steps=len(controls),
        termination=termination,
        controls=tuple(controls),
        lateral_offset=offset,
    )


def trial_seed(base_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([base_seed, trial]).generate_state(1, np.uint64)[0] >> 1)


def _run_trial(args):
    scenario, mode, seed, provider, endpoint = args
    return run_episode(scenario, mode, seed, provider=provider, endpoint=endpoint)


def thread_cap() -> int:
    raw = os.environ.get("RISKFIELD_THREADS", "")
    try:
        cap = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        cap = 1
    return max(1, cap)


def run_batch(
    scenario: Scenario,
    mode: str,
    n_trials: int,
    base_seed: int,
    provider: str | None = None,
    endpoint=None,
    workers: int | None = None,
) -> BatchMetrics:
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if mode not in MODES:
        raise ValueError(f"invalid mode {mode!r}; expected one of {MODES}")
    jobs = [
        (scenario, mode, trial_seed(base_seed, i), provider, endpoint) for i in range(n_trials)
    ]
    workers = min(workers or thread_cap(), n_trials)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial, jobs))
    else:
        results = [_run_trial(job) for job in jobs]
    return aggregate(scenario.name, mode, results)


def aggregate(scenario_name: str, mode: str, results: Sequence[EpisodeResult]) -> BatchMetrics:
    n = len(results)
    exposures = [r.hazard_exposure_distance for r in results]
    return BatchMetrics(
        scenario=scenario_name,
        mode=mode,
        n_trials=n,
        success_rate=100.0 * sum(r.success for r in results) / n,
        mean_hazard_exposure_distance=float(np.mean(exposures)),
        results=tuple(results),
    )


# --- output -----------------------------------------------------------------

BATCH_COLUMNS = ("trial", "mode", "scenario", "success", "exposure_distance", "steps", "termination")


def _fmt(value: float) -> str:
    return repr(float(value)) if math.isfinite(value) else ""


def write_batch_csv(path, batches: Sequence[BatchMetrics]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BATCH_COLUMNS)
        for b in batches:
            for i, r in enumerate(b.results):
                w.writerow(
                    [i, b.mode, b.scenario, int(r.success), _fmt(r.hazard_exposure_distance),
                     r.steps, r.termination]
                )


def write_trajectory_csv(path, states: Sequence[MotorcycleState], dt: float) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "theta", "v", "delta"])
        for i, s in enumerate(states):
            w.writerow([repr(i * dt), repr(s.x), repr(s.y), repr(s.theta), repr(s.v), repr(s.delta)])


def write_summary_json(path, batches: Sequence[BatchMetrics], config: dict) -> None:
    doc = {"config": config, "batches": [b.summary() for b in batches]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
