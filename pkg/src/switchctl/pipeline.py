"""Synthesis pipeline: frequencies, minimiser, controls, simulation, checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adjoint import TimeGrid, propagate_adjoint
from .functional import NotControllableError, Objective, WeightFamily, minimize, resolve
from .simulate import duality_check, integrate_forward
from .switching import classify, control_schedule, extract_controls, validate_switching
from .system import DEFAULT_MARGIN, kalman_check, plan_frequencies

__all__ = ["RunConfig", "RunResult", "synthesize"]


@dataclass(frozen=True)
class RunConfig:
    T: float = 1.0
    N: int = 2000
    variant: str = "exact"
    eps: float = 0.0
    margin: float = DEFAULT_MARGIN
    tol: float = 1e-9
    tie_tol: float = 1e-9
    check_tol: float = 1e-6
    probes: int = 20
    seed: int = 0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.N < 2:
            raise ValueError("N must be at least 2")
        for name in ("margin", "tol", "tie_tol", "check_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.variant == "approximate" and not self.eps > 0:
            raise ValueError("approximate variant needs eps > 0")


@dataclass
class RunResult:
    config: RunConfig
    system: object
    y0: np.ndarray
    plan: object
    grid: TimeGrid
    objective: Objective
    minimization: object
    trace: object
    partition: object
    controls: object
    trajectory: object
    duality_residual: float
    switching_valid: bool
    terminal_bound: float
    kalman_rank: int
    source_norm: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def terminal_ok(self):
        return self.trajectory.terminal_norm <= self.terminal_bound

    @property
    def success(self):
        return self.minimization.converged and self.terminal_ok and self.switching_valid

    def report(self):
        cfg = self.config
        m = self.minimization
        tr = self.trajectory
        ny0 = float(np.linalg.norm(self.y0))
        rep = {
            "system": self.system.label or "unnamed",
            "dim": self.system.dim,
            "n_controls": self.system.n_blocks,
            "kalman_rank": self.kalman_rank,
            "J_star": m.J_value,
            "el_residual": m.el_residual,
            "converged": m.converged,
            "iterations": m.iterations,
            "smoothing_path": list(m.smoothing_path),
            "terminal_norm": tr.terminal_norm,
            "terminal_norm_relative": tr.terminal_norm / ny0 if ny0 > 0 else 0.0,
            "terminal_bound": self.terminal_bound,
            "terminal_ok": self.terminal_ok,
            "tie_fraction": self.partition.tie_fraction,
            "switch_count": self.partition.switch_count,
            "switching_valid": self.switching_valid,
            "control_cost": tr.control_cost,
            "duality_residual": self.duality_residual,
            "omegas": list(self.plan.omegas),
            "frequency_mode": self.plan.mode,
            "y0_norm": ny0,
            "Z_T": list(m.Z_T),
            "config.T": cfg.T,
            "config.N": self.grid.N,
            "config.variant": cfg.variant,
            "config.eps": cfg.eps,
            "config.margin": cfg.margin,
            "config.tol": cfg.tol,
            "config.tie_tol": cfg.tie_tol,
            "config.check_tol": cfg.check_tol,
            "config.seed": cfg.seed,
        }
        for j, W in enumerate(self.plan.forbidden_sets, start=1):
            rep[f"W_{j}"] = list(W.values)
        rep.update(self.extra)
        return rep


def synthesize(system, y0, config=RunConfig(), source=None):
    """Run the whole synthesis for one system and initial state.

    Raises :class:`~switchctl.functional.NotControllableError` when the Kalman
    condition fails.
    """
    kc = kalman_check(system)
    if not kc.controllable:
        raise NotControllableError(f"Kalman rank {kc.rank} < {system.dim}")
    plan = plan_frequencies(system, margin=config.margin)
    grid = TimeGrid(config.T, config.N)
    weights = WeightFamily(plan.omegas)
    obj = Objective(system, grid, weights, y0, variant=config.variant, eps=config.eps,
                    source=source)
    result = minimize(obj, tol=config.tol)
    res = resolve(obj, result.Z_T)
    trace = propagate_adjoint(system, grid, result.Z_T)
    part = classify(trace, weights, config.tie_tol)
    cs = extract_controls(part, trace, weights, control_schedule(obj, res))
    traj = integrate_forward(system, grid, cs, obj.y0, f=obj.source)
    dual = duality_check(system, grid, cs, obj.y0, traj, probes=config.probes,
                         f=obj.source, seed=config.seed, flow=obj.flow)
    ny0 = float(np.linalg.norm(obj.y0))
    fnorm = 0.0
    if obj.source is not None:
        fvals = np.asarray(obj.source(grid.nodes))
        fnorm = float(np.sqrt(np.sum(grid.weights * np.sum(fvals ** 2, axis=-1))))
    bound = config.check_tol * (ny0 + fnorm) + obj.eps
    return RunResult(config, system, obj.y0, plan, grid, obj, result, trace, part, cs, traj,
                     dual, validate_switching(cs), bound, kc.rank, fnorm)
