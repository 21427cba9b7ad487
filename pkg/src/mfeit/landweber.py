"""Projected Landweber iteration, PDE-specific and as a generic engine.

One step projects the incoming iterate, evaluates the misfit gradient at
the projected point, and takes a raw gradient step; the projection of the
new iterate happens at the start of the *next* step, so raw iterates may
transiently leave the admissible set.  The deviation introduced by the
projection is recorded at every step.

The generic engine runs the same loop against an abstract problem
(residual evaluation, adjoint-direction, projection, inner product), which
is how the iteration is validated against a dense linear least-squares
oracle.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .admissible import AdmissibleParams, project_T
from .mesh import l2_norm_sq
from .objective import (
    Dataset,
    directional_derivative,
    forward_states,
    gauss_newton_apply,
    gradient_from_states,
    misfit_from_states,
    random_smooth_pair,
)
from .pde import AdmittivityField, SolverError

logger = logging.getLogger(__name__)

#: Length of the relative-decrease plateau window of the stopping rule.
PLATEAU_WINDOW = 10


@dataclass
class LandweberConfig:
    """Iteration controls.

    ``mu=None`` requests the automatic step size (power-iteration estimate
    of the squared derivative norm at the start iterate, with a 0.9 safety
    factor).  ``stop_tol`` bounds the relative misfit decrease over a
    10-iteration window below which the run stops; zero disables that rule
    and the loop runs the full ``max_iters``.  ``discrepancy_floor``
    optionally enables an early stop when the misfit falls below
    ``discrepancy_tau`` times that floor.
    """

    admissible: AdmissibleParams = field(default_factory=AdmissibleParams)
    mu: float | None = None
    max_iters: int = 200
    stop_tol: float = 1e-10
    log_every: int = 10
    discrepancy_floor: float | None = None
    discrepancy_tau: float = 1.1

    def __post_init__(self):
        if self.mu is not None and self.mu <= 0.0:
            raise ValueError("step size mu must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.stop_tol < 0.0:
            raise ValueError("stop_tol must be nonnegative")


@dataclass
class IterationRecord:
    n: int
    J: float
    grad_norm: float
    err_to_truth: float
    proj_dev: float


def pair_distance(a: AdmittivityField, b: AdmittivityField) -> float:
    """L2 distance between two admittivity fields over both components."""
    grid = a.grid
    return math.sqrt(l2_norm_sq(grid, a.sigma - b.sigma) + l2_norm_sq(grid, a.eps - b.eps))


def estimate_step_size(
    x0: AdmittivityField,
    data: Dataset,
    params: AdmissibleParams,
    iters: int = 8,
    seed: int = 0,
    safety: float = 0.9,
) -> float:
    """Step size from a power-iteration estimate of the squared derivative norm.

    Iterates the frequency-summed normal operator on a random interior
    direction and returns ``safety / L`` for the Rayleigh quotient L at the
    last iterate.
    """
    a = project_T(x0, params)
    grid = a.grid
    states = forward_states(a, data)
    rng = np.random.default_rng(seed)
    h, k = random_smooth_pair(grid, rng)
    nrm = math.sqrt(l2_norm_sq(grid, h) + l2_norm_sq(grid, k))
    h, k = h / nrm, k / nrm
    lam = 0.0
    for _ in range(iters):
        nd = gauss_newton_apply(grid, states, h, k)
        lam = directional_derivative(grid, nd, h, k)
        nrm = math.sqrt(l2_norm_sq(grid, nd.g_sigma) + l2_norm_sq(grid, nd.g_eps))
        if nrm == 0.0:
            break
        h, k = nd.g_sigma / nrm, nd.g_eps / nrm
    if lam <= 0.0:
        raise SolverError("power iteration failed to produce a positive norm estimate")
    return safety / lam


def step(
    x: AdmittivityField,
    data: Dataset,
    cfg: LandweberConfig,
    truth: AdmittivityField | None = None,
) -> tuple[AdmittivityField, IterationRecord]:
    """One projected Landweber step from the raw iterate ``x``.

    Returns the raw next iterate (projection happens at the start of the
    following step) plus the diagnostics record.  Solver failures propagate
    and leave ``x`` untouched.
    """
    if cfg.mu is None:
        raise ValueError("step requires a resolved step size; use run() or set cfg.mu")
    grid = x.grid
    a = project_T(x, cfg.admissible)
    proj_dev = pair_distance(a, x)
    states = forward_states(a, data)
    j_val = misfit_from_states(grid, states)
    g = gradient_from_states(grid, states)
    x_next = AdmittivityField(grid, a.sigma - cfg.mu * g.g_sigma, a.eps - cfg.mu * g.g_eps)
    err = pair_distance(x_next, truth) if truth is not None else float("nan")
    rec = IterationRecord(n=0, J=j_val, grad_norm=g.norm(grid), err_to_truth=err, proj_dev=proj_dev)
    return x_next, rec


def _plateau_reached(j_values: list[float], stop_tol: float) -> bool:
    if stop_tol <= 0.0 or len(j_values) <= PLATEAU_WINDOW:
        return False
    j_old = j_values[-1 - PLATEAU_WINDOW]
    j_new = j_values[-1]
    if j_old <= 0.0:
        return True
    return (j_old - j_new) < stop_tol * j_old


def run(
    x0: AdmittivityField,
    data: Dataset,
    cfg: LandweberConfig,
    truth: AdmittivityField | None = None,
) -> tuple[AdmittivityField, list[IterationRecord]]:
    """Iterate until ``max_iters`` or a misfit plateau over a 10-step window.

    Returns the projection of the final iterate together with the full
    trajectory.  On solver failure the partial trajectory is attached to
    the raised error.
    """
    if cfg.mu is None:
        mu = estimate_step_size(x0, data, cfg.admissible)
        logger.info("auto step size mu=%.4e", mu)
        cfg = dataclasses.replace(cfg, mu=mu)
    records: list[IterationRecord] = []
    j_values: list[float] = []
    x = x0
    try:
        for it in range(1, cfg.max_iters + 1):
            x, rec = step(x, data, cfg, truth=truth)
            rec.n = it
            records.append(rec)
            j_values.append(rec.J)
            if cfg.log_every and it % cfg.log_every == 0:
                logger.info(
                    "iter %4d  J=%.6e  |g|=%.3e  proj_dev=%.3e", it, rec.J, rec.grad_norm, rec.proj_dev
                )
            if cfg.discrepancy_floor is not None and rec.J <= cfg.discrepancy_tau * cfg.discrepancy_floor:
                logger.info("discrepancy stop at iteration %d", it)
                break
            if _plateau_reached(j_values, cfg.stop_tol):
                logger.info("misfit plateau stop at iteration %d", it)
                break
    except SolverError as exc:
        exc.trajectory = records
        raise
    return project_T(x, cfg.admissible), records


def find_mu_safe(
    x0: AdmittivityField,
    data: Dataset,
    cfg: LandweberConfig,
    mu_start: float,
    n_check: int = 5,
    max_doublings: int = 12,
) -> float:
    """Largest tested step size whose first ``n_check`` misfit values are non-increasing.

    Doubles from ``mu_start`` until a violation appears and returns the last
    safe value.
    """
    mu = mu_start
    safe = None
    for _ in range(max_doublings):
        trial = LandweberConfig(
            admissible=cfg.admissible, mu=mu, max_iters=n_check, stop_tol=0.0, log_every=0
        )
        _, recs = run(x0, data, trial)
        js = [r.J for r in recs]
        if all(b <= a * (1.0 + 1e-12) for a, b in zip(js, js[1:])):
            safe = mu
            mu *= 2.0
        else:
            break
    if safe is None:
        raise SolverError(f"no monotone step size found at or above {mu_start:.3e}")
    return safe


# --- generic engine -------------------------------------------------------


def _default_inner(a, b) -> float:
    return float(np.real(np.vdot(np.asarray(b), np.asarray(a))))


@dataclass
class GenericProblem:
    """Abstract residual problem driven by the same projected iteration.

    ``residuals(x)`` returns one residual per quadrature node,
    ``adjoint_step(x, residuals)`` the weighted adjoint-direction sum
    (already including quadrature weights), ``project`` the feasibility
    map, and the inner products define the norms used in the diagnostics.
    ``derivative(x, h)``, when provided, enables adjoint-consistency
    probing.
    """

    residuals: Callable[[Any], list[Any]]
    adjoint_step: Callable[[Any, list[Any]], Any]
    weights: np.ndarray
    project: Callable[[Any], Any] = lambda x: x
    inner_x: Callable[[Any, Any], float] = _default_inner
    inner_y: Callable[[Any, Any], float] = _default_inner
    derivative: Callable[[Any, Any], list[Any]] | None = None

    def misfit(self, x) -> float:
        res = self.residuals(x)
        return 0.5 * sum(float(w) * self.inner_y(r, r) for w, r in zip(self.weights, res))


def adjoint_mismatch(p: GenericProblem, x, h, ys: list[Any]) -> float:
    """|sum_w <DF(h), y>_Y - <h, adjoint_step(ys)>_X| for consistency probes."""
    if p.derivative is None:
        raise ValueError("problem does not expose a derivative")
    lhs = sum(float(w) * p.inner_y(d, y) for w, d, y in zip(p.weights, p.derivative(x, h), ys))
    rhs = p.inner_x(h, p.adjoint_step(x, ys))
    return abs(lhs - rhs)


def generic_run(
    p: GenericProblem,
    x0,
    cfg: LandweberConfig,
    truth=None,
) -> tuple[Any, list[IterationRecord]]:
    """Projected Landweber loop against the abstract interface."""
    if cfg.mu is None:
        raise ValueError("generic_run requires an explicit step size")
    records: list[IterationRecord] = []
    j_values: list[float] = []
    x = x0
    for it in range(1, cfg.max_iters + 1):
        xp = p.project(x)
        dev = xp - x
        proj_dev = math.sqrt(p.inner_x(dev, dev))
        res = p.residuals(xp)
        j_val = 0.5 * sum(float(w) * p.inner_y(r, r) for w, r in zip(p.weights, res))
        direction = p.adjoint_step(xp, res)
        x = xp - cfg.mu * direction
        err = float("nan")
        if truth is not None:
            diff = x - truth
            err = math.sqrt(p.inner_x(diff, diff))
        records.append(
            IterationRecord(
                n=it,
                J=j_val,
                grad_norm=math.sqrt(p.inner_x(direction, direction)),
                err_to_truth=err,
                proj_dev=proj_dev,
            )
        )
        j_values.append(j_val)
        if _plateau_reached(j_values, cfg.stop_tol):
            break
    return p.project(x), records
