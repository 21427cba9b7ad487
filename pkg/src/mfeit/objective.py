"""Discrepancy functional, linearized forward map, and adjoint-state gradient.

The misfit is a frequency quadrature of squared discrete H1 residual norms.
Both derivative routes implemented here are *exact* derivatives of that
discrete functional:

* ``dF`` applies the assembly stencil of the coefficient perturbation to
  the forward state and solves with the unperturbed operator, which is the
  algebraic linearization of the discrete forward map.
* ``gradient_DJ`` solves the adjoint problem (same factorization, since the
  operator is complex-symmetric) and accumulates the gradient density from
  face-gradient products of state and adjoint, which is the algebraic
  transpose of the same linearization.

Consequently the H1 pairing of ``dF`` against the residual and the nodal
pairing of a direction against ``gradient_DJ`` agree to solver precision,
and both match finite differences of the misfit up to Taylor truncation.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .mesh import Grid, l2_norm_sq, h1_norm_sq, h1_inner
from .pde import (
    AdmittivityField,
    BoundaryData,
    EllipticOperator,
    PotentialPair,
    apply_div_coeff_grad,
    assemble,
    solve_adjoint_op,
    solve_dirichlet,
    solve_forward_op,
)

#: Environment variable selecting the thread count of per-frequency loops.
THREADS_ENV = "MFEIT_THREADS"


def map_frequencies(fn, items):
    """Apply ``fn`` over frequency items, optionally threaded.

    Results are collected in input order, so reductions downstream run in a
    fixed deterministic order regardless of the thread count.
    """
    try:
        nthreads = int(os.environ.get(THREADS_ENV, "1"))
    except ValueError:
        nthreads = 1
    items = list(items)
    if nthreads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        return list(pool.map(fn, items))


@dataclass
class FrequencyGrid:
    """Quadrature nodes and weights on the frequency interval.

    Weights are positive and sum to ``omega_hi - omega_lo``; the default
    constructor ``uniform`` uses the trapezoid rule (a single node gets the
    full interval length as its weight).
    """

    omega_lo: float
    omega_hi: float
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if not self.omega_lo < self.omega_hi:
            raise ValueError("frequency interval must satisfy omega_lo < omega_hi")
        if self.nodes.ndim != 1 or self.nodes.size == 0:
            raise ValueError("frequency grid needs at least one node")
        if np.any(np.diff(self.nodes) <= 0.0):
            raise ValueError("frequency nodes must be strictly increasing")
        if self.nodes[0] < self.omega_lo - 1e-12 or self.nodes[-1] > self.omega_hi + 1e-12:
            raise ValueError("frequency nodes must lie inside the interval")
        if np.any(self.weights <= 0.0):
            raise ValueError("quadrature weights must be positive")
        length = self.omega_hi - self.omega_lo
        if abs(float(self.weights.sum()) - length) > 1e-10 * max(length, 1.0):
            raise ValueError("quadrature weights must sum to the interval length")

    @classmethod
    def uniform(cls, omega_lo: float, omega_hi: float, count: int) -> "FrequencyGrid":
        if count < 1:
            raise ValueError("need at least one frequency node")
        length = omega_hi - omega_lo
        if count == 1:
            nodes = np.array([0.5 * (omega_lo + omega_hi)])
            weights = np.array([length])
        else:
            nodes = np.linspace(omega_lo, omega_hi, count)
            weights = np.full(count, length / (count - 1))
            weights[0] *= 0.5
            weights[-1] *= 0.5
        return cls(omega_lo, omega_hi, nodes, weights)

    @property
    def omega_mid(self) -> float:
        return 0.5 * (self.omega_lo + self.omega_hi)

    def index_of(self, omega: float) -> int:
        hits = np.flatnonzero(np.isclose(self.nodes, omega, rtol=1e-12, atol=1e-12))
        if hits.size == 0:
            raise KeyError(f"frequency {omega} is not a quadrature node")
        return int(hits[0])


@dataclass
class Dataset:
    """Measured internal potentials, one pair per frequency node.

    The stored potentials equal the driving boundary traces exactly on the
    boundary ring, so the traces are recovered from the data itself.
    """

    grid: Grid
    freqs: FrequencyGrid
    potentials: list[PotentialPair]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.potentials) != self.freqs.nodes.size:
            raise ValueError("need exactly one potential pair per frequency node")

    def boundary_data(self, k: int = 0) -> BoundaryData:
        u = self.potentials[k]
        return BoundaryData(self.grid.trace(u.u1), self.grid.trace(u.u2))


@dataclass
class GradientPair:
    """Nodal gradient densities for (sigma, eps), supported in the interior region."""

    g_sigma: np.ndarray
    g_eps: np.ndarray

    def norm(self, grid: Grid) -> float:
        return float(np.sqrt(l2_norm_sq(grid, self.g_sigma) + l2_norm_sq(grid, self.g_eps)))


def residual_F(a: AdmittivityField, omega: float, data: Dataset) -> PotentialPair:
    """Forward solve at one frequency minus the stored measurement."""
    k = data.freqs.index_of(omega)
    u = solve_forward_op(assemble(a, omega), data.boundary_data(k))
    meas = data.potentials[k]
    return PotentialPair(u.u1 - meas.u1, u.u2 - meas.u2)


def residual_norm_sq(grid: Grid, f_res: PotentialPair) -> float:
    """Squared discrete H1 norm of a residual pair, both components."""
    return h1_norm_sq(grid, f_res.u1) + h1_norm_sq(grid, f_res.u2)


@dataclass
class ForwardState:
    """Per-frequency operator, state, and residual reused across gradient pieces."""

    omega: float
    weight: float
    op: EllipticOperator
    u: PotentialPair
    f_res: PotentialPair


def forward_states(a: AdmittivityField, data: Dataset) -> list[ForwardState]:
    """Assemble, factorize, and solve once per frequency node."""

    def one(k: int) -> ForwardState:
        omega = float(data.freqs.nodes[k])
        op = assemble(a, omega)
        u = solve_forward_op(op, data.boundary_data(k))
        meas = data.potentials[k]
        f_res = PotentialPair(u.u1 - meas.u1, u.u2 - meas.u2)
        return ForwardState(omega, float(data.freqs.weights[k]), op, u, f_res)

    return map_frequencies(one, range(data.freqs.nodes.size))


def misfit_from_states(grid: Grid, states: list[ForwardState]) -> float:
    return 0.5 * sum(s.weight * residual_norm_sq(grid, s.f_res) for s in states)


def misfit_J(a: AdmittivityField, data: Dataset) -> float:
    """Frequency-weighted half sum of squared H1 residual norms."""
    return misfit_from_states(a.grid, forward_states(a, data))


def dF_op(
    op: EllipticOperator, omega: float, h: np.ndarray, k: np.ndarray, u: PotentialPair
) -> PotentialPair:
    """Linearized forward map in direction (h, k), reusing a factorization."""
    grid = op.grid
    delta = h + 1j * omega * k
    zero = np.zeros(len(grid.boundary_index))
    v1 = solve_dirichlet(op, zero, -apply_div_coeff_grad(grid, delta, u.u1))
    v2 = solve_dirichlet(op, zero, -apply_div_coeff_grad(grid, delta, u.u2))
    return PotentialPair(v1, v2)


def dF(
    a: AdmittivityField, omega: float, h: np.ndarray, k: np.ndarray, u: PotentialPair
) -> PotentialPair:
    """Derivative of the forward map at ``a`` in the perturbation direction (h, k)."""
    return dF_op(assemble(a, omega), omega, h, k, u)


def face_density(grid: Grid, u: PotentialPair, p: PotentialPair) -> np.ndarray:
    """Nodal density of face-gradient products, summed over both components.

    Each face contributes the product of the face differences of state and
    adjoint, split evenly between its two endpoint nodes.  This is the
    algebraic transpose of the face-averaged coefficient assembly, i.e. the
    exact discrete counterpart of the gradient contraction of state and
    adjoint gradients.
    """
    h = grid.h
    out = np.zeros(grid.shape, dtype=complex)
    for uc, pc in zip(u.components, p.components):
        sx = ((uc[1:, :] - uc[:-1, :]) / h) * ((pc[1:, :] - pc[:-1, :]) / h)
        sy = ((uc[:, 1:] - uc[:, :-1]) / h) * ((pc[:, 1:] - pc[:, :-1]) / h)
        out[:-1, :] += 0.5 * sx
        out[1:, :] += 0.5 * sx
        out[:, :-1] += 0.5 * sy
        out[:, 1:] += 0.5 * sy
    return out


def gradient_from_states(grid: Grid, states: list[ForwardState]) -> GradientPair:
    def one(s: ForwardState):
        p = solve_adjoint_op(s.op, s.f_res)
        return face_density(grid, s.u, p)

    densities = map_frequencies(one, states)
    g_sigma = np.zeros(grid.shape)
    g_eps = np.zeros(grid.shape)
    for s, dens in zip(states, densities):
        g_sigma += s.weight * dens.real
        g_eps += -s.weight * s.omega * dens.imag
    g_sigma[~grid.interior_mask] = 0.0
    g_eps[~grid.interior_mask] = 0.0
    return GradientPair(g_sigma, g_eps)


def gradient_DJ(a: AdmittivityField, data: Dataset) -> GradientPair:
    """Adjoint-state gradient densities of the misfit at ``a``.

    ``g_sigma`` collects the real part of the state/adjoint gradient
    contraction, ``g_eps`` collects ``-omega`` times its imaginary part
    (the expansion of the complex coefficient perturbation), weighted by
    the frequency quadrature and truncated to the interior region where
    perturbations live.
    """
    return gradient_from_states(a.grid, forward_states(a, data))


def misfit_and_gradient(a: AdmittivityField, data: Dataset) -> tuple[float, GradientPair]:
    """Misfit and gradient sharing one set of factorizations and forward solves."""
    states = forward_states(a, data)
    return misfit_from_states(a.grid, states), gradient_from_states(a.grid, states)


def directional_derivative(
    grid: Grid, g: GradientPair, h: np.ndarray, k: np.ndarray
) -> float:
    """Pairing of gradient densities with a perturbation direction (L2 weights)."""
    return grid.h * grid.h * float(np.sum(h * g.g_sigma) + np.sum(k * g.g_eps))


def pairing_dF_route(
    a: AdmittivityField, data: Dataset, h: np.ndarray, k: np.ndarray
) -> float:
    """Directional derivative via the linearized map: sum_w Re<dF(h,k), F>_H1.

    Independent code path from ``gradient_DJ`` (no adjoint solve); used to
    cross-check the two derivative representations against each other.
    """
    grid = a.grid
    acc = 0.0
    for s in forward_states(a, data):
        v = dF_op(s.op, s.omega, h, k, s.u)
        acc += s.weight * (
            h1_inner(grid, v.u1, s.f_res.u1).real + h1_inner(grid, v.u2, s.f_res.u2).real
        )
    return acc


def gauss_newton_apply(
    grid: Grid, states: list[ForwardState], h: np.ndarray, k: np.ndarray
) -> GradientPair:
    """Apply the frequency-summed normal operator (derivative composed with
    its adjoint) to a direction; used for step-size estimation."""

    def one(s: ForwardState):
        v = dF_op(s.op, s.omega, h, k, s.u)
        p = solve_adjoint_op(s.op, v)
        return face_density(grid, s.u, p)

    densities = map_frequencies(one, states)
    out_h = np.zeros(grid.shape)
    out_k = np.zeros(grid.shape)
    for s, dens in zip(states, densities):
        out_h += s.weight * dens.real
        out_k += -s.weight * s.omega * dens.imag
    out_h[~grid.interior_mask] = 0.0
    out_k[~grid.interior_mask] = 0.0
    return GradientPair(out_h, out_k)


def bump_profile(rho_sq: np.ndarray) -> np.ndarray:
    """Radial profile (1 - rho^2)^2 on rho < 1, zero outside (H2-regular)."""
    return np.where(rho_sq < 1.0, (1.0 - rho_sq) ** 2, 0.0)


def random_smooth_pair(
    grid: Grid, rng: np.random.Generator, n_bumps: int = 3, margin: float = 0.02
) -> tuple[np.ndarray, np.ndarray]:
    """Random smooth direction pair supported strictly inside the interior region.

    Built from a few compactly supported radial bumps with randomized
    centers, radii, and signs.  The geometry depends only on the random
    draw, not on the grid, so the same seed produces the same continuum
    direction across resolutions.
    """
    fields = []
    for _ in range(2):
        f = np.zeros(grid.shape)
        for _ in range(n_bumps):
            radius = rng.uniform(0.08, 0.18)
            lo = grid.c0 + radius + margin
            cx = rng.uniform(lo, 1.0 - lo)
            cy = rng.uniform(lo, 1.0 - lo)
            amp = rng.uniform(0.3, 1.0) * rng.choice([-1.0, 1.0])
            rho_sq = ((grid.X - cx) ** 2 + (grid.Y - cy) ** 2) / radius**2
            f += amp * bump_profile(rho_sq)
        fields.append(f)
    return fields[0], fields[1]
