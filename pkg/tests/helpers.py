"""Shared oracles and builders for the test suite."""

from __future__ import annotations

import numpy as np

from mfeit import PhantomSpec, Inclusion
from mfeit.landweber import GenericProblem
from mfeit.mesh import Grid
from mfeit.objective import bump_profile
from mfeit.pde import AdmittivityField


TWO_BUMPS = PhantomSpec(
    inclusions=[
        Inclusion(0.45, 0.5, 0.15, 0.8, -0.3),
        Inclusion(0.65, 0.6, 0.12, -0.4, 0.6),
    ]
)

ONE_BUMP = PhantomSpec(inclusions=[Inclusion(0.5, 0.5, 0.15, 0.5, 0.3)])


def rel_interior_err(a: AdmittivityField, truth: AdmittivityField) -> float:
    """Relative L2 error of (sigma, eps) over the interior region."""
    m = a.grid.interior_mask
    num = np.sqrt(
        np.sum((a.sigma - truth.sigma)[m] ** 2) + np.sum((a.eps - truth.eps)[m] ** 2)
    )
    den = np.sqrt(np.sum(truth.sigma[m] ** 2) + np.sum(truth.eps[m] ** 2))
    return float(num / den)


def wide_smooth_field(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    """Random field from wide bumps kept clear of the cutoff transition band."""
    f = np.zeros(grid.shape)
    for _ in range(3):
        radius = rng.uniform(0.14, 0.20)
        lo = grid.c0 + radius + 0.08
        cx, cy = rng.uniform(lo, 1.0 - lo), rng.uniform(lo, 1.0 - lo)
        amp = rng.uniform(0.3, 1.0) * rng.choice([-1.0, 1.0])
        f += amp * bump_profile(((grid.X - cx) ** 2 + (grid.Y - cy) ** 2) / radius**2)
    return f


def linear_oracle(seed: int = 321, n_mats: int = 3, dim: int = 5):
    """Dense linear least-squares instance with its normal-equation solution.

    Returns (problem, x_star, mu) with mu = 0.9 / sum of squared spectral
    norms; the system is consistent (b = A x_true), so x_star equals the
    generating point up to round-off.
    """
    rng = np.random.default_rng(seed)
    mats = [rng.standard_normal((dim, dim)) for _ in range(n_mats)]
    x_true = rng.standard_normal(dim)
    bs = [a @ x_true for a in mats]
    weights = np.ones(n_mats)

    problem = GenericProblem(
        residuals=lambda x: [a @ x - b for a, b in zip(mats, bs)],
        adjoint_step=lambda x, res: sum(
            w * (a.T @ r) for w, a, r in zip(weights, mats, res)
        ),
        weights=weights,
        derivative=lambda x, h: [a @ h for a in mats],
    )
    normal = sum(w * a.T @ a for w, a in zip(weights, mats))
    rhs = sum(w * a.T @ b for w, a, b in zip(weights, mats, bs))
    x_star = np.linalg.solve(normal, rhs)
    mu = 0.9 / sum(np.linalg.norm(a, 2) ** 2 for a in mats)
    return problem, x_star, mu
