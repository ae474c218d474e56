"""Canonical Hamiltonian test problems and their conserved quantities.

States are flat arrays y = (q, p) of length 2m with the canonical structure
matrix J = [[0, I_m], [-I_m, 0]].  All callables are vectorized over leading
axes: they accept shape (..., 2m) and return values with matching batch shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "HamiltonianProblem",
    "InvariantSet",
    "apply_structure",
    "kepler_problem",
    "kepler_invariants",
    "polynomial_oscillator",
]


def apply_structure(grad: np.ndarray, m: int) -> np.ndarray:
    """Apply J = [[0, I_m], [-I_m, 0]] to (batches of) gradients."""
    out = np.empty_like(grad)
    out[..., :m] = grad[..., m:]
    out[..., m:] = -grad[..., :m]
    return out


@dataclass(frozen=True)
class HamiltonianProblem:
    """Autonomous canonical system y' = J grad H(y)."""

    name: str
    m: int
    hamiltonian: Callable[[np.ndarray], np.ndarray]
    grad_h: Callable[[np.ndarray], np.ndarray]
    initial_state: np.ndarray

    @property
    def dim(self) -> int:
        return 2 * self.m

    def vector_field(self, y: np.ndarray) -> np.ndarray:
        return apply_structure(self.grad_h(y), self.m)


@dataclass(frozen=True)
class InvariantSet:
    """nu further conserved quantities; values shape (..., nu), gradients (..., 2m, nu)."""

    nu: int
    values: Callable[[np.ndarray], np.ndarray]
    gradients: Callable[[np.ndarray], np.ndarray]


def _kepler_h(y: np.ndarray) -> np.ndarray:
    q, p = y[..., :2], y[..., 2:]
    return 0.5 * np.sum(p * p, axis=-1) - 1.0 / np.sqrt(np.sum(q * q, axis=-1))


def _kepler_grad_h(y: np.ndarray) -> np.ndarray:
    q, p = y[..., :2], y[..., 2:]
    r3 = np.sum(q * q, axis=-1, keepdims=True) ** 1.5
    return np.concatenate([q / r3, p], axis=-1)


def kepler_problem(eccentricity: float) -> HamiltonianProblem:
    """Planar two-body problem H = |p|^2 / 2 - 1 / |q| started at perihelion.

    The initial state (1 - e, 0, 0, sqrt((1+e)/(1-e))) gives an ellipse of
    eccentricity e with period 2 pi and angular momentum sqrt(1 - e^2).
    """
    if not 0.0 <= eccentricity < 1.0:
        raise ValueError(f"eccentricity must lie in [0, 1), got {eccentricity}")
    e = float(eccentricity)
    y0 = np.array([1.0 - e, 0.0, 0.0, np.sqrt((1.0 + e) / (1.0 - e))])
    y0.flags.writeable = False
    return HamiltonianProblem(
        name="kepler",
        m=2,
        hamiltonian=_kepler_h,
        grad_h=_kepler_grad_h,
        initial_state=y0,
    )


def _angular_momentum(y: np.ndarray) -> np.ndarray:
    q1, q2, p1, p2 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    return q1 * p2 - q2 * p1


def _grad_angular_momentum(y: np.ndarray) -> np.ndarray:
    q1, q2, p1, p2 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    return np.stack([p2, -p1, -q2, q1], axis=-1)


def _lrl_scalar(y: np.ndarray) -> np.ndarray:
    # second component of the Laplace-Runge-Lenz vector, sign chosen so the
    # attractive potential conserves it
    q1, q2, p1 = y[..., 0], y[..., 1], y[..., 2]
    r = np.sqrt(q1 * q1 + q2 * q2)
    return p1 * _angular_momentum(y) + q2 / r


def _grad_lrl_scalar(y: np.ndarray) -> np.ndarray:
    q1, q2, p1, p2 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    r3 = (q1 * q1 + q2 * q2) ** 1.5
    ell = q1 * p2 - q2 * p1
    return np.stack(
        [
            p1 * p2 - q1 * q2 / r3,
            -p1 * p1 + q1 * q1 / r3,
            ell - p1 * q2,
            p1 * q1,
        ],
        axis=-1,
    )


def kepler_invariants(which: str) -> InvariantSet:
    """Conserved quantities of the Kepler flow beyond the Hamiltonian.

    which = "angular_momentum_only" gives nu = 1 (the angular momentum);
    which = "angular_momentum_and_lrl" adds the Laplace-Runge-Lenz scalar.
    """
    if which == "angular_momentum_only":
        return InvariantSet(
            nu=1,
            values=lambda y: _angular_momentum(y)[..., None],
            gradients=lambda y: _grad_angular_momentum(y)[..., None],
        )
    if which == "angular_momentum_and_lrl":
        return InvariantSet(
            nu=2,
            values=lambda y: np.stack([_angular_momentum(y), _lrl_scalar(y)], axis=-1),
            gradients=lambda y: np.stack(
                [_grad_angular_momentum(y), _grad_lrl_scalar(y)], axis=-1
            ),
        )
    raise ValueError(
        "which must be 'angular_momentum_only' or 'angular_momentum_and_lrl', "
        f"got {which!r}"
    )


def polynomial_oscillator(degree: int) -> HamiltonianProblem:
    """One-degree-of-freedom oscillator H = p^2 / 2 + q^degree / degree, started at (1, 0)."""
    if degree not in (2, 4, 6, 8):
        raise ValueError(f"degree must be one of 2, 4, 6, 8, got {degree}")
    d = int(degree)

    def ham(y: np.ndarray) -> np.ndarray:
        q, p = y[..., 0], y[..., 1]
        return 0.5 * p * p + q**d / d

    def grad(y: np.ndarray) -> np.ndarray:
        q, p = y[..., 0], y[..., 1]
        return np.stack([q ** (d - 1), p], axis=-1)

    y0 = np.array([1.0, 0.0])
    y0.flags.writeable = False
    return HamiltonianProblem(
        name=f"oscillator{d}",
        m=1,
        hamiltonian=ham,
        grad_h=grad,
        initial_state=y0,
    )
