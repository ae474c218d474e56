"""Fixed-point steppers for the energy- and invariant-conserving methods.

One step advances the stage polynomial

    u(c h) = y0 + h sum_{j<s} (int_0^c P_j) eta_j gamma_j,   c in [0, 1],

where the s coefficients gamma_j are discrete line-integral averages of the
vector field at k Gauss nodes and eta rescales the last nu directions so the
extra invariants are conserved as well.  The plain method keeps eta = 1
(energy only); the corrected method recomputes eta each sweep from a small
nu x nu linear system built at r Gauss nodes.  The update is y1 = y0 + h
gamma_0 in both cases.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .polybasis import gauss_rule, integral_table, legendre_table
from .problems import HamiltonianProblem, InvariantSet

__all__ = [
    "ConfigError",
    "NonConvergence",
    "MethodConfig",
    "StepWorkspace",
    "Trajectory",
    "stage_polynomial",
    "hbvm_step",
    "elim_step",
    "integrate",
]


_EPS = float(np.finfo(float).eps)


class ConfigError(ValueError):
    """Raised for invalid method parameters before any stepping happens."""


class NonConvergence(RuntimeError):
    """Fixed-point iteration exceeded fp_max_iters without meeting the tolerance."""

    def __init__(self, message, residual=np.nan, iterations=0, step_index=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.step_index = step_index


@dataclass(frozen=True)
class MethodConfig:
    """Parameters of a method run.

    s is the polynomial degree count (order 2s), k the number of Gauss nodes
    for the Hamiltonian quadrature, r the number for the invariant quadrature
    (ignored without invariants; defaults to k).  warm_start seeds each step's
    iteration with the previous step's coefficients.
    """

    s: int
    k: int
    r: Optional[int] = None
    fp_tolerance: float = 1e-14
    fp_max_iters: int = 200
    warm_start: bool = False
    gamma_fallback_threshold: float = 1e8

    def resolved_r(self) -> int:
        return self.k if self.r is None else self.r

    def validate(self, nu: int = 0) -> None:
        if self.s < 1:
            raise ConfigError(f"need s >= 1, got s={self.s}")
        if self.k < self.s:
            raise ConfigError(f"need k >= s, got k={self.k}, s={self.s}")
        if nu > 0:
            if self.resolved_r() < self.s:
                raise ConfigError(
                    f"need r >= s, got r={self.resolved_r()}, s={self.s}"
                )
            if self.s <= nu:
                raise ConfigError(
                    f"conserving nu={nu} invariants needs s > nu, got s={self.s}"
                )
        if not self.fp_tolerance > 0.0:
            raise ConfigError(f"fp_tolerance must be positive, got {self.fp_tolerance}")
        if self.fp_max_iters < 1:
            raise ConfigError(f"fp_max_iters must be >= 1, got {self.fp_max_iters}")
        if not self.gamma_fallback_threshold > 0.0:
            raise ConfigError(
                f"gamma_fallback_threshold must be positive, "
                f"got {self.gamma_fallback_threshold}"
            )


@dataclass
class StepWorkspace:
    """Converged per-step internals, mainly for diagnostics and tests."""

    gamma: np.ndarray
    eta: np.ndarray
    phi: Optional[np.ndarray]
    alpha: np.ndarray
    Gamma: np.ndarray
    rhs: np.ndarray
    iterations: int
    gamma_fallback_used: bool
    fallback_sweeps: int = 0


@dataclass
class Trajectory:
    """Equispaced solution samples plus per-step iteration bookkeeping.

    h_error and invariant_error are signed deviations from the initial values
    (shape (n+1,) and (n+1, nu)); alpha and fallback are per step (n, nu) and
    (n,).  With no invariants nu = 0 and those arrays are empty.
    """

    h: float
    times: np.ndarray
    states: np.ndarray
    h_error: np.ndarray
    invariant_error: np.ndarray
    iterations: np.ndarray
    alpha: np.ndarray
    fallback: np.ndarray

    @property
    def iteration_total(self) -> int:
        return int(self.iterations.sum())


# basis operators reused across every step of a run, keyed by (points, s)
_operator_cache: dict = {}
_operator_lock = threading.Lock()


def _basis_operators(points: int, s: int):
    key = (points, s)
    with _operator_lock:
        ops = _operator_cache.get(key)
        if ops is None:
            rule = gauss_rule(points)
            P = legendre_table(s - 1, rule.nodes).T
            I = integral_table(s - 1, rule.nodes).T
            PTB = P.T * rule.weights
            for arr in (P, I, PTB):
                arr.flags.writeable = False
            ops = (I, PTB)
            _operator_cache[key] = ops
    return ops


def stage_polynomial(
    y0: np.ndarray, h: float, gamma: np.ndarray, eta: np.ndarray, c
) -> np.ndarray:
    """Evaluate the stage polynomial at normalized abscissa(e) c in [0, 1]."""
    y0 = np.asarray(y0, dtype=float)
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    eta = np.asarray(eta, dtype=float)
    s = gamma.shape[0]
    if eta.shape != (s,):
        raise ValueError(f"eta must have shape ({s},), got {eta.shape}")
    c_arr = np.asarray(c, dtype=float)
    weights = integral_table(s - 1, c_arr) * eta.reshape((s,) + (1,) * c_arr.ndim)
    out = y0 + h * np.tensordot(weights, gamma, axes=(0, 0))
    if c_arr.ndim == 0:
        if c_arr == 0.0:
            return y0.copy()
        return out
    out[c_arr == 0.0] = y0
    return out


def _solve_scaling(Gamma, rhs, w, threshold, alpha_old, rhs_noise):
    """Solve Gamma alpha = rhs; fall back to alpha = 0 on a degenerate system.

    Besides singularity and the conditioning bound, a solution with
    |h^(2(s-1-j)) alpha_j| > 1 is rejected: it would push an eta entry
    through zero and only arises from the transient near-zero gamma tail
    of a cold-started iteration.

    A refresh that moves alpha by less than norm(inv(Gamma)) * rhs_noise is
    discarded in favor of alpha_old: rhs is then resolved only to round-off,
    and following the noise through a tiny Gamma would keep the stage values
    dancing below the convergence threshold forever.
    """
    nu = rhs.shape[0]
    zeros = np.zeros(nu)
    if not (np.all(np.isfinite(Gamma)) and np.all(np.isfinite(rhs))):
        return zeros, True
    try:
        inv = np.linalg.inv(Gamma)
    except np.linalg.LinAlgError:
        return zeros, True
    cond = np.linalg.norm(Gamma, 1) * np.linalg.norm(inv, 1)
    if not np.isfinite(cond) or cond > threshold:
        return zeros, True
    alpha = inv @ rhs
    if not np.all(np.isfinite(alpha)) or np.max(np.abs(w * alpha)) > 1.0:
        return zeros, True
    alpha_floor = np.linalg.norm(inv, np.inf) * rhs_noise
    if np.max(np.abs(alpha - alpha_old)) <= alpha_floor:
        return alpha_old, False
    return alpha, False


def _run_step(problem, invariants, config, y0, h, gamma0=None, alpha0=None):
    s, k = config.s, config.k
    nu = invariants.nu if invariants is not None else 0
    d = problem.dim
    tol = config.fp_tolerance

    I_k, PTB_k = _basis_operators(k, s)
    if nu:
        r = config.resolved_r()
        I_r, PTB_r = _basis_operators(r, s)
        # even powers h^(2(s-1-j)) for the corrected tail j = s-nu .. s-1
        w = (float(h) * float(h)) ** np.arange(nu - 1, -1, -1)
    else:
        w = np.zeros(0)

    G = np.zeros((s, d)) if gamma0 is None else np.array(gamma0, dtype=float)
    alpha = np.zeros(nu) if alpha0 is None else np.array(alpha0, dtype=float)
    eta = np.ones(s)
    if nu:
        eta[s - nu :] = 1.0 - w * alpha
    Phi = np.zeros((s, d, nu)) if nu else None
    Gamma = np.zeros((nu, nu))
    rhs = np.zeros(nu)
    fallback = False
    fallback_sweeps = 0
    iterations = 0
    residual = np.inf

    # Convergence is measured on the stage values rather than on gamma or
    # alpha directly: the eta rescaling amplifies round-off in alpha by
    # norm(inv(Gamma)), so a raw alpha difference never settles to the
    # tolerance, while the stage values see every unknown at the scale that
    # actually enters the update y1 = y0 + h gamma_0.
    U = y0 + h * ((I_k * eta) @ G)
    U_r = y0 + h * ((I_r * eta) @ G) if nu else None

    for _ in range(config.fp_max_iters):
        G_new = PTB_k @ problem.vector_field(U)
        if nu:
            Phi_new = np.tensordot(PTB_r, invariants.gradients(U_r), axes=(1, 0))
            prods = np.einsum("jdv,jd->jv", Phi_new, G_new)
            rhs = prods.sum(axis=0)
            Gamma = (w[:, None] * prods[s - nu :]).T
            # round-off scale of the rhs assembly (4 s d terms, inf over invariants)
            rhs_noise = (
                4.0 * s * d * _EPS
                * float(np.max(np.einsum("jdv,jd->v", np.abs(Phi_new), np.abs(G_new))))
            )
            alpha_new, fallback = _solve_scaling(
                Gamma, rhs, w, config.gamma_fallback_threshold, alpha, rhs_noise
            )
            fallback_sweeps += int(fallback)
            eta_new = np.ones(s)
            eta_new[s - nu :] = 1.0 - w * alpha_new
        else:
            Phi_new, alpha_new, eta_new = Phi, alpha, eta

        iterations += 1
        U_next = y0 + h * ((I_k * eta_new) @ G_new)
        residual = float(np.max(np.abs(U_next - U)))
        scale = 1.0 + float(np.max(np.abs(U_next)))
        if nu:
            U_r_next = y0 + h * ((I_r * eta_new) @ G_new)
            residual = max(residual, float(np.max(np.abs(U_r_next - U_r))))
            scale = max(scale, 1.0 + float(np.max(np.abs(U_r_next))))
            U_r = U_r_next
        G, Phi, alpha, eta, U = G_new, Phi_new, alpha_new, eta_new, U_next
        if residual <= tol * scale:
            break
    else:
        raise NonConvergence(
            f"no fixed point after {config.fp_max_iters} sweeps "
            f"(residual {residual:.3e}, h={h!r})",
            residual=residual,
            iterations=iterations,
        )

    y1 = y0 + h * G[0]
    workspace = StepWorkspace(
        gamma=G,
        eta=eta,
        phi=Phi,
        alpha=alpha,
        Gamma=Gamma,
        rhs=rhs,
        iterations=iterations,
        gamma_fallback_used=bool(fallback),
        fallback_sweeps=int(fallback_sweeps),
    )
    return y1, workspace


def _check_state(problem, y0):
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (problem.dim,):
        raise ConfigError(
            f"state must have shape ({problem.dim},), got {y0.shape}"
        )
    return y0


def hbvm_step(
    problem: HamiltonianProblem,
    config: MethodConfig,
    y0: np.ndarray,
    h: float,
    gamma0: Optional[np.ndarray] = None,
):
    """One energy-conserving step; returns (y1, workspace)."""
    config.validate(nu=0)
    if h == 0.0:
        raise ConfigError("step size must be nonzero")
    y0 = _check_state(problem, y0)
    return _run_step(problem, None, config, y0, float(h), gamma0=gamma0)


def elim_step(
    problem: HamiltonianProblem,
    invariants: InvariantSet,
    config: MethodConfig,
    y0: np.ndarray,
    h: float,
    gamma0: Optional[np.ndarray] = None,
    alpha0: Optional[np.ndarray] = None,
):
    """One step conserving the Hamiltonian and the given invariants; returns (y1, workspace)."""
    if invariants is None or invariants.nu < 1:
        raise ConfigError("elim_step needs an InvariantSet with nu >= 1")
    config.validate(nu=invariants.nu)
    if h == 0.0:
        raise ConfigError("step size must be nonzero")
    y0 = _check_state(problem, y0)
    return _run_step(
        problem, invariants, config, y0, float(h), gamma0=gamma0, alpha0=alpha0
    )


def integrate(
    problem: HamiltonianProblem,
    invariants: Optional[InvariantSet],
    config: MethodConfig,
    h: float,
    n_steps: int,
) -> Trajectory:
    """March n_steps steps of size h from the problem's initial state."""
    nu = invariants.nu if invariants is not None else 0
    config.validate(nu=nu)
    if h == 0.0:
        raise ConfigError("step size must be nonzero")
    if n_steps < 1:
        raise ConfigError(f"n_steps must be >= 1, got {n_steps}")

    y = problem.initial_state.copy()
    states = np.empty((n_steps + 1, problem.dim))
    states[0] = y
    iterations = np.zeros(n_steps, dtype=int)
    alphas = np.zeros((n_steps, nu))
    fallbacks = np.zeros(n_steps, dtype=bool)
    gamma0 = None
    alpha0 = None

    for i in range(n_steps):
        try:
            y, ws = _run_step(
                problem, invariants, config, y, float(h), gamma0=gamma0, alpha0=alpha0
            )
        except NonConvergence as exc:
            raise NonConvergence(
                f"step {i + 1} of {n_steps}: {exc}",
                residual=exc.residual,
                iterations=exc.iterations,
                step_index=i + 1,
            ) from exc
        states[i + 1] = y
        iterations[i] = ws.iterations
        if nu:
            alphas[i] = ws.alpha
        fallbacks[i] = ws.gamma_fallback_used
        if config.warm_start:
            gamma0, alpha0 = ws.gamma, ws.alpha

    times = h * np.arange(n_steps + 1)
    h_vals = problem.hamiltonian(states)
    h_error = h_vals - h_vals[0]
    if nu:
        inv_vals = invariants.values(states)
        invariant_error = inv_vals - inv_vals[0]
    else:
        invariant_error = np.zeros((n_steps + 1, 0))
    return Trajectory(
        h=float(h),
        times=times,
        states=states,
        h_error=h_error,
        invariant_error=invariant_error,
        iterations=iterations,
        alpha=alphas,
        fallback=fallbacks,
    )
