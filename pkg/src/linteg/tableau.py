"""Butcher tableaux for the line-integral Runge-Kutta family.

A method with k Gauss abscissae and polynomial degree s - 1 has

    A = I diag(eta) P^T Omega,

where P[i, j] = P_j(c_i), I[i, j] = int_0^{c_i} P_j, Omega = diag(b) and
eta rescales the s basis directions (all ones for the plain method).  The
same matrix factors through the square basis matrix of size s + 1 and a
tridiagonal-plus-tail step matrix, which the tests use as a structural
cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polybasis import gauss_rule, integral_table, legendre_table, xi_coefficient

__all__ = [
    "SigmaScaling",
    "TableauMatrices",
    "build_hbvm_tableau",
    "build_elim_tableau",
    "xhat_matrix",
    "tableau_to_json",
]


@dataclass(frozen=True)
class SigmaScaling:
    """Per-direction scaling of the stage polynomial; eta[0] must stay exactly 1."""

    s: int
    eta: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        if eta.shape != (self.s,):
            raise ValueError(f"eta must have shape ({self.s},), got {eta.shape}")
        if eta[0] != 1.0:
            raise ValueError(f"eta[0] must be exactly 1, got {eta[0]!r}")
        object.__setattr__(self, "eta", eta)

    @classmethod
    def identity(cls, s: int) -> "SigmaScaling":
        return cls(s=s, eta=np.ones(s))


@dataclass(frozen=True)
class TableauMatrices:
    """k-stage tableau with its line-integral factors.

    P and I are k x s (basis values and antiderivatives at the abscissae),
    omega holds the k quadrature weights, A = I diag(eta) P^T diag(omega).
    """

    s: int
    k: int
    c: np.ndarray
    b: np.ndarray
    P: np.ndarray
    I: np.ndarray
    omega: np.ndarray
    A: np.ndarray


def _assemble(k: int, s: int, eta: np.ndarray) -> TableauMatrices:
    rule = gauss_rule(k)
    c, b = rule.nodes, rule.weights
    P = legendre_table(s - 1, c).T
    I = integral_table(s - 1, c).T
    A = (I * eta) @ (P.T * b)
    return TableauMatrices(s=s, k=k, c=c, b=b, P=P, I=I, omega=b, A=A)


def build_hbvm_tableau(k: int, s: int) -> TableauMatrices:
    """Tableau of HBVM(k, s); reduces to the s-stage Gauss method when k = s."""
    if s < 1:
        raise ValueError(f"need s >= 1, got s={s}")
    if k < s:
        raise ValueError(f"need k >= s, got k={k}, s={s}")
    return _assemble(k, s, np.ones(s))


def build_elim_tableau(k: int, s: int, sigma: SigmaScaling) -> TableauMatrices:
    """Tableau with the stage polynomial rescaled by sigma (affine in each eta entry)."""
    if s < 1:
        raise ValueError(f"need s >= 1, got s={s}")
    if k < s:
        raise ValueError(f"need k >= s, got k={k}, s={s}")
    if sigma.s != s:
        raise ValueError(f"sigma built for s={sigma.s}, tableau wants s={s}")
    return _assemble(k, s, sigma.eta)


def xhat_matrix(s: int) -> np.ndarray:
    """(s+1) x s step matrix X with int_0^c P_j = sum_i X[i, j] P_i(c)."""
    if s < 1:
        raise ValueError(f"need s >= 1, got s={s}")
    X = np.zeros((s + 1, s))
    X[0, 0] = 0.5
    for j in range(1, s):
        X[j - 1, j] = -xi_coefficient(j)
    for j in range(s):
        X[j + 1, j] = xi_coefficient(j + 1)
    return X


def tableau_to_json(tab: TableauMatrices) -> dict:
    """JSON-ready dict with fields s, k, c, b, A."""
    return {
        "s": tab.s,
        "k": tab.k,
        "c": tab.c.tolist(),
        "b": tab.b.tolist(),
        "A": tab.A.tolist(),
    }
