"""Centralized closed-form WLS, the reference solution for every solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import DimensionMismatch, SingularSystem
from .measurements import _weights


@dataclass(frozen=True)
class NormalSystem:
    L: np.ndarray
    u: np.ndarray


def build_normal_system(H, R, z) -> NormalSystem:
    """Gain matrix ``H^T R^-1 H`` (exactly symmetric) and ``H^T R^-1 z``."""
    H = np.asarray(H, dtype=float)
    z = np.asarray(z, dtype=float)
    w = _weights(R)
    if H.ndim != 2 or H.shape[0] != z.size or w.size != z.size:
        raise DimensionMismatch(f"H {H.shape}, z {z.shape}, R {np.shape(R)} are inconsistent")
    Hw = H * w[:, None]
    L = H.T @ Hw
    L = 0.5 * (L + L.T)
    return NormalSystem(L, Hw.T @ z)


def solve_centralized(ns: NormalSystem) -> np.ndarray:
    """Solve ``L x = u`` through a Cholesky factorization.

    Raises
    ------
    SingularSystem
        If ``L`` is not positive definite (unobservable measurement set).
    """
    if ns.L.size == 0:
        return np.zeros(0)
    try:
        factor = cho_factor(ns.L, lower=True, check_finite=True)
    except LinAlgError as exc:
        raise SingularSystem("gain matrix is not positive definite; system is unobservable") from exc
    x = cho_solve(factor, ns.u)
    # rank-deficient matrices can slip through Cholesky with a tiny pivot
    d = np.abs(np.diag(factor[0]))
    if d.min() <= d.max() * 1e-7:
        raise SingularSystem("gain matrix is numerically singular")
    return x
