"""Kronecker-product operators shared by the stability checks and the dense solvers.

All vectorisations are column-major (``order="F"``), so that
``vec(M X) = (I kron M) vec(X)`` and ``vec(X M^T) = (M kron I) vec(X)``.
"""

import os

import numpy as np

DEFAULT_MAX_KRON_N = 60
MAX_KRON_ENV = "BILBT_MAX_KRON_N"


class KroneckerCapError(RuntimeError):
    """State dimension too large for the dense n^2 x n^2 path."""


def max_kron_dim(override=None):
    """Largest n for which dense Kronecker matrices are built.

    Resolution order: explicit `override`, the BILBT_MAX_KRON_N environment
    variable, then the built-in default.
    """
    if override is not None:
        return int(override)
    env = os.environ.get(MAX_KRON_ENV)
    if env is not None:
        return int(env)
    return DEFAULT_MAX_KRON_N


def check_kron_dim(n, override=None):
    cap = max_kron_dim(override)
    if n > cap:
        raise KroneckerCapError(
            f"state dimension n={n} exceeds the dense Kronecker cap {cap}; "
            f"set {MAX_KRON_ENV} or pass max_kron_n to override"
        )


def symmetrize(X):
    return 0.5 * (X + X.T)


def vec(X):
    return np.asarray(X).reshape(-1, order="F")


def unvec(v, n):
    return np.asarray(v).reshape((n, n), order="F")


def reach_operator(M, N_list):
    """Matrix of X -> M X + X M^T + sum_i N_i X N_i^T on vec(X)."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    eye = np.eye(n)
    K = np.kron(eye, M) + np.kron(M, eye)
    for Ni in N_list:
        Ni = np.asarray(Ni, dtype=float)
        K += np.kron(Ni, Ni)
    return K


def obs_operator(M, N_list):
    """Matrix of X -> M^T X + X M + sum_i N_i^T X N_i on vec(X)."""
    return reach_operator(M, N_list).T


def spectral_abscissa(M):
    """Largest real part of the eigenvalues of M."""
    return float(np.max(np.linalg.eigvals(np.asarray(M, dtype=float)).real))


def ms_abscissa(M, N_list, max_kron_n=None):
    """Mean-square spectral abscissa: largest real eigenvalue part of
    I kron M + M kron I + sum_i N_i kron N_i.

    Negative iff the pair (M, (N_i)) is mean-square stable, which is the
    existence condition for the Gramians solved downstream.
    """
    n = np.asarray(M).shape[0]
    check_kron_dim(n, max_kron_n)
    return spectral_abscissa(reach_operator(M, N_list))
