"""Dense solvers for the matrix equations behind the bilinear Gramians.

Two problem families are covered:

* generalized Lyapunov equations
      M X + X M^T + sum_i N_i X N_i^T = RHS        (reachability side)
      M^T X + X M + sum_i N_i^T X N_i = RHS        (observability side)

* the Riccati-type inequality
      A_s^T X + X A_s + sum_i N_i^T X N_i + X B B^T X <= -delta I,
  solved on the slacked equality whenever a root is reachable (the maximal
  root gives the minimal reachability-side Gramian P = X^-1) and by a
  certified interior point otherwise.

Every solve is certified after the fact: residuals, the smallest eigenvalue
of the solution, and (for the inequality) the Schur-complement block matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_are, solve_continuous_lyapunov

from . import kronecker
from .kronecker import symmetrize, vec, unvec
from .system import BilinearSystem

FIXED_POINT_CHANGE_TOL = 1e-12
FIXED_POINT_MAX_SWEEPS = 10000
KRON_RESIDUAL_TOL = 1e-10
FIXED_POINT_RESIDUAL_TOL = 1e-8
CARE_CHANGE_TOL = 1e-13
HOMOTOPY_ITER_BUDGET = 800
HOMOTOPY_PATH_TOL = 1e-8
HOMOTOPY_STEP_MAX = 12
NEWTON_POLISH_MAX = 60
RICCATI_RESIDUAL_TOL = 1e-10


class MatrixEquationError(RuntimeError):
    pass


class MeanSquareInstabilityError(MatrixEquationError):
    """The coefficient pair is not mean-square stable; no PSD solution exists."""


class ConvergenceError(MatrixEquationError):
    """An iterative solver hit its cap or stagnated."""


class RiccatiInfeasibleError(MatrixEquationError):
    """No positive-definite solution found; usually the control bound k is too
    large for the system."""

    def __init__(self, message, abscissa=None, k_max=None):
        super().__init__(message)
        self.abscissa = abscissa
        self.k_max = k_max


@dataclass(frozen=True)
class GeneralizedLyapunovProblem:
    """Data of one generalized Lyapunov equation.

    `side` is "reachability" (M X + X M^T + sum N_i X N_i^T = RHS) or
    "observability" (M^T X + X M + sum N_i^T X N_i = RHS).
    """

    M: np.ndarray
    N: tuple
    RHS: np.ndarray
    side: str = "reachability"

    def __post_init__(self):
        if self.side not in ("reachability", "observability"):
            raise ValueError(f"unknown side {self.side!r}")
        rhs = np.asarray(self.RHS, dtype=float)
        asym = np.linalg.norm(rhs - rhs.T)
        scale = max(np.linalg.norm(rhs), 1.0)
        if asym > 1e-12 * scale:
            raise ValueError(f"RHS is not symmetric (relative asymmetry {asym / scale:.2e})")


@dataclass(frozen=True)
class RiccatiInequalityProblem:
    """Data of the shifted Riccati-type inequality; A_shifted = A + (k^2/2) I."""

    A_shifted: np.ndarray
    N: tuple
    B: np.ndarray
    delta: float

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class SolveDiagnostics:
    method: str  # kronecker_direct | fixed_point | newton
    iterations: int
    residual_norm: float  # relative Frobenius
    definiteness_margin: float  # smallest eigenvalue of the solution

    def to_dict(self):
        return {
            "method": self.method,
            "iterations": int(self.iterations),
            "residual_norm": float(self.residual_norm),
            "definiteness_margin": float(self.definiteness_margin),
        }


def _apply_lyapunov(M, N_list, X, side):
    if side == "reachability":
        R = M @ X + X @ M.T
        for Ni in N_list:
            R += Ni @ X @ Ni.T
    else:
        R = M.T @ X + X @ M
        for Ni in N_list:
            R += Ni.T @ X @ Ni
    return R


def _relative_residual(M, N_list, X, RHS, side):
    R = _apply_lyapunov(M, N_list, X, side) - RHS
    denom = np.linalg.norm(RHS)
    if denom == 0.0:
        denom = max(np.linalg.norm(X), 1.0)
    return float(np.linalg.norm(R) / denom)


def _solve_kronecker(M, N_list, RHS, side, max_kron_n=None):
    n = M.shape[0]
    kronecker.check_kron_dim(n, max_kron_n)
    K = kronecker.reach_operator(M, N_list)
    if side == "observability":
        K = K.T
    try:
        x = np.linalg.solve(K, vec(RHS))
        # one iterative refinement pass keeps the residual near machine level
        x += np.linalg.solve(K, vec(RHS) - K @ x)
    except np.linalg.LinAlgError as exc:
        raise MeanSquareInstabilityError(
            f"Kronecker matrix singular ({exc}); the pair is on or beyond the "
            "mean-square stability boundary"
        ) from exc
    return symmetrize(unvec(x, n))


def _solve_fixed_point(M, N_list, RHS, side):
    """Splitting iteration: solve the plain Lyapunov part per sweep, move the
    coupling terms to the right-hand side.  Contracts exactly under
    mean-square stability."""
    a = M if side == "reachability" else M.T
    X = np.zeros_like(RHS)
    scale = max(np.linalg.norm(RHS), 1.0)
    for sweep in range(1, FIXED_POINT_MAX_SWEEPS + 1):
        if side == "reachability":
            Q = RHS - sum(Ni @ X @ Ni.T for Ni in N_list)
        else:
            Q = RHS - sum(Ni.T @ X @ Ni for Ni in N_list)
        try:
            X_new = symmetrize(solve_continuous_lyapunov(a, Q))
        except np.linalg.LinAlgError as exc:
            raise MeanSquareInstabilityError(f"Lyapunov sweep failed: {exc}") from exc
        if not np.all(np.isfinite(X_new)) or np.linalg.norm(X_new) > 1e50 * scale:
            raise MeanSquareInstabilityError(
                f"fixed-point iteration diverged at sweep {sweep}; the pair is "
                "not mean-square stable"
            )
        change = np.linalg.norm(X_new - X)
        X = X_new
        if change <= FIXED_POINT_CHANGE_TOL * max(np.linalg.norm(X), 1e-300):
            return X, sweep
    raise ConvergenceError(
        f"fixed-point iteration did not converge within {FIXED_POINT_MAX_SWEEPS} sweeps"
    )


def solve_generalized_lyapunov(prob: GeneralizedLyapunovProblem, method="auto",
                               max_kron_n=None):
    """Solve a generalized Lyapunov equation.

    method: "kronecker_direct" (dense n^2 x n^2 solve, n capped),
    "fixed_point" (Lyapunov splitting sweeps) or "auto" (direct below the
    cap, fixed point above it).

    Returns (X, SolveDiagnostics); X is symmetrized and its smallest
    eigenvalue is reported as the definiteness margin.
    """
    M = np.asarray(prob.M, dtype=float)
    N_list = [np.asarray(Ni, dtype=float) for Ni in prob.N]
    RHS = symmetrize(np.asarray(prob.RHS, dtype=float))
    n = M.shape[0]

    if method == "auto":
        method = "kronecker_direct" if n <= kronecker.max_kron_dim(max_kron_n) else "fixed_point"
    if method == "kronecker_direct":
        X = _solve_kronecker(M, N_list, RHS, prob.side, max_kron_n)
        iterations = 1
        tol = KRON_RESIDUAL_TOL
    elif method == "fixed_point":
        X, iterations = _solve_fixed_point(M, N_list, RHS, prob.side)
        tol = FIXED_POINT_RESIDUAL_TOL
    else:
        raise ValueError(f"unknown method {method!r}")

    residual = _relative_residual(M, N_list, X, RHS, prob.side)
    if residual > tol:
        raise ConvergenceError(
            f"{method} residual {residual:.3e} exceeds tolerance {tol:.1e}"
        )
    margin = float(np.linalg.eigvalsh(X).min()) if n > 0 else 0.0
    return X, SolveDiagnostics(method=method, iterations=iterations,
                               residual_norm=residual, definiteness_margin=margin)


def _riccati_residual(A_s, N_list, BBt, X, delta):
    G = _apply_lyapunov(A_s, N_list, X, "observability") + X @ BBt @ X \
        + delta * np.eye(X.shape[0])
    scale = max(
        delta * np.sqrt(X.shape[0]),
        np.linalg.norm(X @ BBt @ X),
        np.linalg.norm(A_s.T @ X + X @ A_s),
        1e-300,
    )
    return float(np.linalg.norm(G) / scale)


def _newton_at_coupling(A_s, N_list, BBt, delta, s, X0, max_iter, tol):
    """Newton on the slacked equality with the coupling scaled by s: each step
    solves the generalized Lyapunov equation of the closed loop A_s + B B^T X_j,

        Ac^T X+ + X+ Ac + s * sum N_i^T X+ N_i = X_j B B^T X_j - delta I.

    Returns (X, residual, iterations); X is None if the iteration broke down.
    """
    n = A_s.shape[0]
    eye = np.eye(n)
    Ns = [np.sqrt(s) * Ni for Ni in N_list]
    X = X0
    best, best_resid = None, np.inf
    scale0 = max(np.linalg.norm(X0), 1.0)
    for it in range(1, max_iter + 1):
        Ac = A_s + BBt @ X
        K = kronecker.obs_operator(Ac, Ns)
        rhs = X @ BBt @ X - delta * eye
        try:
            X_new = symmetrize(unvec(np.linalg.solve(K, vec(rhs)), n))
        except np.linalg.LinAlgError:
            return best, best_resid, it
        if not np.all(np.isfinite(X_new)) or np.linalg.norm(X_new) > 1e10 * scale0:
            return best, best_resid, it
        change = np.linalg.norm(X_new - X)
        X = X_new
        resid = _riccati_residual(A_s, Ns, BBt, X, delta)
        if resid < best_resid:
            best, best_resid = X, resid
        if resid <= tol or change <= CARE_CHANGE_TOL * max(np.linalg.norm(X), 1e-300):
            return best, best_resid, it
    return best, best_resid, max_iter


def _homotopy_solve(A_s, N_list, B, BBt, delta):
    """Track the maximal-root branch from the uncoupled CARE (coupling scale
    s = 0) to the full equation (s = 1) with adaptive steps and Newton
    warm starts; the final point is polished to full residual tolerance.

    The s = 0 equation maps onto a standard CARE with drift -A_s and state
    weight -delta I; its stabilizing branch makes A_s + B B^T X anti-stable,
    which is the maximal-root branch (minimal Gramian P)."""
    n = A_s.shape[0]
    try:
        X = symmetrize(solve_continuous_are(-A_s, B, -delta * np.eye(n),
                                            np.eye(B.shape[1])))
    except (np.linalg.LinAlgError, ValueError):
        return None, np.inf, 1
    if not np.all(np.isfinite(X)):
        return None, np.inf, 1
    iters = 1
    s, ds = 0.0, 0.25
    while s < 1.0 and iters < HOMOTOPY_ITER_BUDGET:
        s_next = min(1.0, s + ds)
        if s_next == 1.0:
            tol, step_max = 0.01 * RICCATI_RESIDUAL_TOL, NEWTON_POLISH_MAX
        else:
            tol, step_max = HOMOTOPY_PATH_TOL, HOMOTOPY_STEP_MAX
        X_new, resid, it = _newton_at_coupling(A_s, N_list, BBt, delta, s_next,
                                               X, step_max, tol)
        iters += it
        accept_tol = RICCATI_RESIDUAL_TOL if s_next == 1.0 else HOMOTOPY_PATH_TOL
        if X_new is not None and resid <= accept_tol:
            X, s = X_new, s_next
            ds = min(2.0 * ds, 1.0 - s + 1e-16)
        else:
            ds *= 0.5
            if ds < 1e-4:  # fold in the branch: no solution beyond this s
                return None, np.inf, iters
    resid = _riccati_residual(A_s, N_list, BBt, X, delta)
    return X, resid, iters


def _scaled_lyapunov_feasible(A_s, N_list, BBt, delta, max_kron_n):
    """Certified fallback: with Y solving A_s^T Y + Y A_s + sum N_i^T Y N_i = -I,
    every X = c Y has slack matrix -c I + c^2 Y B B^T Y, so c can be chosen to
    keep the margin below -delta.  Conservative (large P) but always exists
    under mean-square stability."""
    n = A_s.shape[0]
    Y, diag = solve_generalized_lyapunov(
        GeneralizedLyapunovProblem(M=A_s, N=tuple(N_list), RHS=-np.eye(n),
                                   side="observability"),
        max_kron_n=max_kron_n)
    lam_w = float(np.linalg.eigvalsh(Y @ BBt @ Y).max())
    if lam_w <= 0.0:
        # quadratic term vanishes along Y: X = Y has margin -1 <= -delta
        return Y, diag
    if 4.0 * delta * lam_w >= 1.0:
        return None, diag
    # largest root of -c + c^2 lam_w = -delta, backed off 0.1% for rounding
    c_max = (1.0 + np.sqrt(1.0 - 4.0 * delta * lam_w)) / (2.0 * lam_w)
    return 0.999 * c_max * Y, diag


def _equality_candidates(A_s, N_list, B, BBt, bnorm, delta, msab):
    """All positive-definite roots of the slacked equality the two strategies
    find: plain Newton from a ladder of theta * I starts, plus the
    coupling-homotopy branch from the uncoupled CARE."""
    iters = 0
    candidates = []
    theta0 = (-msab) / bnorm
    n = A_s.shape[0]
    for factor in (4.0, 16.0, 64.0, 256.0):
        X, resid, it = _newton_at_coupling(A_s, N_list, BBt, delta, 1.0,
                                           factor * theta0 * np.eye(n),
                                           NEWTON_POLISH_MAX,
                                           0.01 * RICCATI_RESIDUAL_TOL)
        iters += it
        if X is not None and resid <= RICCATI_RESIDUAL_TOL \
                and np.linalg.eigvalsh(X).min() > 0.0:
            candidates.append(X)
    X, resid, it = _homotopy_solve(A_s, N_list, B, BBt, delta)
    iters += it
    if X is not None and resid <= RICCATI_RESIDUAL_TOL \
            and np.linalg.eigvalsh(X).min() > 0.0:
        candidates.append(X)
    return candidates, iters


def solve_type2_riccati(prob: RiccatiInequalityProblem, max_kron_n=None):
    """Find a positive-definite X with
    A_s^T X + X A_s + sum N_i^T X N_i + X B B^T X <= -delta I.

    Any root of the slacked equality (right-hand side -delta I) is feasible;
    among the roots found, the one of smallest trace(X^-1) is returned, since
    small P = X^-1 gives the least conservative truncation bound.  Roots are
    hunted by Newton iteration (each step a generalized Lyapunov solve of the
    closed loop) from a ladder of scaled-identity starts and along a homotopy
    in the coupling strength started from the uncoupled CARE.  The equality
    is not guaranteed to be solvable; when no root is found, a certified
    interior point of the inequality built from a scaled generalized Lyapunov
    solution is returned instead.  Whenever a slack proves unreachable, delta
    is halved and the solve retried; the delta actually used is returned.

    Returns (X, SolveDiagnostics, delta_used).
    """
    A_s = np.asarray(prob.A_shifted, dtype=float)
    N_list = [np.asarray(Ni, dtype=float) for Ni in prob.N]
    B = np.atleast_2d(np.asarray(prob.B, dtype=float))
    n = A_s.shape[0]
    kronecker.check_kron_dim(n, max_kron_n)

    msab = kronecker.ms_abscissa(A_s, N_list, max_kron_n=max_kron_n)
    if msab >= 0.0:
        raise RiccatiInfeasibleError(
            f"shifted pair is not mean-square stable (abscissa {msab:.3e} >= 0); "
            "no positive-definite solution exists for this control bound",
            abscissa=msab,
        )

    BBt = B @ B.T
    bnorm = float(np.linalg.norm(BBt, 2))
    eye = np.eye(n)

    if bnorm == 0.0:
        # quadratic term vanishes: the equality is a generalized Lyapunov
        # equation and any small positive-definite X is feasible
        X, diag = solve_generalized_lyapunov(
            GeneralizedLyapunovProblem(M=A_s, N=tuple(N_list),
                                       RHS=-float(prob.delta) * eye,
                                       side="observability"),
            max_kron_n=max_kron_n)
        return X, diag, float(prob.delta)

    delta = float(prob.delta)
    total_iters = 0
    for _halving in range(60):
        candidates, iters = _equality_candidates(A_s, N_list, B, BBt, bnorm,
                                                 delta, msab)
        total_iters += iters

        X_lyap, lyap_diag = _scaled_lyapunov_feasible(A_s, N_list, BBt, delta,
                                                      max_kron_n)
        total_iters += lyap_diag.iterations
        if X_lyap is not None:
            slack = _apply_lyapunov(A_s, N_list, X_lyap, "observability") \
                + X_lyap @ BBt @ X_lyap
            margin = float(np.linalg.eigvalsh(symmetrize(slack)).max())
            if margin <= -delta and np.linalg.eigvalsh(X_lyap).min() > 0.0:
                candidates.append(X_lyap)

        if candidates:
            X = min(candidates, key=lambda c: float(np.trace(np.linalg.inv(c))))
            from_equality = X is not X_lyap
            diag = SolveDiagnostics(
                method="newton" if from_equality else lyap_diag.method,
                iterations=total_iters,
                # for the interior point the equality residual is not meaningful;
                # its certificate is the feasibility margin, reported as 0
                residual_norm=(_riccati_residual(A_s, N_list, BBt, X, delta)
                               if from_equality else 0.0),
                definiteness_margin=float(np.linalg.eigvalsh(X).min()))
            return X, diag, delta
        delta *= 0.5
    raise ConvergenceError(
        f"inequality solve failed for every slack down to delta={delta:.3e} "
        f"(started from {prob.delta:.3e})"
    )


@dataclass(frozen=True)
class FeasibilityReport:
    largest_eigenvalue: float
    feasible: bool
    tol: float
    cond_P: float

    def to_dict(self):
        return {
            "largest_eigenvalue": float(self.largest_eigenvalue),
            "feasible": bool(self.feasible),
            "tol": float(self.tol),
            "cond_P": float(self.cond_P),
        }


def invert_spd(P, cond_cap=1e14):
    """Invert a symmetric positive-definite matrix via its eigendecomposition."""
    P = symmetrize(np.asarray(P, dtype=float))
    w, V = np.linalg.eigh(P)
    if w.min() <= 0.0 or w.max() / w.min() > cond_cap:
        raise MatrixEquationError(
            f"matrix not invertible within condition cap {cond_cap:.1e} "
            f"(eigenvalue range [{w.min():.3e}, {w.max():.3e}])"
        )
    return (V / w) @ V.T, float(w.max() / w.min())


def check_lmi_feasibility(sys: BilinearSystem, k, P, X=None, tol=1e-8,
                          cond_cap=1e14) -> FeasibilityReport:
    """Certify a reachability-side Gramian candidate P against the
    Schur-complement block matrix

        [[A_s^T X + X A_s + sum N_i^T X N_i,  X B],
         [B^T X,                              -I ]],   X = P^-1,

    which is negative semidefinite iff P satisfies the Riccati-type
    inequality at control bound k.  Feasible iff the largest eigenvalue of
    the block matrix is <= tol."""
    if X is None:
        X, cond_P = invert_spd(P, cond_cap)
    else:
        X = symmetrize(np.asarray(X, dtype=float))
        w = np.linalg.eigvalsh(symmetrize(np.asarray(P, dtype=float)))
        cond_P = float(w.max() / w.min()) if w.min() > 0 else np.inf
    A_s = sys.A + 0.5 * float(k) ** 2 * np.eye(sys.n)
    top = A_s.T @ X + X @ A_s
    for Ni in sys.N:
        top += Ni.T @ X @ Ni
    S = np.block([[top, X @ sys.B], [sys.B.T @ X, -np.eye(sys.m)]])
    lam = float(np.linalg.eigvalsh(symmetrize(S)).max())
    return FeasibilityReport(largest_eigenvalue=lam, feasible=lam <= tol,
                             tol=float(tol), cond_P=cond_P)
