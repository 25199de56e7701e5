"""The four Gramian families of a bilinear system.

* type1: P1, Q1 from the generalized Lyapunov equations with unshifted A.
  They carry no control information and yield only local energy statements.
* type2_bilinear: P from the Riccati-type inequality and Q from the
  generalized Lyapunov equation, both with A shifted by (k^2/2) I, where k
  bounds the control pointwise.  This pair certifies the output error bound.
* type2_stochastic: P2, the k = 0 special case of the inequality.
* mixed_Q1_P2: the pair (P2, Q1), valid for the error bound only under
  sufficiently small controls (checked empirically downstream).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kronecker import symmetrize
from .matrix_equations import (
    GeneralizedLyapunovProblem,
    RiccatiInequalityProblem,
    RiccatiInfeasibleError,
    MeanSquareInstabilityError,
    SolveDiagnostics,
    check_lmi_feasibility,
    invert_spd,
    solve_generalized_lyapunov,
    solve_type2_riccati,
)
from .system import BilinearSystem, stability_report

GRAMIAN_KINDS = ("type1", "type2_bilinear", "type2_stochastic", "mixed_Q1_P2")

# eigenvalues inside (-CLAMP_TOL, CLAMP_TOL) count as zero: the pair is then
# flagged not minimal and balancing applies its own regularization
CLAMP_TOL = 1e-10


@dataclass(frozen=True)
class GramianPair:
    """A reachability-type and an observability-type Gramian with provenance."""

    P: np.ndarray
    Q: np.ndarray
    kind: str
    k: float
    diagnostics: tuple  # (SolveDiagnostics for P, SolveDiagnostics for Q)
    delta: float | None = None  # slack actually used by the inequality solver
    lmi_margin: float | None = None  # largest eigenvalue of the certificate block
    minimal: bool = True

    def __post_init__(self):
        if self.kind not in GRAMIAN_KINDS:
            raise ValueError(f"unknown Gramian kind {self.kind!r}")


def _minimality(P, Q):
    margins = [float(np.linalg.eigvalsh(M).min()) for M in (P, Q)]
    return all(margin > CLAMP_TOL for margin in margins)


def _require_ms_stable(sys, max_kron_n=None):
    report = stability_report(sys, 0.0, max_kron_n=max_kron_n)
    if report.ms_abscissa >= 0.0:
        raise MeanSquareInstabilityError(
            f"system is not mean-square stable (abscissa {report.ms_abscissa:.3e})"
        )
    return report


def type1_gramians(sys: BilinearSystem, method="auto", max_kron_n=None) -> GramianPair:
    """Solve A P1 + P1 A^T + sum N_i P1 N_i^T = -B B^T and the transposed-side
    analogue with -C^T C."""
    _require_ms_stable(sys, max_kron_n)
    P, diag_p = solve_generalized_lyapunov(
        GeneralizedLyapunovProblem(M=sys.A, N=sys.N, RHS=-sys.B @ sys.B.T,
                                   side="reachability"),
        method=method, max_kron_n=max_kron_n)
    Q, diag_q = solve_generalized_lyapunov(
        GeneralizedLyapunovProblem(M=sys.A, N=sys.N, RHS=-sys.C.T @ sys.C,
                                   side="observability"),
        method=method, max_kron_n=max_kron_n)
    return GramianPair(P=P, Q=Q, kind="type1", k=0.0, diagnostics=(diag_p, diag_q),
                       minimal=_minimality(P, Q))


def default_delta(sys: BilinearSystem) -> float:
    scale = float(np.linalg.norm(sys.B @ sys.B.T, 2))
    return 1e-6 * (scale if scale > 0.0 else 1.0)


def _shifted(sys, k):
    return sys.A + 0.5 * float(k) ** 2 * np.eye(sys.n)


def _solve_p_inequality(sys, k, delta, max_kron_n=None):
    if delta is None:
        delta = default_delta(sys)
    report = stability_report(sys, k, max_kron_n=max_kron_n)
    if report.perturbed_ms_abscissa >= 0.0:
        raise RiccatiInfeasibleError(
            f"control bound k={k} is infeasible: perturbed mean-square abscissa "
            f"{report.perturbed_ms_abscissa:.3e} >= 0 (largest feasible bound "
            f"~ {report.k_max_estimate:.6g})",
            abscissa=report.perturbed_ms_abscissa,
            k_max=report.k_max_estimate,
        )
    if not np.any(sys.B != 0.0):
        # nothing is reachable: the honest Gramian is zero (and not minimal);
        # the inequality itself only pins P down to "inverse of any small X"
        diag = SolveDiagnostics(method="kronecker_direct", iterations=0,
                                residual_norm=0.0, definiteness_margin=0.0)
        return np.zeros((sys.n, sys.n)), None, diag, float(delta)
    X, diag, delta_used = solve_type2_riccati(
        RiccatiInequalityProblem(A_shifted=_shifted(sys, k), N=sys.N, B=sys.B,
                                 delta=delta),
        max_kron_n=max_kron_n)
    P, _ = invert_spd(X)
    return P, X, diag, delta_used


def type2_gramians(sys: BilinearSystem, k, delta=None, method="auto",
                   max_kron_n=None) -> GramianPair:
    """Control-bounded Gramians: P from the inequality and Q from the shifted
    observability equation, both at drift A + (k^2/2) I.

    Raises RiccatiInfeasibleError (with the bisection estimate of the largest
    feasible bound attached) if k is too large for the system."""
    P, X, diag_p, delta_used = _solve_p_inequality(sys, k, delta, max_kron_n)
    Q, diag_q = solve_generalized_lyapunov(
        GeneralizedLyapunovProblem(M=_shifted(sys, k), N=sys.N,
                                   RHS=-sys.C.T @ sys.C, side="observability"),
        method=method, max_kron_n=max_kron_n)
    lmi_margin = None
    if X is not None:
        lmi_margin = check_lmi_feasibility(sys, k, P, X=X).largest_eigenvalue
    return GramianPair(P=P, Q=Q, kind="type2_bilinear", k=float(k),
                       diagnostics=(diag_p, diag_q), delta=delta_used,
                       lmi_margin=lmi_margin,
                       minimal=_minimality(P, Q))


def stochastic_type2_P2(sys: BilinearSystem, delta=None, max_kron_n=None):
    """The k = 0 inequality Gramian P2.  Returns (P2, diagnostics, delta_used)."""
    P, _X, diag, delta_used = _solve_p_inequality(sys, 0.0, delta, max_kron_n)
    return P, diag, delta_used


def mixed_pair_Q1_P2(sys: BilinearSystem, delta=None, method="auto",
                     max_kron_n=None) -> GramianPair:
    """The pair (P2, Q1).  The output error bound built on it holds only when
    the control is small enough; use the mixed side-condition check on every
    trajectory before trusting it."""
    P, diag_p, delta_used = stochastic_type2_P2(sys, delta, max_kron_n)
    Q, diag_q = solve_generalized_lyapunov(
        GeneralizedLyapunovProblem(M=sys.A, N=sys.N, RHS=-sys.C.T @ sys.C,
                                   side="observability"),
        method=method, max_kron_n=max_kron_n)
    lmi_margin = None
    if np.linalg.eigvalsh(P).min() > 0.0:
        lmi_margin = check_lmi_feasibility(sys, 0.0, P).largest_eigenvalue
    return GramianPair(P=P, Q=Q, kind="mixed_Q1_P2", k=0.0,
                       diagnostics=(diag_p, diag_q), delta=delta_used,
                       lmi_margin=lmi_margin,
                       minimal=_minimality(P, Q))


def transform_gramians(pair: GramianPair, T, T_inv=None) -> GramianPair:
    """Covariant transformation P^ = T P T^T, Q^ = T^-T Q T^-1: the transformed
    pair satisfies the transformed system's defining relations, and the
    eigenvalues of P Q (hence the Hankel singular values) are unchanged."""
    T = np.asarray(T, dtype=float)
    if T_inv is None:
        T_inv = np.linalg.inv(T)
    P_hat = symmetrize(T @ pair.P @ T.T)
    Q_hat = symmetrize(T_inv.T @ pair.Q @ T_inv)
    return GramianPair(P=P_hat, Q=Q_hat, kind=pair.kind, k=pair.k,
                       diagnostics=pair.diagnostics, delta=pair.delta,
                       lmi_margin=None, minimal=pair.minimal)


def control_bound_from_trajectory(traj) -> float:
    """Convenience: the pointwise bound max_t ||u(t)||_2 realised by a trajectory."""
    return float(np.sqrt((traj.inputs ** 2).sum(axis=1).max()))
