"""Bilinear control systems: the model type, validation, stability spectra,
state-space transformations, rescaling, partitioning and JSON I/O.

The state equation is

    dx/dt = A x + B u + sum_i N_i x u_i,      y = C x,

with A (n x n), B (n x m), one coupling matrix N_i per input channel and
C (p x n).  All types are immutable after construction; the operations are
pure functions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kronecker
from .kronecker import KroneckerCapError  # re-exported for callers  # noqa: F401

DEFAULT_COND_CAP = 1e8


def _freeze(a):
    arr = np.array(a, dtype=float, order="C")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BilinearSystem:
    """Dense realization (A, B, N_1..N_m, C) with dimensions (n, m, p)."""

    A: np.ndarray
    B: np.ndarray
    N: tuple
    C: np.ndarray
    n: int
    m: int
    p: int

    def __post_init__(self):
        object.__setattr__(self, "A", _freeze(self.A))
        object.__setattr__(self, "B", _freeze(self.B))
        object.__setattr__(self, "N", tuple(_freeze(Ni) for Ni in self.N))
        object.__setattr__(self, "C", _freeze(self.C))

    @classmethod
    def from_matrices(cls, A, B, N, C):
        """Build a system inferring (n, m, p) from the matrix shapes."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        C = np.atleast_2d(np.asarray(C, dtype=float))
        N = [np.atleast_2d(np.asarray(Ni, dtype=float)) for Ni in N]
        return cls(A=A, B=B, N=tuple(N), C=C,
                   n=A.shape[0], m=B.shape[1], p=C.shape[0])


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    issues: tuple

    def __bool__(self):
        return self.ok


def validate(sys: BilinearSystem) -> ValidationResult:
    """Check every model invariant and report all violations, not just the first."""
    issues = []
    n, m, p = sys.n, sys.m, sys.p
    for name, dim in (("n", n), ("m", m), ("p", p)):
        if not isinstance(dim, (int, np.integer)) or dim < 1:
            issues.append(f"dimension {name}={dim} must be a positive integer")
    if sys.A.shape != (n, n):
        issues.append(f"A has shape {sys.A.shape}, expected ({n}, {n})")
    if sys.B.shape != (n, m):
        issues.append(f"B has shape {sys.B.shape}, expected ({n}, {m})")
    if sys.C.shape != (p, n):
        issues.append(f"C has shape {sys.C.shape}, expected ({p}, {n})")
    if len(sys.N) != m:
        if len(sys.N) == 0 and m > 0:
            issues.append(f"N list is empty but m={m}: one coupling matrix per input required")
        else:
            issues.append(f"N has {len(sys.N)} matrices, expected m={m}")
    for i, Ni in enumerate(sys.N):
        if Ni.shape != (n, n):
            issues.append(f"N[{i}] has shape {Ni.shape}, expected ({n}, {n})")
    for name, mat in (("A", sys.A), ("B", sys.B), ("C", sys.C)):
        if not np.all(np.isfinite(mat)):
            issues.append(f"{name} contains non-finite entries")
    for i, Ni in enumerate(sys.N):
        if not np.all(np.isfinite(Ni)):
            issues.append(f"N[{i}] contains non-finite entries")
    return ValidationResult(ok=not issues, issues=tuple(issues))


def require_valid(sys: BilinearSystem) -> BilinearSystem:
    """Raise ValueError listing every violation if the system is invalid."""
    result = validate(sys)
    if not result.ok:
        raise ValueError("invalid bilinear system: " + "; ".join(result.issues))
    return sys


@dataclass(frozen=True)
class StabilityReport:
    """Stability spectra of a bilinear system.

    `ms_abscissa` is the largest real eigenvalue part of the n^2 x n^2
    operator I kron A + A kron I + sum N_i kron N_i; negative means the
    Gramian equations have positive semidefinite solutions.  The perturbed
    value replaces A by A + (k^2/2) I, which shifts the abscissa by exactly
    k^2.  `k_max_estimate` is the largest control bound that keeps the
    perturbed abscissa negative.
    """

    hurwitz: bool
    spectral_abscissa_A: float
    ms_abscissa: float
    k: float
    perturbed_ms_abscissa: float
    k_max_estimate: float


def perturbed_ms_abscissa(sys: BilinearSystem, k, max_kron_n=None):
    """Mean-square abscissa with the drift shifted to A + (k^2/2) I."""
    A_shifted = sys.A + 0.5 * float(k) ** 2 * np.eye(sys.n)
    return kronecker.ms_abscissa(A_shifted, sys.N, max_kron_n=max_kron_n)


def _bisect_k_max(msab, tol=1e-8):
    # Exploits the exact identity perturbed(k) = msab + k^2; the closed form
    # sqrt(-msab) seeds the bracket and cross-checks the result.
    if msab >= 0.0:
        return 0.0
    k_closed = float(np.sqrt(-msab))
    lo, hi = 0.0, 2.0 * k_closed
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if msab + mid * mid < 0.0:
            lo = mid
        else:
            hi = mid
    k_max = lo
    if abs(k_max - k_closed) > max(1e-6, 10.0 * tol):
        raise ArithmeticError(
            f"k_max bisection ({k_max}) disagrees with closed form ({k_closed})"
        )
    return k_max


def stability_report(sys: BilinearSystem, k=0.0, max_kron_n=None) -> StabilityReport:
    """Compute Hurwitz and mean-square stability spectra plus the largest
    feasible control bound.

    Dense path only: n is capped (default 60, override via max_kron_n or the
    BILBT_MAX_KRON_N environment variable).  For larger systems the
    fixed-point Lyapunov solver doubles as an implicit stability witness:
    it contracts exactly when the mean-square abscissa is negative.
    """
    if k < 0:
        raise ValueError(f"control bound k must be nonnegative, got {k}")
    alpha = kronecker.spectral_abscissa(sys.A)
    msab = kronecker.ms_abscissa(sys.A, sys.N, max_kron_n=max_kron_n)
    perturbed = perturbed_ms_abscissa(sys, k, max_kron_n=max_kron_n)
    k_max = _bisect_k_max(msab)
    return StabilityReport(
        hurwitz=alpha < 0.0,
        spectral_abscissa_A=alpha,
        ms_abscissa=msab,
        k=float(k),
        perturbed_ms_abscissa=perturbed,
        k_max_estimate=k_max,
    )


def rescale(sys: BilinearSystem, gamma) -> BilinearSystem:
    """Divide B and every N_i by gamma > 0.

    Driving the rescaled system with u~ = gamma * u reproduces the original
    state trajectory, so a large gamma trades smaller coupling matrices
    against a tighter admissible control bound.
    """
    gamma = float(gamma)
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return BilinearSystem(
        A=sys.A, B=sys.B / gamma, N=tuple(Ni / gamma for Ni in sys.N),
        C=sys.C, n=sys.n, m=sys.m, p=sys.p,
    )


def transform(sys: BilinearSystem, T, T_inv=None, cond_cap=DEFAULT_COND_CAP) -> BilinearSystem:
    """Similarity transform x^ = T x: A^ = T A T^-1, B^ = T B, C^ = C T^-1,
    N_i^ = T N_i T^-1.  The input-output map is unchanged.
    """
    T = np.asarray(T, dtype=float)
    if T.shape != (sys.n, sys.n):
        raise ValueError(f"T has shape {T.shape}, expected ({sys.n}, {sys.n})")
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > cond_cap:
        raise ValueError(
            f"transformation condition number {cond:.3e} exceeds cap {cond_cap:.1e}"
        )
    if T_inv is None:
        T_inv = np.linalg.inv(T)
    else:
        T_inv = np.asarray(T_inv, dtype=float)
    return BilinearSystem(
        A=T @ sys.A @ T_inv,
        B=T @ sys.B,
        N=tuple(T @ Ni @ T_inv for Ni in sys.N),
        C=sys.C @ T_inv,
        n=sys.n, m=sys.m, p=sys.p,
    )


@dataclass(frozen=True)
class SystemPartition:
    """Leading/trailing block views of a system split at order r."""

    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    N11: tuple
    N12: tuple
    N21: tuple
    N22: tuple
    r: int

    def leading_system(self) -> BilinearSystem:
        return BilinearSystem.from_matrices(self.A11, self.B1, self.N11, self.C1)

    def reassemble(self) -> BilinearSystem:
        A = np.block([[self.A11, self.A12], [self.A21, self.A22]])
        B = np.vstack([self.B1, self.B2])
        C = np.hstack([self.C1, self.C2])
        N = tuple(
            np.block([[n11, n12], [n21, n22]])
            for n11, n12, n21, n22 in zip(self.N11, self.N12, self.N21, self.N22)
        )
        return BilinearSystem.from_matrices(A, B, N, C)


def partition(sys: BilinearSystem, r) -> SystemPartition:
    """Split all coefficients into blocks of size r and n - r."""
    r = int(r)
    if not 1 <= r < sys.n:
        raise ValueError(f"r={r} out of range [1, {sys.n - 1}]")
    A, B, C = sys.A, sys.B, sys.C
    return SystemPartition(
        A11=A[:r, :r], A12=A[:r, r:], A21=A[r:, :r], A22=A[r:, r:],
        B1=B[:r, :], B2=B[r:, :],
        C1=C[:, :r], C2=C[:, r:],
        N11=tuple(Ni[:r, :r] for Ni in sys.N),
        N12=tuple(Ni[:r, r:] for Ni in sys.N),
        N21=tuple(Ni[r:, :r] for Ni in sys.N),
        N22=tuple(Ni[r:, r:] for Ni in sys.N),
        r=r,
    )


class SystemFormatError(ValueError):
    """System file is structurally malformed (not a semantic validation failure)."""


def system_to_dict(sys: BilinearSystem) -> dict:
    return {
        "n": int(sys.n), "m": int(sys.m), "p": int(sys.p),
        "A": sys.A.tolist(), "B": sys.B.tolist(),
        "N": [Ni.tolist() for Ni in sys.N], "C": sys.C.tolist(),
    }


def system_from_dict(data: dict) -> BilinearSystem:
    try:
        n, m, p = int(data["n"]), int(data["m"]), int(data["p"])
        A = np.array(data["A"], dtype=float)
        B = np.array(data["B"], dtype=float)
        N = tuple(np.array(Ni, dtype=float) for Ni in data["N"])
        C = np.array(data["C"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise SystemFormatError(f"malformed system object: {exc}") from exc
    for name, mat in (("A", A), ("B", B), ("C", C)) + tuple(
        (f"N[{i}]", Ni) for i, Ni in enumerate(N)
    ):
        if mat.ndim != 2:
            raise SystemFormatError(f"{name} is not a 2-d array")
    return BilinearSystem(A=A, B=B, N=N, C=C, n=n, m=m, p=p)


def save_system(sys: BilinearSystem, path):
    """Write the system as JSON; doubles use the shortest round-trip decimal form."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(system_to_dict(sys), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_system(path) -> BilinearSystem:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise SystemFormatError("system file must contain a JSON object")
    return system_from_dict(data)
