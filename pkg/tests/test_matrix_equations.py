import numpy as np
import pytest
from scipy.linalg import solve_continuous_lyapunov

from bilbt import (
    BilinearSystem,
    ConvergenceError,
    GeneralizedLyapunovProblem,
    MeanSquareInstabilityError,
    RiccatiInequalityProblem,
    check_lmi_feasibility,
    solve_generalized_lyapunov,
    solve_type2_riccati,
)

from conftest import make_random_system


def kron_oracle(M, N_list, RHS, side):
    """Independent dense oracle: vec(X) = (Kronecker sum)^-1 vec(RHS)."""
    n = M.shape[0]
    K = np.kron(np.eye(n), M) + np.kron(M, np.eye(n))
    for Ni in N_list:
        K += np.kron(Ni, Ni)
    if side == "observability":
        K = K.T
    return np.linalg.solve(K, RHS.reshape(-1, order="F")).reshape((n, n), order="F")


def test_scalar_reachability_closed_form(scalar_sys):
    # a p + p a + n1^2 p = -b^2  =>  p = 1 / 1.75 = 4/7
    prob = GeneralizedLyapunovProblem(M=scalar_sys.A, N=scalar_sys.N,
                                      RHS=-scalar_sys.B @ scalar_sys.B.T)
    for method in ("kronecker_direct", "fixed_point"):
        X, diag = solve_generalized_lyapunov(prob, method=method)
        assert X[0, 0] == pytest.approx(4.0 / 7.0, abs=1e-10)
        assert diag.method == method
        assert diag.residual_norm < 1e-10 if method == "kronecker_direct" else 1e-8


def test_linear_case_matches_scipy_and_oracle():
    sys = make_random_system(21, n=6, m=2)
    N0 = [np.zeros((6, 6))] * 2
    RHS = -sys.B @ sys.B.T
    prob = GeneralizedLyapunovProblem(M=sys.A, N=tuple(N0), RHS=RHS)
    X, _ = solve_generalized_lyapunov(prob)
    scipy_X = solve_continuous_lyapunov(sys.A, RHS)
    oracle_X = kron_oracle(sys.A, N0, RHS, "reachability")
    assert np.allclose(X, scipy_X, atol=1e-10)
    assert np.allclose(X, oracle_X, atol=1e-10)


def test_zero_rhs_gives_zero():
    sys = make_random_system(22, n=4)
    prob = GeneralizedLyapunovProblem(M=sys.A, N=sys.N, RHS=np.zeros((4, 4)))
    X, diag = solve_generalized_lyapunov(prob)
    assert np.allclose(X, 0.0, atol=1e-14)
    assert diag.residual_norm == 0.0


def test_methods_agree_on_random_systems():
    for seed in range(5):
        n = 3 + 3 * seed
        sys = make_random_system(100 + seed, n=n, m=2)
        RHS = -sys.B @ sys.B.T
        prob = GeneralizedLyapunovProblem(M=sys.A, N=sys.N, RHS=RHS)
        X_k, _ = solve_generalized_lyapunov(prob, method="kronecker_direct")
        X_f, _ = solve_generalized_lyapunov(prob, method="fixed_point")
        assert np.linalg.norm(X_k - X_f) / np.linalg.norm(X_k) < 1e-7


def test_solutions_match_kron_oracle():
    for seed in range(4):
        sys = make_random_system(200 + seed, n=5, m=1, p=2)
        for side, RHS in (("reachability", -sys.B @ sys.B.T),
                          ("observability", -sys.C.T @ sys.C)):
            prob = GeneralizedLyapunovProblem(M=sys.A, N=sys.N, RHS=RHS, side=side)
            X, diag = solve_generalized_lyapunov(prob, method="fixed_point")
            oracle = kron_oracle(sys.A, sys.N, RHS, side)
            assert np.linalg.norm(X - oracle) / np.linalg.norm(oracle) < 1e-8
            assert diag.definiteness_margin > -1e-10


def test_observability_solution_definite_when_observable():
    for seed in range(3):
        sys = make_random_system(300 + seed, n=4, p=2)
        prob = GeneralizedLyapunovProblem(M=sys.A, N=sys.N,
                                          RHS=-sys.C.T @ sys.C,
                                          side="observability")
        Q, diag = solve_generalized_lyapunov(prob)
        assert diag.residual_norm <= 1e-10
        assert np.linalg.eigvalsh(Q).min() > 0.0


def test_unstable_pair_detected():
    # msab = -2 + 4 > 0: the coupling sweep must diverge
    prob = GeneralizedLyapunovProblem(M=np.array([[-1.0]]),
                                      N=(np.array([[2.0]]),),
                                      RHS=-np.ones((1, 1)))
    with pytest.raises((MeanSquareInstabilityError, ConvergenceError)):
        solve_generalized_lyapunov(prob, method="fixed_point")


def test_asymmetric_rhs_rejected():
    with pytest.raises(ValueError, match="symmetric"):
        GeneralizedLyapunovProblem(M=-np.eye(2), N=(np.zeros((2, 2)),),
                                   RHS=np.array([[0.0, 1.0], [0.0, 0.0]]))


# --- the control-bounded inequality ---------------------------------------


def riccati_scalar_roots(a, n1, b, k, delta):
    """Closed form for the scalar slacked equality
    x^2 b^2 - c0 x + delta = 0 with c0 = -(2(a + k^2/2) + n1^2)."""
    c0 = -(2.0 * (a + 0.5 * k * k) + n1 * n1)
    disc = np.sqrt(c0 * c0 - 4.0 * delta * b * b)
    return ((c0 - disc) / (2.0 * b * b), (c0 + disc) / (2.0 * b * b))


def test_scalar_riccati_maximal_root(scalar_sys):
    delta = 1e-9
    prob = RiccatiInequalityProblem(
        A_shifted=scalar_sys.A + 0.5 * np.eye(1), N=scalar_sys.N,
        B=scalar_sys.B, delta=delta)
    X, diag, delta_used = solve_type2_riccati(prob)
    _, x_max = riccati_scalar_roots(-1.0, 0.5, 1.0, 1.0, delta_used)
    assert X[0, 0] == pytest.approx(x_max, rel=1e-9)
    assert X[0, 0] == pytest.approx(0.75, abs=1e-5)
    assert 1.0 / X[0, 0] == pytest.approx(4.0 / 3.0, abs=1e-5)
    assert diag.definiteness_margin > 0.0


def test_riccati_linear_case_recovers_gramian():
    # k = 0, no coupling, delta -> 0: P = X^-1 equals the plain Gramian
    sys = make_random_system(400, n=5, m=2)
    N0 = tuple(np.zeros((5, 5)) for _ in range(2))
    delta = 1e-9 * np.linalg.norm(sys.B @ sys.B.T, 2)
    prob = RiccatiInequalityProblem(A_shifted=sys.A, N=N0, B=sys.B, delta=delta)
    X, _, _ = solve_type2_riccati(prob)
    P = np.linalg.inv(X)
    P_lin = solve_continuous_lyapunov(sys.A, -sys.B @ sys.B.T)
    assert np.linalg.norm(P - P_lin) / np.linalg.norm(P_lin) < 1e-6


def test_riccati_zero_input_feasible(scalar_sys):
    prob = RiccatiInequalityProblem(A_shifted=scalar_sys.A + 0.5 * np.eye(1),
                                    N=scalar_sys.N, B=np.zeros((1, 1)),
                                    delta=1e-6)
    X, diag, _ = solve_type2_riccati(prob)
    assert X[0, 0] > 0.0
    slack = 2.0 * (-0.5) * X[0, 0] + 0.25 * X[0, 0]
    assert slack <= 0.0


def test_riccati_unstable_shift_raises(scalar_sys):
    # k = 2: perturbed abscissa -1.75 + 4 > 0
    A_s = scalar_sys.A + 2.0 * np.eye(1)
    prob = RiccatiInequalityProblem(A_shifted=A_s, N=scalar_sys.N,
                                    B=scalar_sys.B, delta=1e-6)
    from bilbt import RiccatiInfeasibleError
    with pytest.raises(RiccatiInfeasibleError):
        solve_type2_riccati(prob)


def test_riccati_delta_continuation():
    # delta above the critical level: the solver must halve it and still certify
    sys = make_random_system(401, n=3)
    prob = RiccatiInequalityProblem(A_shifted=sys.A, N=sys.N, B=sys.B, delta=10.0)
    X, diag, delta_used = solve_type2_riccati(prob)
    assert delta_used < 10.0
    assert np.linalg.eigvalsh(X).min() > 0.0
    rep = check_lmi_feasibility(
        BilinearSystem.from_matrices(sys.A, sys.B, sys.N, sys.C), 0.0,
        np.linalg.inv(X), X=X)
    assert rep.feasible


def test_lmi_certificate_from_solver(scalar_sys):
    from bilbt import type2_gramians
    pair = type2_gramians(scalar_sys, 1.0)
    rep = check_lmi_feasibility(scalar_sys, 1.0, pair.P)
    assert rep.feasible
    assert rep.largest_eigenvalue <= 1e-8


def test_lmi_shrunk_p_infeasible(scalar_sys):
    # scalar feasibility requires X = 1/P <= 0.75; halving P doubles X past it
    from bilbt import type2_gramians
    pair = type2_gramians(scalar_sys, 1.0)
    rep = check_lmi_feasibility(scalar_sys, 1.0, pair.P / 2.0)
    assert not rep.feasible
    assert rep.largest_eigenvalue > 1e-8


def test_lmi_block_diagonal_case():
    # B = 0, N = 0, k = 0: the block matrix is block-diagonal negative
    A = np.array([[-1.0, 0.2], [0.0, -2.0]])
    sys = BilinearSystem.from_matrices(A, np.zeros((2, 1)),
                                       [np.zeros((2, 2))], [[1.0, 0.0]])
    rep = check_lmi_feasibility(sys, 0.0, np.eye(2))
    assert rep.feasible


def test_minimal_trace_monotone_in_k_scalar_family():
    # closed-form family: the minimal-trace feasible X (smaller root of the
    # slacked equality) is nondecreasing in k; the solver tracks the maximal
    # root, which the closed form also pins down
    delta = 1e-8
    prev_min = -np.inf
    for k in (0.0, 0.4, 0.8, 1.0):
        x_min, x_max = riccati_scalar_roots(-1.0, 0.5, 1.0, k, delta)
        assert x_min >= prev_min
        prev_min = x_min
        prob = RiccatiInequalityProblem(
            A_shifted=np.array([[-1.0 + 0.5 * k * k]]),
            N=(np.array([[0.5]]),), B=np.array([[1.0]]), delta=delta)
        X, _, delta_used = solve_type2_riccati(prob)
        _, x_max_used = riccati_scalar_roots(-1.0, 0.5, 1.0, k, delta_used)
        assert X[0, 0] == pytest.approx(x_max_used, rel=1e-8)


def test_minimal_trace_monotone_in_k_diagonal_family():
    # two decoupled scalar channels: Loewner monotonicity reduces entrywise
    delta = 1e-8
    diag_a = (-1.0, -2.0)
    diag_n = (0.5, 0.3)
    prev = np.array([-np.inf, -np.inf])
    for k in (0.0, 0.5, 1.0):
        x_min = np.array([riccati_scalar_roots(a, n1, 1.0, k, delta)[0]
                          for a, n1 in zip(diag_a, diag_n)])
        assert np.all(x_min >= prev - 1e-15)
        prev = x_min
