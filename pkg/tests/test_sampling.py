import numpy as np
import pytest
from scipy import stats

from hessrec.matcore import numerical_rank, schatten_norm
from hessrec.sampling import (
    FunctionOracle,
    MeasurementError,
    MeasurementSet,
    build_measurement_set,
    builtin_function,
    instance_from_basis,
    make_instance,
    measure_exact,
    measure_fd,
    sample_sphere,
    splitmix64,
)


# ---------------------------------------------------------------------------
# sphere sampling


def test_sample_sphere_unit_norm():
    rng = np.random.default_rng(0)
    for n in (2, 5, 17):
        u = sample_sphere(n, rng)
        assert abs(np.linalg.norm(u) - 1.0) <= 1e-12


def test_sample_sphere_needs_n_ge_2():
    with pytest.raises(ValueError):
        sample_sphere(1, np.random.default_rng(0))


def test_sphere_second_moment():
    # E[u_1^2] = 1/n within 5 standard errors
    rng = np.random.default_rng(1)
    n, N = 4, 100_000
    draws = np.array([sample_sphere(n, rng)[0] for _ in range(5000)])
    w = draws**2
    se = w.std(ddof=1) / np.sqrt(len(w))
    assert abs(w.mean() - 0.25) <= 5 * se
    del N


def test_sphere_fourth_moment():
    # E[u_1^4] = 3 / (n (n + 2)) = 0.2 at n = 3
    rng = np.random.default_rng(2)
    X = rng.standard_normal((100_000, 3))
    U = X / np.linalg.norm(X, axis=1)[:, None]
    w = U[:, 0] ** 4
    se = w.std(ddof=1) / np.sqrt(len(w))
    assert abs(w.mean() - 0.2) <= 5 * se


def test_sphere_odd_moment_vanishes():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((100_000, 5))
    U = X / np.linalg.norm(X, axis=1)[:, None]
    w = U[:, 0] ** 3
    se = w.std(ddof=1) / np.sqrt(len(w))
    assert abs(w.mean()) <= 5 * se


def test_sphere_rotation_invariance_ks():
    # first coordinate of Q u matches that of u in distribution
    rng = np.random.default_rng(4)
    n, N = 6, 100_000
    X = rng.standard_normal((N, n))
    U = X / np.linalg.norm(X, axis=1)[:, None]
    Q, _ = np.linalg.qr(np.random.default_rng(99).standard_normal((n, n)))
    Y = rng.standard_normal((N, n))
    W = Y / np.linalg.norm(Y, axis=1)[:, None]
    rotated = (W @ Q.T)[:, 0]
    assert stats.ks_2samp(U[:, 0], rotated).pvalue > 0.001


# ---------------------------------------------------------------------------
# exact and finite-difference probes


def test_measure_exact_identity():
    rng = np.random.default_rng(5)
    u = sample_sphere(4, rng)
    assert measure_exact(np.eye(4), u, u).b == pytest.approx(1.0, abs=1e-12)


def test_measure_exact_cross_term():
    H = np.zeros((3, 3))
    H[0, 1] = H[1, 0] = 1.0
    e1, e2 = np.eye(3)[0], np.eye(3)[1]
    assert measure_exact(H, e1, e2).b == pytest.approx(1.0, abs=1e-15)


def test_measure_exact_double_sum_oracle():
    rng = np.random.default_rng(6)
    H = rng.standard_normal((5, 5))
    u = sample_sphere(5, rng)
    v = sample_sphere(5, rng)
    expected = sum(u[i] * H[i, j] * v[j] for i in range(5) for j in range(5))
    assert measure_exact(H, u, v).b == pytest.approx(expected, abs=1e-12)


def test_measure_exact_dimension_mismatch():
    with pytest.raises(ValueError):
        measure_exact(np.eye(3), np.ones(2), np.ones(3))


def quadratic_oracle(H):
    return FunctionOracle(H.shape[0], lambda x: 0.5 * float(x @ (H @ x)))


@pytest.mark.parametrize("delta", [1e-3, 1e-1, 1.0])
def test_fd_exact_on_quadratics(delta):
    # the stencil is analytically exact for quadratics at any step size
    rng = np.random.default_rng(7)
    H = rng.standard_normal((6, 6))
    H = 0.5 * (H + H.T)  # a Hessian is symmetric
    u = sample_sphere(6, rng)
    v = sample_sphere(6, rng)
    x = np.zeros(6)
    b_fd = measure_fd(quadratic_oracle(H), x, u, v, delta).b
    b_ex = measure_exact(H, u, v).b
    assert abs(b_fd - b_ex) <= 1e-8 * (1.0 + abs(b_ex))


def test_fd_second_order_decay():
    # smooth non-polynomial target: halving delta divides the error by ~4
    def fn(x):
        return float(np.exp(x[0]) * np.sin(x[1]) + np.cos(x[0] * x[1]))

    def hess(x):
        h = np.zeros((4, 4))
        h[0, 0] = np.exp(x[0]) * np.sin(x[1]) - x[1] ** 2 * np.cos(x[0] * x[1])
        h[0, 1] = h[1, 0] = (np.exp(x[0]) * np.cos(x[1]) - np.sin(x[0] * x[1])
                             - x[0] * x[1] * np.cos(x[0] * x[1]))
        h[1, 1] = -np.exp(x[0]) * np.sin(x[1]) - x[0] ** 2 * np.cos(x[0] * x[1])
        return h

    rng = np.random.default_rng(8)
    x0 = np.array([0.3, 0.7, 0.0, 0.0])
    u = sample_sphere(4, rng)
    v = sample_sphere(4, rng)
    oracle = FunctionOracle(4, fn)
    exact = u @ hess(x0) @ v
    errs = [abs(measure_fd(oracle, x0, u, v, d).b - exact)
            for d in (0.2, 0.1, 0.05)]
    for big, small in zip(errs, errs[1:]):
        assert 0.15 <= small / big <= 0.55  # ratio ~1/4, accept up to ~1/2


def test_fd_constant_function_zero():
    oracle = FunctionOracle(3, lambda x: 7.5)
    rng = np.random.default_rng(9)
    b = measure_fd(oracle, np.zeros(3), sample_sphere(3, rng), sample_sphere(3, rng), 0.1).b
    assert b == 0.0


def test_fd_consumes_exactly_four_evaluations():
    oracle = quadratic_oracle(np.eye(4))
    rng = np.random.default_rng(10)
    measure_fd(oracle, np.zeros(4), sample_sphere(4, rng), sample_sphere(4, rng), 0.5)
    assert oracle.eval_count == 4


def test_fd_nonfinite_reported():
    oracle = FunctionOracle(2, lambda x: float("inf") if x[0] > 0 else 0.0)
    with pytest.raises(MeasurementError):
        measure_fd(oracle, np.zeros(2), np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.1)


def test_fd_requires_positive_delta():
    oracle = quadratic_oracle(np.eye(2))
    with pytest.raises(ValueError):
        measure_fd(oracle, np.zeros(2), np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.0)


# ---------------------------------------------------------------------------
# measurement sets


def test_build_requires_positive_M():
    rng = np.random.default_rng(11)
    inst = make_instance(5, 1, rng)
    with pytest.raises(ValueError):
        build_measurement_set(inst, 0, rng)


def test_build_replay_bit_identical():
    inst = make_instance(6, 2, np.random.default_rng(123))
    ms1 = build_measurement_set(inst, 25, np.random.default_rng(7))
    ms2 = build_measurement_set(inst, 25, np.random.default_rng(7))
    assert np.array_equal(ms1.U, ms2.U)
    assert np.array_equal(ms1.V, ms2.V)
    assert np.array_equal(ms1.b, ms2.b)


def test_build_stream_matches_sequential_draws():
    # pairs are drawn as u_1, v_1, u_2, v_2, ... from the generator
    inst = make_instance(5, 1, np.random.default_rng(42))
    ms = build_measurement_set(inst, 8, np.random.default_rng(11))
    rng = np.random.default_rng(11)
    for i in range(8):
        u = sample_sphere(5, rng)
        v = sample_sphere(5, rng)
        assert np.array_equal(ms.U[i], u)
        assert np.array_equal(ms.V[i], v)


def test_build_fd_matches_exact_on_quadratic():
    rng0 = np.random.default_rng(55)
    inst = make_instance(6, 2, rng0)
    ms_exact = build_measurement_set(inst, 30, np.random.default_rng(3))
    oracle = quadratic_oracle(inst.H)
    ms_fd = build_measurement_set(oracle, 30, np.random.default_rng(3),
                                  x=np.zeros(6), delta=1e-4)
    assert ms_fd.source == "fd" and ms_fd.delta == 1e-4
    assert np.abs(ms_fd.b - ms_exact.b).max() <= 1e-9
    assert oracle.eval_count == 4 * 30


def test_measurement_set_validation():
    with pytest.raises(ValueError):
        MeasurementSet(np.ones((2, 3)), np.ones((2, 3)), np.zeros(2))  # not unit
    U = np.eye(3)[:2]
    with pytest.raises(ValueError):
        MeasurementSet(U, U, np.array([np.inf, 0.0]))


def test_measurement_set_records():
    rng = np.random.default_rng(12)
    inst = make_instance(4, 1, rng)
    ms = build_measurement_set(inst, 5, rng)
    assert len(ms) == 5 and ms.n == 4
    rec = ms[2]
    assert rec.b == pytest.approx(float(rec.u @ inst.H @ rec.v), abs=1e-12)
    assert len(list(iter(ms))) == 5


def test_measurement_csv_round_trip(tmp_path):
    rng = np.random.default_rng(13)
    inst = make_instance(5, 2, rng)
    ms = build_measurement_set(inst, 9, rng)
    path = tmp_path / "ms.csv"
    ms.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "i,b," + ",".join(f"u_{k}" for k in range(5)) + "," + \
        ",".join(f"v_{k}" for k in range(5))
    back = MeasurementSet.from_csv(path)
    assert np.array_equal(back.U, ms.U)
    assert np.array_equal(back.V, ms.V)
    assert np.array_equal(back.b, ms.b)


# ---------------------------------------------------------------------------
# instances


def test_rank_one_instance_nuclear_norm():
    inst = make_instance(5, 1, np.random.default_rng(14), spectrum=(1.0,))
    assert schatten_norm(inst.H, "nuclear") == pytest.approx(1.0, abs=1e-10)
    # H = u u' for the single basis column
    u = inst.T.U[:, 0]
    assert np.abs(inst.H - np.outer(u, u)).max() <= 1e-12


def test_coherent_basis_accepted():
    # a basis containing a canonical coordinate vector is fine: no
    # incoherence requirement anywhere in the pipeline
    U = np.zeros((6, 2))
    U[0, 0] = 1.0  # e_1 itself
    U[3, 1] = 1.0
    inst = instance_from_basis(U, np.array([1.0, -2.0]))
    assert inst.H[0, 0] == pytest.approx(1.0)
    assert numerical_rank(inst.H) == 2


def test_instance_invariants_random():
    rng = np.random.default_rng(15)
    for _ in range(50):
        n = int(rng.integers(3, 12))
        r = int(rng.integers(1, min(n, 4) + 1))
        inst = make_instance(n, r, rng)
        H = inst.H
        assert np.linalg.norm(H - H.T) <= 1e-12 * np.linalg.norm(H)
        assert numerical_rank(H, tol=1e-8) == r
        # column space of H is spanned by T.U
        proj = inst.T.p_u
        assert np.linalg.norm(H - proj @ H) <= 1e-10 * np.linalg.norm(H)


def test_instance_zero_spectrum_rejected():
    with pytest.raises(ValueError):
        make_instance(5, 2, np.random.default_rng(16), spectrum=(1.0, 0.0))


def test_instance_rank_bounds():
    with pytest.raises(ValueError):
        make_instance(4, 5, np.random.default_rng(17))


# ---------------------------------------------------------------------------
# builtin oracles


def test_quadratic_builtin_hessian_is_instance_matrix():
    oracle = builtin_function("quadratic_lowrank", 6, r=2,
                              rng=np.random.default_rng(18))
    H = oracle.hessian(np.zeros(6))
    assert np.array_equal(H, oracle.instance.H)
    # stencil agrees with the analytic Hessian
    rng = np.random.default_rng(19)
    u = sample_sphere(6, rng)
    v = sample_sphere(6, rng)
    b = measure_fd(oracle, np.zeros(6), u, v, 1.0).b
    assert b == pytest.approx(float(u @ H @ v), abs=1e-10)


def test_logistic_builtin_rank_bound():
    oracle = builtin_function("logistic_composite", 10, r=2,
                              rng=np.random.default_rng(20))
    x = np.random.default_rng(21).standard_normal(10)
    H = oracle.hessian(x)
    assert numerical_rank(H, tol=1e-10) <= 2
    # stencil matches the analytic Hessian up to O(delta^2)
    rng = np.random.default_rng(22)
    u = sample_sphere(10, rng)
    v = sample_sphere(10, rng)
    b = measure_fd(oracle, x, u, v, 1e-4).b
    assert b == pytest.approx(float(u @ H @ v), abs=1e-6)


def test_ridge_builtin_identity_shift():
    eps = 1e-3
    oracle = builtin_function("ridge_composite", 8, r=3,
                              rng=np.random.default_rng(23), ridge_eps=eps)
    x = np.random.default_rng(24).standard_normal(8)
    H = oracle.hessian(x)
    W = oracle.weights
    low_rank_part = H - eps * np.eye(8)
    # distance from the rank-r part is exactly the ridge shift
    assert schatten_norm(H - low_rank_part, "operator") == pytest.approx(eps, rel=1e-10)
    assert numerical_rank(low_rank_part, tol=1e-10) <= 3
    assert np.linalg.norm(W @ x) > 0  # weights actually used


def test_builtin_unknown_name():
    with pytest.raises(ValueError):
        builtin_function("cubic_界", 5, r=1)


def test_oracle_determinism_and_count():
    oracle = builtin_function("logistic_composite", 5, r=2,
                              rng=np.random.default_rng(25))
    x = np.ones(5)
    v1 = oracle(x)
    v2 = oracle(x)
    assert v1 == v2
    assert oracle.eval_count == 2
    clone = oracle.clone()
    assert clone.eval_count == 0
    assert clone(x) == v1


def test_splitmix64_known_values():
    # reference values from the SplitMix64 specification (seed 1234567)
    seq = []
    state = 1234567
    for _ in range(3):
        seq.append(splitmix64(state))
        state += 1
    assert seq[0] == splitmix64(1234567)
    assert len({*seq}) == 3
    assert all(0 <= s < 2**64 for s in seq)
