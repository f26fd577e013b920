import numpy as np
import pytest

from hsifusion import solver as S
from hsifusion.degradation import DegradationModel, delta_kernel, gaussian_kernel, simulate_observations
from hsifusion.errors import DimensionError, NonFiniteError, ParameterError
from hsifusion.ltnn import ltnn_prox, ltnn_value
from hsifusion.patches import ClusterPartition, gather_groups, learn_partition
from hsifusion.solver import (
    FusionProblem, SolverConfig, SolverState, build_q3, kkt_residuals, read_log_csv, solve, update_C,
    update_G, update_H, update_multipliers, write_log_csv,
)
from hsifusion.subspace import reconstruct
from hsifusion.synthetic import block_srf, synthetic_scene
from hsifusion.tensor import fold, grad, grad_adjoint, mode_n_product, unfold

from conftest import rel_err
from oracles import bs_matrix


def small_problem(rng, w=8, h=8, n_bands=6, n_atoms=2, n_msi=2, d=2, k=3):
    srf = rng.random((n_msi, n_bands))
    srf /= srf.sum(axis=1, keepdims=True)
    model = DegradationModel(gaussian_kernel(k, 1.0), d, srf)
    basis = np.linalg.qr(rng.standard_normal((n_bands, n_atoms)))[0]
    x = rng.standard_normal((w // d, h // d, n_bands))
    y = rng.standard_normal((w, h, n_msi))
    return FusionProblem(x, y, basis, model)


def random_state(rng, shape):
    r = lambda: rng.standard_normal(shape)
    return SolverState(C=r(), G=[r() for _ in range(3)], H=[r() for _ in range(3)],
                       M=[r() for _ in range(3)], V=[r() for _ in range(3)])


def zero_state(shape):
    z = np.zeros(shape)
    return SolverState(C=z.copy(), G=[z.copy()] * 3, H=[z.copy()] * 3, M=[z.copy()] * 3, V=[z.copy()] * 3)


def test_config_validation():
    SolverConfig()
    for bad in (dict(mu=0), dict(alpha=(1, 2)), dict(alpha=(-1, 0, 0)), dict(tol=0), dict(eps=0),
                dict(n_groups=0), dict(sylvester="qr"), dict(gradient_domain="other")):
        with pytest.raises(ParameterError):
            SolverConfig(**bad)
    with pytest.raises(NotImplementedError):
        SolverConfig(gradient_domain="group")


def test_presets():
    cfg = SolverConfig.preset("pavia")
    assert cfg.alpha == (0.3, 0.03, 0.009) and cfg.mu == 0.05
    assert cfg.n_atoms == 10 and cfg.n_groups == 400
    assert SolverConfig.preset("balloons", n_atoms=4).mu == 0.09


def test_problem_dimension_checks(rng):
    p = small_problem(rng)
    with pytest.raises(DimensionError):
        FusionProblem(p.x[:3], p.y, p.basis, p.model)
    with pytest.raises(DimensionError):
        FusionProblem(p.x, p.y[:, :, :1], p.basis, p.model)


def test_build_q3_dense_oracle(rng):
    p = small_problem(rng)
    st = random_state(rng, p.coeff_shape)
    mu = 0.3
    bs = bs_matrix(p.model.kernel, 8, 8, 2)
    fr = p.model.srf @ p.basis
    expect = fr.T @ unfold(p.y, 3) + p.basis.T @ unfold(p.x, 3) @ bs.T
    expect = expect + sum(mu * unfold(g, 3) + 0.5 * unfold(m, 3) for g, m in zip(st.G, st.M))
    assert rel_err(build_q3(p, st, mu), expect) <= 1e-12


def test_build_q3_trivial_and_additive(rng):
    p = small_problem(rng)
    zp = FusionProblem(np.zeros_like(p.x), np.zeros_like(p.y), p.basis, p.model)
    st = random_state(rng, p.coeff_shape)
    st.M = [np.zeros(p.coeff_shape)] * 3
    np.testing.assert_array_equal(build_q3(zp, st, 0.0), 0)
    a, b = random_state(rng, p.coeff_shape), random_state(rng, p.coeff_shape)
    ab = random_state(rng, p.coeff_shape)
    ab.G = [ga + gb for ga, gb in zip(a.G, b.G)]
    ab.M = [ma + mb for ma, mb in zip(a.M, b.M)]
    lhs = build_q3(zp, ab, 0.2)
    np.testing.assert_allclose(lhs, build_q3(zp, a, 0.2) + build_q3(zp, b, 0.2), atol=1e-12)


def test_c_update_solves_subproblem(rng):
    p = small_problem(rng)
    st = random_state(rng, p.coeff_shape)
    cfg = SolverConfig(mu=0.2, n_atoms=2)
    c = update_C(p, st, cfg)
    rx, ry = p.data_residuals(c)
    from hsifusion.subspace import project
    g = project(p.op.adjoint(rx), p.basis) + mode_n_product(ry, p.fr.T, 3)
    g = g - 0.5 * sum(st.M) - cfg.mu * sum(gt - c for gt in st.G)
    assert np.linalg.norm(g) <= 1e-8 * np.linalg.norm(build_q3(p, st, cfg.mu))


def normal_operator(g, mode):
    return g + grad_adjoint(grad(g, mode), mode)


@pytest.mark.parametrize("shape", [(6, 5, 4), (1, 7, 3), (4, 4, 1)])
def test_g_update_normal_equation(rng, shape):
    st = random_state(rng, shape)
    cfg = SolverConfig(mu=0.37)
    new = update_G(st, cfg)
    for t, (g, h, m, v) in enumerate(zip(new, st.H, st.M, st.V), start=1):
        rhs = st.C - m / (2 * cfg.mu) + grad_adjoint(h + v / (2 * cfg.mu), t)
        assert rel_err(normal_operator(g, t), rhs) <= 1e-10


def test_g_update_fixed_point_and_singleton(rng):
    c = rng.standard_normal((5, 4, 3))
    st = SolverState.feasible_start(c)
    for g in update_G(st, SolverConfig()):
        assert rel_err(g, c) <= 1e-10
    st = random_state(rng, (1, 4, 3))
    cfg = SolverConfig(mu=0.5)
    g1 = update_G(st, cfg)[0]
    np.testing.assert_allclose(g1, st.C - st.M[0] / (2 * cfg.mu) + grad_adjoint(st.H[0] + st.V[0] / (2 * cfg.mu), 1))


def test_multiplier_updates(rng):
    c = rng.standard_normal((4, 4, 2))
    st = SolverState.feasible_start(c)
    st.M = [rng.standard_normal(c.shape) for _ in range(3)]
    st.V = [rng.standard_normal(c.shape) for _ in range(3)]
    m, v = update_multipliers(st, 0.7)
    for a, b in zip(m + v, st.M + st.V):
        np.testing.assert_array_equal(a, b)
    st = random_state(rng, (4, 4, 2))
    m, v = update_multipliers(st, 0.0)
    for a, b in zip(m + v, st.M + st.V):
        np.testing.assert_array_equal(a, b)
    st.M = [np.zeros((4, 4, 2))] * 3
    st.V = [np.zeros((4, 4, 2))] * 3
    mu = 0.25
    m, v = update_multipliers(st, mu)
    for t in range(3):
        np.testing.assert_array_equal(m[t], 2 * mu * (st.G[t] - st.C))
        np.testing.assert_array_equal(v[t], 2 * mu * (st.H[t] - grad(st.G[t], t + 1)))


def test_update_h_alpha_zero_is_exact(rng):
    st = random_state(rng, (8, 8, 2))
    part = ClusterPartition((8, 8, 2), 4, np.array([0, 1, 0, 1]))
    cfg = SolverConfig(alpha=(0, 0, 0), mu=0.3)
    for t, h in enumerate(update_H(st, part, cfg), start=1):
        np.testing.assert_array_equal(h, grad(st.G[t - 1], t) - st.V[t - 1] / 0.6)


def test_update_h_single_group(rng):
    st = random_state(rng, (4, 4, 3))
    part = ClusterPartition((4, 4, 3), 4, np.zeros(1, dtype=int))
    cfg = SolverConfig(alpha=(0.2, 0.1, 0.05), mu=0.5, eps=1e-2)
    out = update_H(st, part, cfg)
    for t in range(3):
        a = grad(st.G[t], t + 1) - st.V[t] / (2 * cfg.mu)
        g = gather_groups(a, part)[0]
        expect = ltnn_prox(g, cfg.alpha[t] / (2 * cfg.mu), cfg.eps)
        np.testing.assert_allclose(gather_groups(out[t], part)[0], expect, atol=1e-12)


def test_update_h_groupwise_objective(rng):
    st = random_state(rng, (8, 8, 3))
    part = learn_partition(rng.standard_normal((8, 8, 2)), 3, 2, seed=0)
    cfg = SolverConfig(alpha=(0.3, 0.2, 0.4), mu=0.4, eps=1e-2)
    out = update_H(st, part, cfg)
    for t in range(3):
        a = grad(st.G[t], t + 1) - st.V[t] / (2 * cfg.mu)
        for ga, gh in zip(gather_groups(a, part), gather_groups(out[t], part)):
            obj = lambda h: cfg.mu * np.sum((h - ga) ** 2) + cfg.alpha[t] * ltnn_value(h, cfg.eps)
            assert obj(gh) <= obj(ga) + 1e-10


def test_kkt_zero_state(rng):
    p = small_problem(rng)
    zp = FusionProblem(np.zeros_like(p.x), np.zeros_like(p.y), p.basis, p.model)
    k = kkt_residuals(zero_state(p.coeff_shape), zp)
    assert k.max() == 0.0


def test_kkt_constructed_stationary_state(rng):
    p = small_problem(rng, n_atoms=2, n_msi=3)
    shape = p.coeff_shape
    c = rng.standard_normal(shape)
    v = [rng.standard_normal(shape) for _ in range(3)]
    m = [grad_adjoint(vt, t) for t, vt in enumerate(v, start=1)]
    # put all of 0.5 * sum(M) into the MSI residual: (FR)^T r_y = s  with  r_y = FR k
    s = 0.5 * sum(m)
    k = fold(np.linalg.solve(p.fr.T @ p.fr, unfold(s, 3)), 3, shape)
    x = reconstruct(p.op.forward(c), p.basis)
    y = mode_n_product(c, p.fr, 3) - mode_n_product(k, p.fr, 3)
    prob = FusionProblem(x, y, p.basis, p.model)
    st = SolverState(C=c, G=[c.copy()] * 3, H=[grad(c, t) for t in (1, 2, 3)], M=m, V=v)
    res = kkt_residuals(st, prob)
    assert res.max() <= 1e-8
    assert all(r >= 0 for r in (*res.r_g, *res.r_h, res.r_stat, *res.r_mult))
    st.M = [mt + 0.1 for mt in m]
    assert kkt_residuals(st, prob).r_stat > 1e-3


def dense_least_squares(x, y, basis, model):
    w, h = y.shape[:2]
    bs = bs_matrix(model.kernel, w, h, model.factor)
    fr = model.srf @ basis
    lcount = basis.shape[1]
    # vec_F(R C BS) = ((BS)^T kron R) vec_F(C);  vec_F(FR C) = (I kron FR) vec_F(C)
    a = np.vstack([np.kron(bs.T, basis), np.kron(np.eye(w * h), fr)])
    b = np.concatenate([unfold(x, 3).ravel(order="F"), unfold(y, 3).ravel(order="F")])
    c3 = np.linalg.lstsq(a, b, rcond=None)[0].reshape(lcount, w * h, order="F")
    return fold(c3, 3, (w, h, lcount))


def test_alpha_zero_reaches_least_squares(rng):
    z, basis, _ = synthetic_scene(8, 8, 6, 2, n_regions=4, seed=3)
    model = DegradationModel(gaussian_kernel(3, 1.0), 2, block_srf(3, 6))
    x, y = simulate_observations(z, model, 30, 30, seed=2)
    cfg = SolverConfig(alpha=(0, 0, 0), mu=0.01, n_atoms=2, n_groups=4, sqrt_q=2, tol=1e-13, max_iters=3000)
    res = solve(x, y, model, cfg)
    ls = dense_least_squares(x, y, res.basis, model)
    assert rel_err(res.state.C, ls) <= 1e-4


def test_consistency_fixture():
    z, basis, _ = synthetic_scene(16, 16, 8, 3, n_regions=6, seed=4)
    model = DegradationModel(delta_kernel(), 1, block_srf(4, 8))
    x, y = simulate_observations(z, model, None, None)
    np.testing.assert_allclose(x, z, atol=1e-15)
    cfg = SolverConfig(alpha=(1e-3, 1e-3, 1e-3), n_atoms=3, n_groups=4, sqrt_q=4, max_iters=10)
    res = solve(x, y, model, cfg)
    assert len(res.log) <= 10 and res.converged
    assert rel_err(res.z, z) <= 1e-3


def tiny_run(seed=0, **kw):
    z, _, _ = synthetic_scene(16, 16, 8, 3, n_regions=6, seed=seed)
    model = DegradationModel(gaussian_kernel(5, 1.5), 2, block_srf(4, 8))
    x, y = simulate_observations(z, model, 25, 30, seed=seed)
    cfg = SolverConfig(**{**dict(alpha=(1e-4,) * 3, n_atoms=3, n_groups=4, sqrt_q=4, max_iters=15), **kw})
    return solve(x, y, model, cfg)


def test_log_and_termination_contract():
    res = tiny_run(max_iters=6, tol=1e-12)
    assert [r.iter for r in res.log] == list(range(1, 7))
    assert not res.converged
    res = tiny_run(tol=1e-2, max_iters=50)
    assert res.converged and res.log[-1].rel_change <= 1e-2
    assert all(r.rel_change > 1e-2 for r in res.log[:-1])


def test_determinism():
    a, b = tiny_run(), tiny_run()
    assert a.log == b.log
    np.testing.assert_array_equal(a.z, b.z)


def test_callback_sees_each_iteration():
    seen = []
    z, _, _ = synthetic_scene(16, 16, 8, 3, n_regions=6, seed=0)
    model = DegradationModel(gaussian_kernel(5, 1.5), 2, block_srf(4, 8))
    x, y = simulate_observations(z, model, 25, 30)
    res = solve(x, y, model, SolverConfig(n_atoms=3, n_groups=4, max_iters=4, tol=1e-12),
                callback=lambda st: seen.append(st.iteration))
    assert seen == [1, 2, 3, 4] and len(res.log) == 4


def test_non_finite_abort(monkeypatch):
    monkeypatch.setattr(S, "ltnn_prox", lambda t, tau, eps: np.full_like(t, np.nan))
    with pytest.raises(NonFiniteError) as exc:
        tiny_run(alpha=(0.1, 0, 0))
    assert exc.value.iteration == 1 and exc.value.variable == "H"


def test_log_csv_roundtrip(tmp_path):
    res = tiny_run(max_iters=3, tol=1e-12)
    p = tmp_path / "conv.csv"
    write_log_csv(p, res.log)
    lines = p.read_text().splitlines()
    assert lines[0] == "iter,rel_change,feas_g1,feas_g2,feas_g3,feas_h1,feas_h2,feas_h3,data_fid"
    assert len(lines) == 4
    assert read_log_csv(p) == res.log


def test_regularizer_is_active_on_synthetic_fixture():
    from hsifusion.metrics import psnr
    z, _, _ = synthetic_scene(64, 64, 16, 4, n_regions=24, seed=0)
    model = DegradationModel(gaussian_kernel(7, 2.0), 4, block_srf(4, 16))
    x, y = simulate_observations(z, model, 20, 25, seed=1)
    base = dict(mu=0.05, n_atoms=4, n_groups=16, sqrt_q=4, eps=1.0, tol=1e-6, max_iters=400)
    plain = solve(x, y, model, SolverConfig(alpha=(0, 0, 0), **base))
    reg = solve(x, y, model, SolverConfig(alpha=(0.03, 0.03, 0.03), **base))
    assert psnr(z, reg.z)[0] - psnr(z, plain.z)[0] >= 0.2


def test_regularizer_value_closed_form(rng):
    from hsifusion.solver import regularizer_value
    part = ClusterPartition((8, 8, 3), 4, np.array([0, 1, 1, 1]))
    c = np.full((8, 8, 3), 2.0)
    # zero gradients: each group contributes min(K_n, L) * log(eps)
    expect = (0.5 + 0.25) * (1 * np.log(0.1) + 3 * np.log(0.1))
    assert regularizer_value(c, part, (0.5, 0.25, 0.0), 0.1) == pytest.approx(expect, rel=1e-12)
    c = rng.standard_normal((8, 8, 3))
    total = sum(a * sum(ltnn_value(g, 0.1) for g in gather_groups(grad(c, t), part))
                for t, a in zip((1, 2, 3), (0.5, 0.25, 0.1)))
    assert regularizer_value(c, part, (0.5, 0.25, 0.1), 0.1) == pytest.approx(total, rel=1e-12)
