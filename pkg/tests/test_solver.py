import numpy as np
import pytest

from tvgnwe.exceptions import (BoundsViolationError, DivergenceError, ShapeError,
                               UnsupportedScenarioError)
from tvgnwe.game import BoxSet, GameSpec, LocalCost, StaticConstraints, StaticNetwork
from tvgnwe.precondition import SolverParams, build_preconditioner, suggest_params
from tvgnwe.scenarios import (A1, A2, build_constrained_consensus, build_example1,
                              build_example2, build_example3)
from tvgnwe.solver import (AutoParams, ClosedFormBR, ExplicitParams, IterateState,
                           best_response_step, inclusion_check, initial_state, resolvent, run,
                           run_best_response, tv_prox_gnwe_step)


def small_consensus():
    return build_constrained_consensus(Nagents=6, n=2, seed=4, m=2)


def coupled_pair():
    """Example-2 costs plus the row x1 + x2 <= 2.

    By hand: x_i = (r_i + (x1 + x2)/2 - sigma/2) / 2 with x1 + x2 = 2 gives
    sigma = 1 and x = (0.75, 1.25).
    """
    costs = [LocalCost.quadratic([1.0]), LocalCost.quadratic([2.0])]
    return GameSpec(2, 1, 1, [BoxSet([-3.0], [3.0])] * 2, costs,
                    StaticConstraints([[1.0, 1.0]], [2.0]), StaticNetwork(A1))


# -- the step -----------------------------------------------------------------

def test_example2_a1_converges_from_origin():
    game = build_example2("A1")
    p = suggest_params(game, 0)
    s = initial_state(game)
    for _ in range(500):
        s, rep = tv_prox_gnwe_step(s, game, p)
    np.testing.assert_allclose(s.x, [1.25, 1.75], atol=1e-8)
    assert rep.fixed_point_residual < 1e-8


def test_fixed_point_is_invariant():
    game = build_example3()
    p = suggest_params(game, 60)
    s = IterateState(np.array([0.5, 0.5]), np.zeros(1), 60)
    new, rep = tv_prox_gnwe_step(s, game, p)
    np.testing.assert_allclose(new.x, s.x, atol=1e-12)
    np.testing.assert_allclose(new.sigma, s.sigma, atol=1e-12)
    assert rep.fixed_point_residual <= 1e-12
    assert new.k == 61


def test_scalar_recursion_oracle():
    game = GameSpec(1, 1, 0, [BoxSet([-1.0], [1.0])], [LocalCost.zero()],
                    StaticConstraints(np.zeros((0, 1)), np.zeros(0)), StaticNetwork([[1.0]]))
    delta, gamma = 0.8, 0.3
    p = SolverParams([delta], 1.0, gamma, [1.0], [1.0])
    s = initial_state(game, [5.0])
    x = 5.0
    for _ in range(6):
        s, _ = tv_prox_gnwe_step(s, game, p)
        lam = delta / (delta + 1)
        xt = min(max(lam * (x / delta + x), -1.0), 1.0)
        x = x + gamma * ((xt - x) / delta + (xt - x))
        assert s.x[0] == pytest.approx(x, abs=1e-14)


def test_coupled_pair_hand_solution():
    game = coupled_pair()
    tr = run(game, "auto", max_iters=3000, residual_tol=1e-13)
    np.testing.assert_allclose(tr.final.x, [0.75, 1.25], atol=1e-9)
    np.testing.assert_allclose(tr.final.sigma, [1.0], atol=1e-9)


def test_coupled_pair_grid_oracle():
    # brute force: minimise the fixed-point residual of
    # x = prox_f(A x - alpha C^T sigma), sigma = max(sigma + C x - c, 0)
    h = 0.025
    g = np.arange(0.0, 2.0 + h / 2, h)
    sg = np.arange(0.0, 2.0 + h / 2, h)
    X1, X2, S = np.meshgrid(g, g, sg, indexing="ij")
    z = 0.5 * (X1 + X2)
    p1 = np.clip((1.0 + z - 0.5 * S) / 2, -3, 3)
    p2 = np.clip((2.0 + z - 0.5 * S) / 2, -3, 3)
    ps = np.maximum(S + X1 + X2 - 2.0, 0.0)
    res = np.abs(p1 - X1) + np.abs(p2 - X2) + np.abs(ps - S)
    i = np.unravel_index(np.argmin(res), res.shape)
    grid_x = np.array([g[i[0]], g[i[1]]])
    tr = run(coupled_pair(), "auto", max_iters=3000, residual_tol=1e-13)
    np.testing.assert_allclose(tr.final.x, grid_x, atol=2 * h)


def test_agent_order_is_bitwise_irrelevant():
    game = small_consensus()
    p = suggest_params(game, 0)
    x0 = np.random.default_rng(1).uniform(game.lower, game.upper)
    s = initial_state(game, x0)
    a, _ = tv_prox_gnwe_step(s, game, p)
    b, _ = tv_prox_gnwe_step(s, game, p, order=list(reversed(range(game.N))))
    assert a.x.tobytes() == b.x.tobytes() and a.sigma.tobytes() == b.sigma.tobytes()


def test_resolvent_reads_old_state_only():
    game = small_consensus()
    p = suggest_params(game, 0)
    x0 = np.random.default_rng(2).uniform(game.lower, game.upper)
    s = initial_state(game, x0)
    xt, st = resolvent(s, game, p)
    new, _ = tv_prox_gnwe_step(s, game, p)
    assert np.array_equal(new.last_tilde[0], xt) and np.array_equal(new.last_tilde[1], st)
    assert new.origin[0] is s.x


def test_strict_step_raises_on_bad_params():
    game = build_example2("A1")
    p = suggest_params(game, 0).with_gamma(10.0)
    with pytest.raises(BoundsViolationError) as ei:
        tv_prox_gnwe_step(initial_state(game), game, p, strict=True)
    assert ei.value.k == 0 and not ei.value.report.ok


def test_step_divergence_error():
    game = build_example2("A1")
    p = SolverParams([1.0, 1.0], 1.0, 1e308, [0.5, 0.5], [0.5, 0.5])
    with pytest.raises(DivergenceError) as ei:
        tv_prox_gnwe_step(initial_state(game, [1e10, -1e10]), game, p)
    assert ei.value.k == 0


def test_initial_state_shape_check():
    with pytest.raises(ShapeError):
        initial_state(build_example2("A1"), [1.0])


# -- inclusion check ----------------------------------------------------------

def test_inclusion_holds_after_steps():
    game = small_consensus()
    p = suggest_params(game, 0)
    s = initial_state(game, np.random.default_rng(3).uniform(game.lower, game.upper))
    for k in range(20):
        p = suggest_params(game, k)
        s, _ = tv_prox_gnwe_step(s, game, p)
        res = inclusion_check(s, game, p, tol=1e-8)
        assert res, (k, res)


def test_inclusion_detects_corruption():
    game = coupled_pair()
    p = suggest_params(game, 0)
    s, _ = tv_prox_gnwe_step(initial_state(game, [0.2, 0.4]), game, p)
    xt, st = s.last_tilde
    assert np.all(np.abs(xt) < 3)
    bad = IterateState(s.x, s.sigma, s.k, (xt + np.array([0.1, 0.0]), st), s.origin)
    res = inclusion_check(bad, game, p, tol=1e-8)
    assert not res and res.primal_violation >= 0.05


def test_inclusion_dual_block_vacuous_without_rows():
    game = build_example2("A2")
    p = suggest_params(game, 0)
    s, _ = tv_prox_gnwe_step(initial_state(game), game, p)
    res = inclusion_check(s, game, p)
    assert res and res.dual_violation == 0.0


def test_inclusion_needs_tilde():
    game = build_example2("A2")
    with pytest.raises(ValueError):
        inclusion_check(initial_state(game), game, suggest_params(game, 0))


# -- best response ------------------------------------------------------------

def test_example1_period_two():
    game, br = build_example1()
    s = initial_state(game, [1.0, 1.0])
    for k in range(1, 101):
        s = best_response_step(s, br)
        expect = -1.0 if k % 2 else 1.0
        assert s.x.tolist() == [expect, expect]


def test_example1_origin_fixed():
    game, br = build_example1()
    s = initial_state(game, [0.0, 0.0])
    for _ in range(5):
        s = best_response_step(s, br)
    assert np.array_equal(s.x, [0.0, 0.0])


def test_example1_matches_equality_argmin(rng):
    game, br = build_example1()
    for _ in range(100):
        x = rng.normal(0, 10, 2)
        # 1-D argmin of a zero cost over {v : v + x_other = 0} is -x_other
        assert np.array_equal(br(x, 0), [-x[1], -x[0]])


def test_example2_best_response_closed_form(rng):
    for key, A in (("A1", A1), ("A2", A2)):
        br = ClosedFormBR(build_example2(key))
        for _ in range(20):
            x = rng.normal(0, 3, 2)
            np.testing.assert_allclose(br(x, 0), (np.array([1.0, 2.0]) + A @ x) / 2, atol=1e-15)


def test_example2_alternating_best_response_cycles_between_equilibria():
    game = build_example2("alt")
    tr = run_best_response(game, ClosedFormBR(game), max_iters=400, keep_iterates=True)
    xa1, xa2 = np.array([1.25, 1.75]), np.array([4 / 3, 11 / 6])
    even, odd = tr.iterates[-1][0], tr.iterates[-2][0]
    # 2-periodic orbit oracle: x_e = (r + A2 x_o)/2 and x_o = (r + A1 x_e)/2 (or swapped)
    r = np.array([1.0, 2.0])
    M = np.block([[np.eye(2), -A2 / 2], [-A1 / 2, np.eye(2)]])
    sol = np.linalg.solve(M, np.concatenate([r, r]) / 2)
    got = {tuple(np.round(even, 10)), tuple(np.round(odd, 10))}
    assert got == {tuple(np.round(sol[:2], 10)), tuple(np.round(sol[2:], 10))}
    for pt in (even, odd):
        assert np.all(pt >= xa1 - 1e-12) and np.all(pt <= xa2 + 1e-12)
    assert np.linalg.norm(even - odd) > 1e-2


def test_example3_best_response_projects():
    game = build_example3()
    br = ClosedFormBR(game)
    # at k >= 50 each agent is held to y >= -0.25 - x_other and to [-1, 1]
    x = np.array([-1.0, 0.5])
    z = game.adjacency(60) @ x
    out = br(x, 60)
    assert out[0] == max(z[0], -0.25 - x[1])
    assert out[1] == max(z[1], -0.25 - x[0])


def _scalar_game(seed):
    rng = np.random.default_rng(seed)
    N, M = int(rng.integers(3, 8)), int(rng.integers(1, 8))
    from tvgnwe.graph import generate_small_world
    A = generate_small_world(N, 1, 0.3, 0.1, rng)
    costs = [LocalCost.zero() if rng.random() < 0.5 else
             LocalCost.quadratic([rng.uniform(-1, 1)], rng.uniform(0.1, 2)) for _ in range(N)]
    C = rng.standard_normal((M, N)) * (rng.random((M, N)) < 0.6)
    return GameSpec(N, 1, M, [BoxSet([-2.0], [2.0])] * N, costs,
                    StaticConstraints(C, rng.uniform(0.5, 2, M)), StaticNetwork(A)), rng


def _feasible_point(game, rng):
    # each agent's own value lies in its interval, so the intervals are nonempty
    C, c = game.coupling(0)
    x = rng.uniform(-0.3, 0.3, game.N)
    while np.any(C @ x > c):
        x *= 0.5
    return x


def test_best_response_float_and_array_paths_agree():
    for seed in range(40):
        game, rng = _scalar_game(seed)
        fast, wide = ClosedFormBR(game), ClosedFormBR(game)
        wide.SMALL = -1
        for _ in range(5):
            x = _feasible_point(game, rng)
            np.testing.assert_allclose(fast(x, 0), wide(x, 0), rtol=0, atol=1e-12)
    # along a trajectory; BLAS may contract differently, so allow an ulp or two
    game = build_example3()
    fast, wide = ClosedFormBR(game), ClosedFormBR(game)
    wide.SMALL = -1
    x = np.array([-1.0, 0.5])
    for k in range(80):
        np.testing.assert_allclose(fast(x, k), wide(x, k), rtol=0, atol=4e-16)
        x = fast(x, k)


def test_best_response_interval_reference():
    # vectorised intervals against the per-agent route
    for seed in range(20):
        game, rng = _scalar_game(seed)
        br = ClosedFormBR(game)
        x = _feasible_point(game, rng)
        lo, hi = br.intervals(x, 0)
        for i in range(game.N):
            ref = br.interval(i, x, 0)
            assert lo[i] == pytest.approx(ref[0], abs=1e-12)
            assert hi[i] == pytest.approx(ref[1], abs=1e-12)


def test_best_response_unsupported():
    with pytest.raises(UnsupportedScenarioError):
        ClosedFormBR(small_consensus())
    game = build_example2("A1")
    with pytest.raises(UnsupportedScenarioError):
        best_response_step(initial_state(game), lambda x, k: x)


# -- run ----------------------------------------------------------------------

def test_run_zero_iterations_has_initial_row_only():
    tr = run(build_example2("A1"), "auto", max_iters=0)
    assert len(tr) == 1 and tr.rows[0].k == 0 and tr.iters_used == 0


def test_run_stops_after_ten_small_residuals():
    tr = run(build_example2("A1"), "auto", max_iters=5000, residual_tol=1e-10)
    fp = tr.column("fp_residual")
    assert np.all(fp[-10:] <= 1e-10) and not fp[-11] <= 1e-10
    assert tr.iters_used < 5000


def test_run_divergence_keeps_partial_trace():
    game = build_example2("A1")
    p = SolverParams([1.0, 1.0], 1.0, 1e200, [0.5, 0.5], [0.5, 0.5])
    with pytest.raises(DivergenceError) as ei:
        run(game, ExplicitParams(p), x0=[1e150, -1e150], max_iters=50)
    assert ei.value.trace is not None and len(ei.value.trace) >= 1


def test_run_strict_raises():
    game = build_example2("A1")
    p = suggest_params(game, 0).with_gamma(10.0)
    with pytest.raises(BoundsViolationError):
        run(game, p, max_iters=3, strict=True)
    tr = run(game, p, max_iters=3)
    assert not any(r.bounds_ok for r in tr.rows)


def test_run_explicit_schedule_callable():
    game = build_example2("A2")
    base = suggest_params(game, 0)
    tr = run(game, lambda k: base.with_gamma(base.gamma / (1 + k % 2)), max_iters=4)
    assert [r.gamma for r in tr.rows] == [base.gamma, base.gamma / 2] * 2 + [base.gamma]


def test_auto_gamma_constant_per_run():
    game = small_consensus()
    tr = run(game, AutoParams(margin=0.2, probe=30), max_iters=60)
    assert len({r.gamma for r in tr.rows}) == 1
    assert all(r.bounds_ok for r in tr.rows)


def test_run_deterministic_bitwise():
    game = small_consensus()
    x0 = np.random.default_rng(5).uniform(game.lower, game.upper)
    a = run(game, "auto", x0, max_iters=80).to_csv()
    b = run(small_consensus(), "auto", x0, max_iters=80).to_csv()
    assert a == b


def test_run_inclusion_checked_every_step():
    game = build_example3()
    run(game, "auto", [-1.0, 0.5], max_iters=200, check_inclusion=1e-8)


def test_w_residual_matches_dense_identity():
    game = coupled_pair()
    tr = run(game, "auto", [0.3, -0.2], max_iters=30, keep_iterates=True,
             track_w_residual=True)
    for k in range(30):
        p = tr.params[k]
        pc = build_preconditioner(game, k, p)
        x, s = tr.iterates[k]
        st = IterateState(x, s, k)
        xt, sgt = resolvent(st, game, p)
        d = np.concatenate([x - xt, s - sgt])
        qb = p.Qbar_diag(game.n, game.M)
        ref = np.linalg.norm(0.5 / pc.norm_K * qb * (pc.Phi @ d))
        assert tr.w_residual[k] == pytest.approx(ref, rel=1e-9, abs=1e-15)


def test_k_norm_distance_nonincreasing_static_network():
    game = build_example2("A1")
    ref = run(game, "auto", max_iters=5000, residual_tol=1e-12)
    star = ref.final.x
    assert ref.rows[-1].fp_residual <= 1e-10
    tr = run(game, "auto", max_iters=300, keep_iterates=True)
    p = tr.params[0]
    K = build_preconditioner(game, 0, p).K
    dist = [np.sqrt(max((x - star) @ K @ (x - star), 0.0)) for x, _ in tr.iterates]
    assert all(b <= a + 1e-9 for a, b in zip(dist, dist[1:]))
