import numpy as np
import pytest
from hypothesis import given, strategies as st

from tvgnwe.exceptions import ShapeError
from tvgnwe.game import BoxSet, GameSpec, LocalCost, StaticConstraints, StaticNetwork
from tvgnwe.metrics import (CSV_COLUMNS, RunTrace, TraceRow, certify_pn_enwe, complete_laplacian,
                            consensus_residual, constraint_violation, multiplier_laplacian,
                            read_trace_csv)
from tvgnwe.scenarios import (A1, build_constrained_consensus, build_example2, build_example3,
                              random_game)


def test_consensus_residual_zero_on_consensus_subspace():
    L = complete_laplacian(4)
    x = np.tile([1.5, -2.0, 3.0], 4)
    assert consensus_residual(x, L, 3) == 0.0


def test_consensus_residual_two_agents():
    L = np.array([[1.0, -1.0], [-1.0, 1.0]])
    assert consensus_residual(np.array([0.0, 1.0]), L, 1) == pytest.approx(np.sqrt(2))


def test_consensus_residual_kronecker_oracle(rng):
    for N, n in ((3, 1), (5, 2), (7, 4)):
        W = rng.random((N, N))
        W = np.triu(W, 1) + np.triu(W, 1).T
        L = np.diag(W.sum(1)) - W
        x = rng.normal(size=N * n)
        ref = np.linalg.norm(np.kron(L, np.eye(n)) @ x)
        assert consensus_residual(x, L, n) == pytest.approx(ref, rel=1e-12)


def test_consensus_residual_shape_error():
    with pytest.raises(ShapeError):
        consensus_residual(np.zeros(5), complete_laplacian(2), 2)


@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6), st.booleans())
def test_consensus_zero_iff_blocks_equal(vals, equal):
    x = np.array(vals)
    if equal:
        x = np.tile(x[:2], 3)
    r = consensus_residual(x, complete_laplacian(3), 2)
    blocks = x.reshape(3, 2)
    assert (r <= 1e-12) == bool(np.all(np.abs(blocks - blocks[0]) <= 1e-12))


def test_multiplier_laplacians():
    assert np.array_equal(multiplier_laplacian(build_example2("A1")), complete_laplacian(2))
    L = multiplier_laplacian(build_constrained_consensus(Nagents=5, n=2, m=2))
    assert np.array_equal(L, complete_laplacian(5))
    # row touching agents 0 and 2 only
    C = np.zeros((1, 3))
    C[0, [0, 2]] = 1.0
    game = GameSpec(3, 1, 1, [BoxSet([-1.0], [1.0])] * 3, [LocalCost.zero()] * 3,
                    StaticConstraints(C, [1.0]), StaticNetwork(np.full((3, 3), 1 / 3)))
    assert np.array_equal(multiplier_laplacian(game), [[1, 0, -1], [0, 0, 0], [-1, 0, 1]])


def test_constraint_violation_matches_direct(rng):
    game = random_game(6, M=9)
    C, c = game.coupling(0)
    for _ in range(10):
        x = rng.normal(0, 4, game.dim)
        assert constraint_violation(x, 0, game) == max(0.0, float(np.max(C @ x - c)))


def test_certify_example3_consensus_points():
    game = build_example3()
    window = range(60, 110)
    for a in (-0.125, 0.0, 0.4, 1.0):
        assert certify_pn_enwe(np.full(2, a), np.zeros(1), game, window).certified
    # 2 * (-0.2) < -0.25: infeasible, so not an equilibrium
    assert not certify_pn_enwe(np.full(2, -0.2), np.zeros(1), game, window).certified


def test_certify_rejects_example2_candidates_under_alternation():
    game = build_example2("alt")
    for x in ([1.25, 1.75], [4 / 3, 11 / 6]):
        cert = certify_pn_enwe(np.array(x), np.zeros(0), game, range(0, 10))
        assert not cert.certified and cert.worst > 1e-3
    # each is certified under its own static network
    assert certify_pn_enwe(np.array([1.25, 1.75]), np.zeros(0), build_example2("A1"),
                           [0], tol=1e-12).certified


def test_certify_unconstrained_fixed_point():
    game = GameSpec(3, 2, 0, [BoxSet([-1.0, -1.0], [1.0, 1.0])] * 3, [LocalCost.zero()] * 3,
                    StaticConstraints(np.zeros((0, 6)), np.zeros(0)),
                    StaticNetwork(np.full((3, 3), 1 / 3)))
    assert certify_pn_enwe(np.tile([0.3, -0.9], 3), np.zeros(0), game, [0, 5]).certified


def test_certify_window_order_invariant_and_nonempty():
    game = build_example3()
    x, s = np.array([0.3, 0.1]), np.zeros(1)
    a = certify_pn_enwe(x, s, game, [70, 55, 90])
    b = certify_pn_enwe(x, s, game, [90, 70, 55, 55])
    assert a == b
    with pytest.raises(ValueError):
        certify_pn_enwe(x, s, game, [])


def test_csv_format_round_trip(tmp_path):
    vals = [0.1, 1 / 3, np.pi * 1e-300, 2.0 ** -1074, 1e308]
    rows = [TraceRow(k, v, v / 7, 0.0, v * 3, 0.25, bool(k % 2)) for k, v in enumerate(vals)]
    tr = RunTrace(rows)
    text = tr.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert text.splitlines()[2].endswith(",1") and text.splitlines()[1].endswith(",0")
    path = tmp_path / "t.csv"
    tr.write_csv(path)
    back = read_trace_csv(path)
    assert back.rows == rows
    assert path.read_text() == text
