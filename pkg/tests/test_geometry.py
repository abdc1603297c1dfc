import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import oracles as O
from lathadapter import geometry as G
from lathadapter.errors import DomainError, UsageError

C = 0.1


def _mp(x):
    return np.array([float(v) for v in x])


def test_exp_map0_origin():
    for d in (1, 2, 7):
        assert np.array_equal(G.exp_map0(np.zeros(d), C), np.zeros(d))


def test_exp_map0_saturates_below_radius():
    norms = []
    for r in (1e1, 1e2, 1e3, 1e8, 1e300):
        y = G.exp_map0(np.array([r, 0.0]), C)
        assert np.sqrt(C) * np.linalg.norm(y) < 1.0
        norms.append(np.linalg.norm(y))
    assert np.all(np.diff(norms) >= 0)
    assert norms[-1] == pytest.approx(1 / np.sqrt(C), rel=1e-9)


def test_exp_map0_matches_oracle():
    got = G.exp_map0(np.array([1.0, 0.0]), C)
    want = _mp(O.exp_map0(O.vec([1.0, 0.0]), C))
    np.testing.assert_allclose(got, want, atol=1e-15)


def test_exp_map0_rejects_non_finite():
    with pytest.raises(DomainError):
        G.exp_map0(np.array([np.nan, 1.0]), C)
    with pytest.raises(DomainError):
        G.exp_map0(np.array([1.0, 1.0]), -1.0)


def test_mobius_identity_and_inverse(rng):
    u = G.exp_map0(rng.normal(size=(50, 4)), C)
    zero = np.zeros_like(u)
    np.testing.assert_allclose(G.mobius_add(u, zero, C), u, atol=1e-12)
    np.testing.assert_allclose(G.mobius_add(zero, u, C), u, atol=1e-12)
    assert np.max(np.linalg.norm(G.mobius_add(-u, u, C), axis=-1)) <= 1e-12


def test_mobius_matches_oracle():
    u, z = np.array([0.2, 0.0]), np.array([0.0, 0.3])
    want = _mp(O.mobius_add(O.vec(u), O.vec(z), C))
    np.testing.assert_allclose(G.mobius_add(u, z, C), want, atol=1e-15)


def test_mobius_dimension_mismatch():
    with pytest.raises(UsageError):
        G.mobius_add(np.zeros(2), np.zeros(3), C)


def test_ballpoint_checks_peers():
    a = G.BallPoint(np.array([0.1, 0.2]), 0.1)
    b = G.BallPoint(np.array([0.1, 0.2]), 0.5)
    with pytest.raises(UsageError):
        a + b
    with pytest.raises(UsageError):
        a.dist(G.BallPoint(np.zeros(3), 0.1))
    with pytest.raises(DomainError):
        G.BallPoint(np.array([4.0, 0.0]), 0.1)
    assert (a + G.BallPoint.origin(2, 0.1)).coords == pytest.approx(a.coords)
    assert a.dist(a) == pytest.approx(0.0, abs=1e-12)


def test_hyp_dist_self_and_symmetry(rng):
    u = G.exp_map0(rng.normal(size=(20, 3)), C)
    z = G.exp_map0(rng.normal(size=(20, 3)), C)
    assert np.max(G.hyp_dist(u, u, C)) <= 1e-10
    np.testing.assert_allclose(G.hyp_dist(u, z, C), G.hyp_dist(z, u, C), atol=1e-10)


def test_hyp_dist_matches_oracle():
    u, z = np.array([0.1, 0.0]), np.array([0.0, 0.1])
    want = float(O.hyp_dist(O.vec(u), O.vec(z), C))
    assert float(G.hyp_dist(u, z, C)) == pytest.approx(want, abs=1e-15)


def test_hyp_dist_from_origin_closed_form():
    x = np.array([0.5, 0.0])
    assert float(G.hyp_norm(x, 1.0)) == pytest.approx(2 * np.arctanh(0.5), abs=1e-14)


def test_pairwise_shape(rng):
    D = G.pairwise_dist(rng.normal(size=(5, 3)) * 0.3, rng.normal(size=(7, 3)) * 0.3, C)
    assert D.shape == (5, 7)


def test_flat_limit_examples(rng):
    u = np.array([0.3, -0.1])
    assert G.flat_limit_check(u, u, 1e-8) <= 1e-15
    assert G.flat_limit_check(np.array([0.3]), np.array([-0.2]), 1e-10) < 1e-7
    x = rng.normal(size=(200, 3))
    x *= rng.uniform(0, 0.5, size=(200, 1)) / np.linalg.norm(x, axis=1, keepdims=True)
    y = rng.normal(size=(200, 3))
    y *= rng.uniform(0, 0.5, size=(200, 1)) / np.linalg.norm(y, axis=1, keepdims=True)
    assert G.flat_limit_check(x, y, 1e-8) < 1e-6


def test_flat_limit_requires_small_curvature():
    with pytest.raises(UsageError):
        G.flat_limit_check(np.zeros(2), np.zeros(2), 1e-3)


def test_clamp_counter_counts_boundary_hits():
    G.reset_clamp_events()
    G.exp_map0(np.array([[1e6, 0.0], [0.1, 0.0]]), C)
    assert G.clamp_events() == 1
    G.reset_clamp_events()
    assert G.clamp_events() == 0


def test_interior_workload_has_no_clamps(rng, no_clamps):
    u = G.exp_map0(rng.normal(size=(100, 8)), C)
    G.pairwise_dist(u, u, C)


def test_clamp_counter_is_thread_safe():
    G.reset_clamp_events()
    x = np.tile([1e9, 0.0], (10, 1))

    def work():
        for _ in range(50):
            G.exp_map0(x, C)

    threads = [threading.Thread(target=work) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert G.clamp_events() == 4 * 50 * 10


finite_vec = arrays(np.float64, 3, elements=st.floats(-1e6, 1e6, allow_nan=False))


@settings(max_examples=200, deadline=None)
@given(finite_vec, st.sampled_from([1e-3, 0.1, 1.0, 10.0]))
def test_containment(x, c):
    assert np.sqrt(c) * np.linalg.norm(G.exp_map0(x, c)) < 1.0


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 3, elements=st.floats(-3, 3)).filter(lambda v: np.linalg.norm(v) > 1e-6),
       st.sampled_from([0.1, 1.0]))
def test_monotone_radius(x, c):
    xhat = x / np.linalg.norm(x)
    ts = np.linspace(0.05, 8.0, 50)
    r = G.hyp_norm(G.exp_map0(ts[:, None] * xhat, c), c)
    assert np.all(np.diff(r) > 0)
