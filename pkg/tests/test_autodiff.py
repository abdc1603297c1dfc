import zlib

import numpy as np
import pytest

from lathadapter import autodiff as ad
from lathadapter import geometry as G
from lathadapter.autodiff import hyperbolic as H
from lathadapter.errors import DomainError, UsageError
from lathadapter.objective import l_hcls

C = 0.1


# (name, function of one Var, sampler producing a smooth point)
UNARY = [
    ("tanh", ad.tanh, lambda r: r.normal(size=5)),
    ("arctanh", ad.arctanh, lambda r: r.uniform(-0.9, 0.9, size=5)),
    ("exp", ad.exp, lambda r: r.normal(size=5)),
    ("log", ad.log, lambda r: r.uniform(0.2, 3.0, size=5)),
    ("sqrt", ad.sqrt, lambda r: r.uniform(0.2, 3.0, size=5)),
    ("relu", ad.relu, lambda r: r.choice([-1, 1], size=5) * r.uniform(0.1, 2.0, size=5)),
    ("scale", lambda x: ad.scale(x, -2.5), lambda r: r.normal(size=5)),
    ("norm", lambda x: ad.norm(x), lambda r: r.normal(size=(2, 5))),
    ("dot", lambda x: ad.dot(x, x[::-1]), lambda r: r.normal(size=6)),
    ("add", lambda x: ad.add(x, ad.mul(x, x)), lambda r: r.normal(size=5)),
    ("sub", lambda x: ad.sub(ad.exp(x), x), lambda r: r.normal(size=5)),
    ("max2", lambda x: ad.max2(x[:3], x[3:]), lambda r: np.r_[r.normal(size=3) + 2, r.normal(size=3) - 2]),
    ("sum", lambda x: ad.sum(ad.mul(x, x), axis=0), lambda r: r.normal(size=(3, 4))),
    ("cosine_similarity", lambda x: ad.cosine_similarity(x, x[::-1] + 1.0), lambda r: r.normal(size=(3, 4))),
    ("logsumexp", ad.logsumexp, lambda r: r.normal(size=(2, 4))),
]


@pytest.mark.parametrize("name,op,draw", UNARY, ids=[u[0] for u in UNARY])
def test_primitive_gradients_match_fd(name, op, draw):
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    weights = None
    worst = 0.0
    for _ in range(100):
        p = draw(rng)
        probe = op(p)
        if weights is None or weights.shape != np.shape(probe):
            weights = rng.normal(size=np.shape(probe))
        f = lambda x, w=weights: ad.sum(ad.mul(op(x), w))  # noqa: E731
        worst = max(worst, ad.grad_check(f, p))
    assert worst < 1e-6, f"{name}: {worst}"


def test_dot_backward_is_other_operand():
    tape = ad.Tape()
    u = tape.var(np.array([1.0, -2.0, 0.5]))
    z = np.array([3.0, 4.0, -1.0])
    g, = tape.backward(ad.dot(u, z), [u])
    assert np.array_equal(g, z)


def test_relu_kink_and_inactive():
    tape = ad.Tape()
    x = tape.var(np.array([-1.0, 0.0, 2.0]))
    g, = tape.backward(ad.sum(ad.relu(x)), [x])
    assert np.array_equal(g, [0.0, 0.0, 1.0])


def test_max2_tie_routes_to_first():
    tape = ad.Tape()
    a = tape.var(np.array([1.0, 2.0]))
    b = tape.var(np.array([1.0, 3.0]))
    ga, gb = tape.backward(ad.sum(ad.max2(a, b)), [a, b])
    assert np.array_equal(ga, [1.0, 0.0])
    assert np.array_equal(gb, [0.0, 1.0])


def test_hyp_dist_gradient_matches_fd():
    z = np.array([0.0, 0.1])
    f = lambda u: H.hyp_dist(u, z, C)  # noqa: E731
    assert ad.grad_check(f, np.array([0.1, 0.0])) < 1e-6


def test_tape_forward_matches_geometry(rng):
    X = rng.normal(size=(20, 5))
    U = G.exp_map0(rng.normal(size=(20, 5)), C)
    tape = ad.Tape()
    x, u = tape.var(X), tape.var(U)
    np.testing.assert_allclose(H.exp_map0(x, C).value, G.exp_map0(X, C), rtol=0, atol=1e-12)
    np.testing.assert_allclose(H.mobius_add(u, x.value * 0.1, C).value,
                               G.mobius_add(U, X * 0.1, C), rtol=0, atol=1e-12)
    np.testing.assert_allclose(H.hyp_dist(u, U[::-1], C).value,
                               G.hyp_dist(U, U[::-1], C), rtol=0, atol=1e-12)
    np.testing.assert_allclose(H.pairwise_dist(u, U, C).value,
                               G.pairwise_dist(U, U, C), rtol=0, atol=1e-12)


def test_arctanh_domain_error():
    tape = ad.Tape()
    with pytest.raises(DomainError):
        ad.arctanh(tape.var(np.array([0.5, 1.0])))


def test_norm_at_zero_raises_on_backward():
    tape = ad.Tape()
    x = tape.var(np.zeros(3))
    out = ad.norm(x)
    assert float(out) == 0.0
    with pytest.raises(DomainError):
        tape.backward(out, [x])


def test_constant_subgraph_has_zero_gradient(rng):
    tape = ad.Tape()
    a = tape.var(rng.normal(size=4))
    frozen = tape.const(rng.normal(size=4))
    out = ad.add(ad.sum(ad.mul(ad.exp(frozen), a)), ad.sum(ad.tanh(frozen)))
    ga, gf = tape.backward(out, [a, frozen])
    assert np.array_equal(gf, np.zeros(4))
    np.testing.assert_allclose(ga, np.exp(frozen.value))


def test_backward_is_deterministic(rng):
    tape = ad.Tape()
    A = tape.var(rng.normal(size=(4, 3)))
    V = G.exp_map0(rng.normal(size=(5, 3)), C)
    out = ad.sum(H.pairwise_dist(V, H.exp_map0(A, C), C))
    g1, = tape.backward(out, [A])
    g2, = tape.backward(out, [A])
    assert np.array_equal(g1, g2)


def test_backward_visits_each_node_once():
    tape = ad.Tape()
    x = tape.var(np.array([0.3, -0.2]))
    y = ad.mul(x, x)
    z = ad.add(y, y)
    out = ad.sum(z)
    tape.backward(out, [x])
    assert tape.last_visits == len(tape)


def test_parents_precede_children(rng):
    tape = ad.Tape()
    A = tape.var(rng.normal(size=(3, 2)))
    H.pairwise_dist(A, A.value[::-1], C)
    for i, node in enumerate(tape.nodes):
        assert all(p < i for p in node.parents)


def test_backward_rejects_non_scalar_and_foreign_tape():
    tape, other = ad.Tape(), ad.Tape()
    x = tape.var(np.ones(3))
    with pytest.raises(UsageError):
        tape.backward(ad.exp(x), [x])
    with pytest.raises(UsageError):
        other.backward(ad.sum(x), [x])
    with pytest.raises(UsageError):
        ad.add(x, other.var(np.ones(3)))


def test_plain_arrays_bypass_the_tape():
    out = ad.tanh(np.array([0.5]))
    assert isinstance(out, np.ndarray)


def test_grad_check_quadratic(rng):
    p = rng.normal(size=7)
    assert ad.grad_check(lambda x: ad.dot(x, x), p) < 1e-9


def test_grad_check_detects_wrong_gradient(rng):
    p = rng.normal(size=3)
    f = lambda x: ad.dot(x, x)  # noqa: E731
    assert ad.grad_check(f, p, grad=2 * p + 1e-3) > 1e-4


def test_grad_check_non_finite_is_domain_error():
    with pytest.raises(DomainError):
        ad.grad_check(lambda x: ad.sum(ad.log(x)), np.array([1e-7]), step=1e-6)


def test_l_hcls_gradient_two_classes():
    rng = np.random.default_rng(3)
    V = G.exp_map0(rng.normal(size=(4, 3)), C)
    y = np.array([0, 1, 0, 1])
    f = lambda T: l_hcls(V, H.exp_map0(T, C), y, C)  # noqa: E731
    assert ad.grad_check(f, rng.normal(size=(2, 3))) < 1e-5


def test_take_accumulates_repeated_indices():
    tape = ad.Tape()
    x = tape.var(np.array([1.0, 2.0, 3.0]))
    g, = tape.backward(ad.sum(x[np.array([0, 0, 2])]), [x])
    assert np.array_equal(g, [2.0, 0.0, 1.0])
