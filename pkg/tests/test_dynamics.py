import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyagraph import dynamics as dyn
from polyagraph.fieldspec import FieldSpec
from polyagraph.graph_model import generate, one_edge_hypergraph, Hypergraph

GRAPHS = [generate("complete", 3), generate("cycle", 4), generate("star", 5),
          generate("complete_bipartite", 3, 3), generate("path", 4)]
ALPHAS = [0.5, 1.0, 2.0]


def field_by_loops(x, g, alpha):
    """Term-by-term evaluation of the field, written independently of the library."""
    out = [-xi for xi in x]
    for i, j in g.edges:
        a, b = x[i] ** alpha, x[j] ** alpha
        out[i] += a / (a + b) / g.N
        out[j] += b / (a + b) / g.N
    return np.array(out)


def central_grad(f, x, h=1e-6):
    out = np.empty(len(x))
    for k in range(len(x)):
        d = np.zeros(len(x))
        d[k] = h
        out[k] = (f(x + d) - f(x - d)) / (2 * h)
    return out


simplex = st.integers(0, 2**32 - 1).map(lambda s: np.random.default_rng(s))


def interior(rng, m):
    return 0.9 * rng.dirichlet(np.ones(m)) + 0.1 / m


# --- spec examples -------------------------------------------------------------

def test_uniform_is_zero_on_regular_graphs():
    for g in (generate("complete", 5), generate("cycle", 7), generate("complete_bipartite", 3, 3)):
        for a in ALPHAS:
            assert np.max(np.abs(dyn.vector_field(dyn.uniform_point(g.m), g, FieldSpec.uniform(a)))) < 1e-15


def test_k2_field_vanishes():
    g = generate("complete", 2)
    for x1 in np.linspace(0, 1, 11):
        assert np.allclose(dyn.vector_field([x1, 1 - x1], g, FieldSpec.uniform(1.0)), 0, atol=1e-16)


def test_one_hyperedge_field_vanishes():
    h = one_edge_hypergraph(4)
    rng = np.random.default_rng(0)
    for x in rng.dirichlet(np.ones(4), size=20):
        assert np.max(np.abs(dyn.vector_field(x, h, FieldSpec.hypergraph()))) < 1e-15


def test_lyapunov_values():
    spec = FieldSpec.uniform(1.0)
    k3 = generate("complete", 3)
    assert dyn.lyapunov(dyn.uniform_point(3), k3, spec) == pytest.approx(-1 + math.log(2 / 3), abs=1e-15)
    assert dyn.lyapunov(dyn.uniform_point(3), k3, spec) == pytest.approx(-1.4054651, abs=1e-7)
    assert dyn.lyapunov([1.0, 0.0], generate("complete", 2), spec) == -1.0
    assert dyn.lyapunov([0.0, 0.0, 1.0], generate("star", 3), spec) == -1.0


def test_lyapunov_dead_edge_is_minus_inf():
    assert dyn.lyapunov([0.0, 0.0, 1.0], generate("complete", 3), FieldSpec.uniform(1.0)) == -math.inf


def test_gradient_examples():
    k3 = generate("complete", 3)
    spec = FieldSpec.uniform(1.0)
    assert np.allclose(dyn.lyapunov_gradient(dyn.uniform_point(3), k3, spec), 0, atol=1e-15)
    assert dyn.lyapunov_gradient([0.5, 0.5, 0.0], k3, spec)[2] == pytest.approx(1 / 3, abs=1e-15)
    g = dyn.lyapunov_gradient([0.5, 0.5, 0.0], generate("star", 3), FieldSpec.uniform(0.5))
    assert g[2] == math.inf
    assert np.all(np.isfinite(g[:2]))


def test_hessian_examples():
    h = dyn.lyapunov_hessian([0.5, 0.5], generate("complete", 2), FieldSpec.uniform(1.0))
    assert h[0, 1] == pytest.approx(-1.0, abs=1e-15)
    # boundary with exponent != 1
    with pytest.raises(dyn.UndefinedDerivativeError):
        dyn.lyapunov_hessian([0.5, 0.5, 0.0], generate("star", 3), FieldSpec.uniform(0.5))
    # exponent 1 on the boundary is fine
    dyn.lyapunov_hessian([0.5, 0.5, 0.0], generate("complete", 3), FieldSpec.uniform(1.0))


@pytest.mark.parametrize("g", GRAPHS, ids=lambda g: g.name)
def test_tangent_quadratic_form_nonpositive_for_concave(g):
    w = np.zeros(g.m)
    w[0], w[1] = 1 / math.sqrt(2), -1 / math.sqrt(2)
    for a in (0.3, 0.5, 1.0):
        h = dyn.lyapunov_hessian(dyn.uniform_point(g.m), g, FieldSpec.uniform(a))
        assert w @ h @ w <= 1e-15


def test_dead_edge_raises_domain_error():
    with pytest.raises(dyn.DomainError):
        dyn.vector_field([0.0, 0.0, 1.0], generate("complete", 3), FieldSpec.uniform(1.0))
    with pytest.raises(dyn.DomainError):
        dyn.vector_field([-0.1, 0.6, 0.5], generate("complete", 3), FieldSpec.uniform(1.0))


def test_zero_coordinate_gets_zero_field():
    f = dyn.vector_field([0.5, 0.5, 0.0], generate("star", 3), FieldSpec.uniform(0.5))
    assert f[2] == 0.0
    f = dyn.vector_field([0.0, 0.5, 0.5], generate("path", 3), FieldSpec.uniform(0.5))
    assert f[0] == 0.0


# --- independent oracles ---------------------------------------------------------

@pytest.mark.parametrize("g", GRAPHS, ids=lambda g: g.name)
@pytest.mark.parametrize("alpha", ALPHAS)
def test_field_matches_loop_oracle(g, alpha):
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.dirichlet(np.ones(g.m))
        assert np.allclose(dyn.vector_field(x, g, FieldSpec.uniform(alpha)), field_by_loops(x, g, alpha),
                           rtol=0, atol=1e-14)


@pytest.mark.parametrize("g", GRAPHS, ids=lambda g: g.name)
@pytest.mark.parametrize("alpha", ALPHAS)
def test_gradient_and_hessian_finite_differences(g, alpha):
    spec = FieldSpec.uniform(alpha)
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = interior(rng, g.m)
        grad = dyn.lyapunov_gradient(x, g, spec)
        fd = central_grad(lambda y: dyn.lyapunov(y, g, spec), x)
        assert np.max(np.abs(grad - fd)) <= 1e-6 * np.max(np.abs(fd))
        hess = dyn.lyapunov_hessian(x, g, spec)
        fd_h = np.array([central_grad(lambda y: dyn.lyapunov_gradient(y, g, spec)[k], x) for k in range(g.m)])
        assert np.max(np.abs(hess - fd_h)) <= 1e-6 * np.max(np.abs(fd_h))
        assert np.allclose(hess, hess.T, atol=1e-14)


def test_per_edge_gradient_finite_differences():
    g = generate("cycle", 4)
    spec = FieldSpec.per_edge({(0, 1): 0.5, (1, 2): 1.0, (2, 3): 2.0, (0, 3): 1.5})
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = interior(rng, 4)
        fd = central_grad(lambda y: dyn.lyapunov(y, g, spec), x)
        assert np.max(np.abs(dyn.lyapunov_gradient(x, g, spec) - fd)) <= 1e-6 * np.max(np.abs(fd))
        f = dyn.vector_field(x, g, spec)
        assert np.max(np.abs(f - x * dyn.lyapunov_gradient(x, g, spec))) <= 1e-15


def test_hypergraph_lyapunov_finite_differences():
    h = Hypergraph(5, ((0, 1, 2), (2, 3), (3, 4, 0)))
    spec = FieldSpec.hypergraph()
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = interior(rng, 5)
        fd = central_grad(lambda y: dyn.lyapunov(y, h, spec), x)
        assert np.max(np.abs(dyn.lyapunov_gradient(x, h, spec) - fd)) <= 1e-6 * np.max(np.abs(fd))
        f = dyn.vector_field(x, h, spec)
        assert abs(f.sum()) <= 1e-15
        assert np.max(np.abs(f - x * dyn.lyapunov_gradient(x, h, spec))) <= 1e-15


@settings(max_examples=60, deadline=None)
@given(simplex, st.sampled_from(GRAPHS), st.floats(0.2, 3.0))
def test_tangency_and_product_identity(rng, g, alpha):
    spec = FieldSpec.uniform(alpha)
    x = rng.dirichlet(np.ones(g.m))
    f = dyn.vector_field(x, g, spec)
    assert abs(f.sum()) <= 1e-12
    assert np.max(np.abs(f - x * dyn.lyapunov_gradient(x, g, spec))) <= 1e-12
    assert dyn.lyapunov_rate(x, g, spec) >= 0


# --- domain and integration --------------------------------------------------------

def test_domain_delta():
    g = generate("complete", 3)
    d = dyn.DomainDelta.default(g)
    assert d.c == pytest.approx(1 / 6)
    d.validate(g)
    assert d.contains(dyn.uniform_point(3), g)
    assert not d.contains([0.95, 0.05, 0.0], g)
    with pytest.raises(dyn.DomainError):
        dyn.DomainDelta(0.5).validate(g)


def test_integrate_k3_to_uniform():
    # the tangent eigenvalues at uniform are both -1/4, so the sup distance
    # decays like exp(-t/4): about 1.9e-6 at t = 50, below 1e-6 by t = 60
    traj = dyn.integrate([0.6, 0.3, 0.1], generate("complete", 3), FieldSpec.uniform(1.0), t_end=60)
    dist = np.max(np.abs(traj.x - 1 / 3), axis=1)
    assert dist[-1] <= 1e-6
    assert np.log(dist[4000] / dist[5000]) / 10 == pytest.approx(0.25, abs=1e-3)
    assert np.all(np.abs(traj.x.sum(axis=1) - 1) <= 1e-12)


def test_integrate_equilibrium_stays_put():
    x0 = dyn.uniform_point(4)
    traj = dyn.integrate(x0, generate("cycle", 4), FieldSpec.uniform(1.0), t_end=5)
    assert np.max(np.abs(traj.x - x0)) <= 1e-12


def test_integrate_c4_lands_on_omega():
    traj = dyn.integrate([0.4, 0.1, 0.4, 0.1], generate("cycle", 4), FieldSpec.uniform(1.0), t_end=50)
    x = traj.final
    assert abs(x[0] - x[2]) <= 1e-6 and abs(x[1] - x[3]) <= 1e-6
    f = dyn.vector_field(x, generate("cycle", 4), FieldSpec.uniform(1.0))
    assert np.max(np.abs(f)) <= 1e-6


@pytest.mark.parametrize("alpha", ALPHAS)
def test_lyapunov_monotone_along_flow(alpha):
    g = generate("star", 5)
    spec = FieldSpec.uniform(alpha)
    d = dyn.DomainDelta.default(g)
    rng = np.random.default_rng(5)
    x0 = rng.dirichlet(np.ones(5))
    while not d.contains(x0, g):
        x0 = rng.dirichlet(np.ones(5))
    traj = dyn.integrate(x0, g, spec, t_end=10)
    ls = np.array([dyn.lyapunov(x, g, spec) for x in traj.x])
    assert np.diff(ls).min() >= -1e-9
    # chain rule: dL/dt = grad L . F = sum v (dL/dv)^2
    for x in traj.x[::100]:
        grad = dyn.lyapunov_gradient(x, g, spec)
        assert grad @ dyn.vector_field(x, g, spec) == pytest.approx(dyn.lyapunov_rate(x, g, spec), rel=1e-10, abs=1e-15)
    assert all(d.contains(x, g) for x in traj.x)


def test_integrate_rejects_bad_input():
    g = generate("complete", 3)
    with pytest.raises(dyn.DomainError):
        dyn.integrate([0.98, 0.01, 0.01], g, FieldSpec.uniform(1.0), t_end=1)
    with pytest.raises(ValueError):
        dyn.integrate(dyn.uniform_point(3), g, FieldSpec.uniform(1.0), t_end=1, dt=0)
    with pytest.raises(dyn.DomainError):
        dyn.integrate([0.5, 0.5, 0.5], g, FieldSpec.uniform(1.0), t_end=1)


def test_tangent_basis():
    for m in (2, 3, 6):
        q = dyn.tangent_basis(m)
        assert q.shape == (m, m - 1)
        assert np.allclose(q.T @ q, np.eye(m - 1))
        assert np.allclose(q.sum(axis=0), 0)
