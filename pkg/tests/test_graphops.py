import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from scipy import integrate

from graphop_mv import graphops as go
from graphop_mv.errors import (ConvergenceWarning, DimensionError, InvalidParameterError,
                               SelfAdjointnessError)
from graphop_mv.particles import complete_graph, generate_erdos_renyi

# n(A) of the cell-averaged power-law kernel; rank one, so n(A) = (1-a)^2 sum_k u_k^2 / m
# with u_k the exact cell average of xi^-a.  Values from that closed form.
RADIUS_075 = {32: 6.2332472768238985, 64: 8.86691819977526, 128: 12.591492336806581, 256: 17.858835845255552}
RADIUS_025_M256 = 1.117073412599933
W2_025_M512 = 1.1193950426749257


def dense_radius(A):
    S = A.symmetrized()
    S = S.toarray() if sp.issparse(S) else S
    return float(np.max(np.abs(np.linalg.eigvalsh((S + S.T) / 2))))


def test_network_space_validation():
    with pytest.raises(InvalidParameterError):
        go.NetworkSpace(nodes=np.arange(2), weights=[0.5, 0.6])
    with pytest.raises(InvalidParameterError):
        go.NetworkSpace(nodes=np.arange(2), weights=[1.0, 0.0])
    with pytest.raises(DimensionError):
        go.NetworkSpace(nodes=np.arange(3), weights=[0.5, 0.5])
    assert go.NetworkSpace.point().size == 1


def test_graphon_kernel_rejects_asymmetric():
    with pytest.raises(InvalidParameterError):
        go.GraphonKernel(np.array([[0.0, 1.0], [0.5, 0.0]]))


def test_constant_graphons():
    space = go.NetworkSpace(nodes=np.arange(4), weights=[0.1, 0.2, 0.3, 0.4])
    one = go.constant_graphon(1.0, space)
    f = np.array([1.0, -2.0, 0.5, 3.0])
    np.testing.assert_allclose(one.apply(f), space.inner(f, np.ones(4)))
    A = go.constant_graphon(0.3, space)
    np.testing.assert_allclose(A.apply(np.ones(4)), 0.3)
    assert go.numerical_radius(A) == pytest.approx(0.3, abs=1e-12)
    assert go.check_c_regular(A) == pytest.approx(0.3)
    assert go.norm_infty_to_1(A) == pytest.approx(0.3)
    for p in (1, 2, 3.5, np.inf):
        assert go.graphon_norm(A.kernel, space, p) == pytest.approx(0.3)
    assert go.numerical_radius(go.identity_graphop(space)) == pytest.approx(1.0)


def test_power_law_degree_function():
    a, m = 0.25, 64
    A = go.power_law_graphop(go.PowerLawParams(a), m)
    deg = A.apply(np.ones(m))
    xi = A.space.nodes
    # exact cell averages of (1-a) xi^-a by adaptive quadrature
    cell = np.array([integrate.quad(lambda s: (1 - a) * s ** (-a), k / m, (k + 1) / m)[0] * m for k in range(m)])
    np.testing.assert_allclose(deg, cell, rtol=1e-10)
    # midpoint values approach the cell averages like 1/k^2
    np.testing.assert_allclose(deg[3:], (1 - a) * xi[3:] ** (-a), rtol=2e-3)
    assert go.check_c_regular(A) is None
    assert go.norm_infty_to_1(A) == pytest.approx(1.0, abs=1e-12)


def test_power_law_limits_and_validation():
    with pytest.raises(InvalidParameterError):
        go.PowerLawParams(1.0)
    with pytest.raises(InvalidParameterError):
        go.PowerLawParams(0.25, beta_edge=0.6)
    with pytest.raises(InvalidParameterError):
        go.power_law_graphon(go.PowerLawParams(0.25), 1)
    _, W = go.power_law_graphon(go.PowerLawParams(1e-9), 16)
    np.testing.assert_allclose(W.values, 1.0, atol=1e-7)


def test_power_law_l2_norm_subcritical():
    a = 0.25
    closed = (1 - a) ** 2 / (1 - 2 * a)
    norms = []
    for m in (64, 128, 256, 512):
        space, W = go.power_law_graphon(go.PowerLawParams(a), m)
        norms.append(go.graphon_norm(W, space, 2))
    assert all(b > c for b, c in zip(norms[1:], norms[:-1]))
    assert all(v < closed for v in norms)
    assert norms[-1] == pytest.approx(W2_025_M512, rel=1e-12)
    assert abs(norms[-1] - closed) / closed < 0.02
    op = go.power_law_graphop(go.PowerLawParams(a), 256)
    n = go.numerical_radius(op)
    assert 1.0 <= n <= closed
    assert n == pytest.approx(RADIUS_025_M256, rel=1e-10)
    assert n == pytest.approx(dense_radius(op), rel=1e-10)


def test_power_law_l2_norm_diverges_above_half():
    norms = []
    for m in (64, 128, 256, 512, 1024):
        space, W = go.power_law_graphon(go.PowerLawParams(0.6), m)
        norms.append(go.graphon_norm(W, space, 2))
    assert all(b > c for b, c in zip(norms[1:], norms[:-1]))
    assert norms[-1] / norms[0] > 1.5


def test_power_law_radius_blowup():
    radii = []
    for m, expected in RADIUS_075.items():
        A = go.power_law_graphop(go.PowerLawParams(0.75), m)
        n = go.numerical_radius(A)
        assert n == pytest.approx(expected, rel=1e-10)
        assert n == pytest.approx(dense_radius(A), rel=1e-6)
        radii.append(n)
    assert all(b > c for b, c in zip(radii[1:], radii[:-1]))
    assert radii[-1] > 10


def test_midpoint_quadrature_underestimates():
    cell = go.numerical_radius(go.power_law_graphop(go.PowerLawParams(0.75), 256))
    mid = go.numerical_radius(go.power_law_graphop(go.PowerLawParams(0.75), 256, quadrature="midpoint"))
    assert mid < cell


@pytest.fixture(scope="module")
def sphere():
    return go.spherical_graphop(32, 64)


def test_spherical_markov_and_symmetry(sphere):
    m = sphere.space.size
    assert m == 32 * 64
    np.testing.assert_allclose(sphere.apply(np.ones(m)), 1.0, atol=1e-12)
    assert go.check_c_regular(sphere, tol=1e-3) == pytest.approx(1.0, abs=1e-12)
    z = sphere.space.nodes[:, 2]
    assert np.max(np.abs(sphere.apply(z))) < 1e-10
    assert go.probe_self_adjoint(sphere) < 1e-12
    assert go.probe_positivity(sphere) >= -1e-12


def test_spherical_norm(sphere):
    nrm = go.operator_norm(sphere)
    assert 0.9 <= nrm <= 1.0 + 1e-10
    assert 0.9 <= go.numerical_radius(sphere) <= 1.0 + 1e-10


def test_spherical_equator_average_of_quadratic(sphere):
    # the equator orthogonal to xi averages x^2 to (1 - xi_x^2)/2
    nodes = sphere.space.nodes
    out = sphere.apply(nodes[:, 0] ** 2)
    exact = (1 - nodes[:, 0] ** 2) / 2
    theta = np.arccos(nodes[:, 2])
    interior = (theta > np.pi / 16) & (theta < np.pi - np.pi / 16)
    assert np.max(np.abs(out - exact)[interior]) < 5e-3


def test_spherical_raw_quadrature_is_markov_but_not_symmetric():
    raw = go.spherical_graphop(16, 32, balance=False)
    np.testing.assert_allclose(raw.apply(np.ones(raw.space.size)), 1.0, atol=1e-12)
    assert go.probe_self_adjoint(raw) > 1e-6
    with pytest.raises(SelfAdjointnessError):
        go.numerical_radius(raw)


def test_spherical_validation():
    with pytest.raises(InvalidParameterError):
        go.spherical_graphop(4, 64)
    with pytest.raises(InvalidParameterError):
        go.spherical_graphop(16, 8)


def test_empirical_graphops():
    N = 10
    A = go.empirical_graphop(complete_graph(N), 1.0)
    np.testing.assert_allclose(A.apply(np.ones(N)), (N - 1) / N)
    assert go.norm_infty_to_1(A) == pytest.approx((N - 1) / N)
    empty = go.empirical_graphop(np.zeros((N, N)))
    np.testing.assert_allclose(empty.apply(np.arange(N, dtype=float)), 0.0)
    with pytest.raises(InvalidParameterError):
        go.empirical_graphop(np.triu(complete_graph(N)))
    with pytest.raises(InvalidParameterError):
        go.empirical_graphop(np.eye(N))
    with pytest.raises(InvalidParameterError):
        go.empirical_graphop(complete_graph(N), r_N=1.5)


def test_erdos_renyi_radius_concentrates():
    A = go.empirical_graphop(generate_erdos_renyi(500, 0.3, seed=11))
    n = go.numerical_radius(A)
    assert 0.25 <= n <= 0.35
    assert n == pytest.approx(dense_radius(A), rel=1e-9)
    S = go.empirical_graphop(sp.csr_matrix(generate_erdos_renyi(500, 0.3, seed=11)))
    assert go.numerical_radius(S) == pytest.approx(n, rel=1e-12)


def test_combined_graphop_kronecker_oracle():
    s1 = go.NetworkSpace(nodes=np.arange(3), weights=[0.2, 0.3, 0.5])
    s2 = go.NetworkSpace(nodes=np.arange(3), weights=[0.6, 0.3, 0.1])
    A1, A2 = go.constant_graphon(0.5, s1), go.constant_graphon(0.4, s2)
    np.testing.assert_allclose(go.combined_apply(A1, A2, np.ones((3, 3))), 0.2, atol=1e-15)
    P = go.product_graphop(A1, A2)
    S1, S2 = A1.symmetrized(), A2.symmetrized()
    oracle = np.max(np.abs(np.linalg.eigvals(np.kron(S1, S2))))
    assert oracle == pytest.approx(0.2, abs=1e-12)
    assert go.numerical_radius(P) == pytest.approx(0.2, abs=1e-10)
    f = np.random.default_rng(0).normal(size=(3, 3, 5))
    swap = A2.apply_along(A1.apply(f), 1)
    np.testing.assert_allclose(go.combined_apply(A1, A2, f), swap, atol=1e-12)
    I1, I2 = go.identity_graphop(s1), go.identity_graphop(s2)
    np.testing.assert_allclose(go.combined_apply(I1, I2, f), f)
    with pytest.raises(DimensionError):
        go.combined_apply(A1, A2, np.ones((2, 3)))


def test_numerical_radius_rejects_non_self_adjoint():
    space = go.NetworkSpace.uniform(3)
    bad = go.GraphopOperator(space, np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]))
    with pytest.raises(SelfAdjointnessError):
        go.numerical_radius(bad)


def test_numerical_radius_warns_without_convergence():
    A = go.power_law_graphop(go.PowerLawParams(0.4), 64)
    M = A.matrix + 0.01 * np.random.default_rng(1).random((64, 64))
    M = (M + M.T) / 2
    op = go.GraphopOperator(A.space, M)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        go.numerical_radius(op, max_iter=1)
    assert any(issubclass(w.category, ConvergenceWarning) for w in rec)


def test_norm_infty_to_1_requires_positivity():
    space = go.NetworkSpace.uniform(2)
    neg = go.GraphopOperator(space, np.array([[0.0, -1.0], [-1.0, 0.0]]))
    assert not go.is_positivity_preserving(neg)
    with pytest.raises(InvalidParameterError):
        go.norm_infty_to_1(neg)


def test_probes_on_constructions(sphere):
    ops = [go.constant_graphon(0.3, go.NetworkSpace.uniform(8)),
           go.power_law_graphop(go.PowerLawParams(0.25), 32),
           go.empirical_graphop(generate_erdos_renyi(40, 0.5, seed=2)), sphere]
    for A in ops:
        assert go.probe_linearity(A) < 1e-10
        assert go.probe_positivity(A) >= -1e-12
        assert go.probe_self_adjoint(A) < 1e-10


def test_edge_list_roundtrip(tmp_path):
    adj = generate_erdos_renyi(30, 0.2, seed=5)
    path = tmp_path / "g.txt"
    go.write_edge_list(path, adj)
    back = go.read_edge_list(path, n_nodes=30)
    np.testing.assert_array_equal(back, adj)


def test_edge_list_errors_name_the_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# header\n0 1\n2 2\n")
    with pytest.raises(ValueError, match=":3:"):
        go.read_edge_list(path)
    path.write_text("0 1 2\n")
    with pytest.raises(ValueError, match=":1:"):
        go.read_edge_list(path)


def test_kernel_csv_roundtrip(tmp_path):
    _, W = go.power_law_graphon(go.PowerLawParams(0.3), 12)
    path = tmp_path / "w.csv"
    go.write_kernel_csv(path, W)
    np.testing.assert_array_equal(go.read_kernel_csv(path).values, W.values)


def test_radius_of_bipartite_kernel():
    # spectrum {+1/2, -1/2}: plain power iteration oscillates between the two
    space = go.NetworkSpace.uniform(2)
    A = go.graphon_operator([[0.0, 1.0], [1.0, 0.0]], space)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert go.numerical_radius(A) == pytest.approx(0.5, rel=1e-12)
        assert go.operator_norm(A) == pytest.approx(0.5, rel=1e-12)
