"""Property suites over random models, graphs and permutations."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from gnn_zero_one.models import ARCHS, Model, apply_layer, forward, init_model
from gnn_zero_one.numerics import KINDS, Nonlinearity, classify, init_classifier, mlp_logit
from gnn_zero_one.oracle import check_sync_saturating, limit_sum
from gnn_zero_one.rng import RngState, derive_rng
from gnn_zero_one.sampling import Graph, sample_er

FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

seeds = st.integers(0, 2**32 - 1)
archs = st.sampled_from(ARCHS)


def random_instance(seed, n, r, arch, dims, sigma="clipped_identity"):
    rng = derive_rng(seed, (1,))
    g = sample_er(n, r, rng)
    X = derive_rng(seed, (2,)).uniform((dims[0], n))
    m = init_model(arch, dims, Nonlinearity(sigma), rng=derive_rng(seed, (3,)))
    return g, X, m


# ---------------------------------------------------------------------------
# naive dense reference, neighbours visited in ascending order


def naive_layer(m: Model, L, A: np.ndarray, X: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    deg = A.sum(axis=1)
    out = np.zeros((L.out_dim, n))
    total = sum(X[:, u] for u in range(n))
    for v in range(n):
        nb = [u for u in range(n) if A[v, u]]
        closed = sorted(nb + [v])
        if m.arch == "gcn":
            agg = sum(X[:, u] / np.sqrt((deg[u] + 1) * (deg[v] + 1)) for u in closed)
            y = L.W_n @ agg + L.b
        elif m.arch in ("mean", "mean_plus"):
            y = L.W_n @ (sum(X[:, u] for u in closed) / len(closed)) + L.b
            if L.W_r is not None:
                y = y + L.W_r @ (total / n)
        elif m.arch in ("sum", "sum_plus"):
            s = sum((X[:, u] for u in nb), np.zeros(X.shape[0]))
            y = L.W_s @ X[:, v] + L.W_n @ s + L.b
            if L.W_r is not None:
                y = y + L.W_r @ total
        else:
            H = L.W_n @ X
            d = L.out_dim
            e = np.array([L.a[:d] @ H[:, v] + L.a[d:] @ H[:, u] for u in closed])
            e = np.where(e > 0, e, L.slope * e)
            w = np.exp(e - e.max())
            w /= w.sum()
            y = sum(wi * H[:, u] for wi, u in zip(w, closed)) + L.b
        out[:, v] = m.sigma(y)
    return out


@FAST
@given(seed=seeds, n=st.integers(1, 32), r=st.floats(0, 1), arch=archs, d_in=st.integers(1, 4),
       d_out=st.integers(1, 4))
def test_layers_match_dense_reference(seed, n, r, arch, d_in, d_out):
    g, X, m = random_instance(seed, n, r, arch, [d_in, d_out], "identity")
    A = g.dense()
    got = apply_layer(m, m.layers[0], g, X)
    want = naive_layer(m, m.layers[0], A, X)
    assert np.max(np.abs(got - want)) <= 1e-12


@FAST
@given(seed=seeds, n=st.integers(1, 40), arch=archs, pooling=st.sampled_from(["mean", "sum", "max"]),
       data=st.data())
def test_isomorphism_invariance(seed, n, arch, pooling, data):
    g, X, m = random_instance(seed, n, 0.5, arch, [3, 4, 4])
    m = Model(m.arch, m.layers, m.sigma, pooling)
    perm = np.array(data.draw(st.permutations(range(n))), dtype=np.int64)
    Xp = np.empty_like(X)
    Xp[:, perm] = X
    a = forward(m, g, X).pooled
    b = forward(m, g.permuted(perm), Xp).pooled
    assert np.all(np.abs(a - b) <= 1e-9 * np.maximum(1.0, np.abs(a)))


@FAST
@given(seed=seeds, n=st.integers(1, 60), arch=archs, cap=st.floats(0.1, 5))
def test_clipped_outputs_stay_in_range(seed, n, arch, cap):
    g, X, m = random_instance(seed, n, 0.5, arch, [2, 5, 5])
    for e in forward(m, g, X).embeddings[1:]:
        assert e.min() >= -1 and e.max() <= 1
    m2 = Model(m.arch, m.layers, Nonlinearity("clipped_relu", cap), m.pooling)
    for e in forward(m2, g, X).embeddings[1:]:
        assert e.min() >= 0 and e.max() <= cap


def test_lipschitz_constants():
    rng = RngState(17)
    x, y = rng.uniform(10_000, -10, 10), rng.uniform(10_000, -10, 10)
    for k in KINDS:
        s = Nonlinearity(k, 2.0)
        assert np.all(np.abs(s(x) - s(y)) <= s.lipschitz * np.abs(x - y) + 1e-15)


def test_sigmoid_range():
    s = Nonlinearity("sigmoid")
    x = RngState(1).uniform(10_000, -30, 30)
    assert np.all((s(x) > 0) & (s(x) < 1))


@FAST
@given(seed=seeds, d=st.integers(1, 6), k=st.integers(1, 20))
def test_classify_iff_positive_logit(seed, d, k):
    c = init_classifier(d, derive_rng(seed, (1,)))
    V = derive_rng(seed, (2,)).uniform((d, k), -2, 2)
    assert np.array_equal(classify(c, V) == 1, mlp_logit(c, V) > 0)


@FAST
@given(seed=seeds, lam=st.floats(1e-3, 1e3), plus=st.booleans(), r=st.floats(0.01, 1))
def test_sign_recurrence_is_scale_free(seed, lam, plus, r):
    m = init_model("sum_plus" if plus else "sum", [4, 5, 3], rng=derive_rng(seed))
    mu = derive_rng(seed, (1,)).uniform(4)
    a, b = limit_sum(m, r, mu), limit_sum(m, r, lam * mu)
    if a.verdict == "ok" or a.locus[0] > 1:
        assert np.array_equal(a.vectors[1], b.vectors[1])


@FAST
@given(seed=seeds, dims=st.lists(st.integers(1, 6), min_size=2, max_size=4), r=st.floats(0, 1))
def test_exhaustive_implies_trajectory(seed, dims, r):
    m = init_model("sum_plus", dims, rng=derive_rng(seed))
    mu = derive_rng(seed, (1,)).uniform(dims[0])
    if check_sync_saturating(m, r, mu, mode="exhaustive")[0]:
        assert check_sync_saturating(m, r, mu, mode="trajectory")[0]


def complete_graph_saturation_n0(m, mu, cap=1 << 16):
    """Smallest doubling n (from 1) at which forward on K_n equals the r = 1 corners."""
    z = limit_sum(m, 1.0, mu).vectors
    n = 1
    while n <= cap:
        tr = forward(m, Graph.complete(n), np.tile(mu[:, None], n))
        if all(np.array_equal(e, np.tile(v[:, None], n)) for e, v in zip(tr.embeddings[1:], z[1:])):
            return n
        n *= 2
    return None


@settings(max_examples=15, deadline=None)
@given(seed=seeds)
def test_sum_complete_graph_matches_corners(seed):
    m = init_model("sum", [3, 4, 4], rng=derive_rng(seed))
    mu = derive_rng(seed, (1,)).uniform(3)
    if limit_sum(m, 1.0, mu).verdict != "ok":
        return
    n0 = complete_graph_saturation_n0(m, mu)
    assert n0 is not None
    for n in (n0, 2 * n0, 4 * n0):
        tr = forward(m, Graph.complete(n), np.tile(mu[:, None], n))
        for e, v in zip(tr.embeddings[1:], limit_sum(m, 1.0, mu).vectors[1:]):
            assert np.array_equal(e, np.tile(v[:, None], n))


@FAST
@given(seed=seeds, n=st.integers(1, 200), r=st.floats(0, 1))
def test_er_determinism_and_invariants(seed, n, r):
    a = sample_er(n, r, derive_rng(seed, (n,)))
    b = sample_er(n, r, derive_rng(seed, (n,)))
    assert a.bits.tobytes() == b.bits.tobytes()
    A = a.dense()
    assert np.array_equal(A, A.T) and not np.any(np.diag(A))
    assert np.array_equal(A.sum(axis=1), a.degrees)


@FAST
@given(seed=seeds, sizes=st.lists(st.integers(1, 50), min_size=1, max_size=5))
def test_draw_splitting_is_consistent(seed, sizes):
    a, b = RngState(seed, 3), RngState(seed, 3)
    parts = np.concatenate([a.u64(k) for k in sizes])
    assert np.array_equal(parts, b.u64(sum(sizes)))
