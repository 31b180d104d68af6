import numpy as np

from smishfuse import nn


def _fd_grad(f, x, eps=1e-6):
    """Central finite differences of a scalar function over a flat vector."""
    g = np.zeros_like(x)
    for i in range(x.size):
        up, down = x.copy(), x.copy()
        up[i] += eps
        down[i] -= eps
        g[i] = (f(up) - f(down)) / (2 * eps)
    return g


def _rel_err(a, b):
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / denom


def test_sigmoid_matches_definition_and_is_stable():
    z = np.array([-800.0, -5.0, 0.0, 5.0, 800.0])
    out = nn.sigmoid(z)
    assert np.all((out >= 0) & (out <= 1))
    mid = np.linspace(-20, 20, 41)
    assert np.allclose(nn.sigmoid(mid), 1 / (1 + np.exp(-mid)), atol=1e-12)
    assert out[0] == 0.0 or out[0] < 1e-300
    assert out[-1] == 1.0


def test_bce_matches_direct_formula():
    rng = np.random.default_rng(0)
    z = rng.standard_normal(50)
    y = rng.integers(0, 2, 50).astype(float)
    loss, dz = nn.bce_with_logits(z, y)
    p = 1 / (1 + np.exp(-z))
    direct = -(y * np.log(p) + (1 - y) * np.log(1 - p)).mean()
    assert abs(loss - direct) < 1e-12
    fd = _fd_grad(lambda zz: nn.bce_with_logits(zz, y)[0], z)
    assert _rel_err(dz, fd) < 1e-7


def test_bce_stable_at_extreme_logits():
    z = np.array([-1000.0, 1000.0])
    y = np.array([0.0, 1.0])
    loss, dz = nn.bce_with_logits(z, y)
    assert np.isfinite(loss) and loss < 1e-6
    assert np.all(np.isfinite(dz))


def test_conv1d_forward_matches_naive_loop():
    rng = np.random.default_rng(1)
    B, T, D, F, width = 2, 7, 3, 4, 3
    X = rng.standard_normal((B, T, D))
    W = rng.standard_normal((width * D, F))
    b = rng.standard_normal(F)
    Z, _ = nn.conv1d_forward(X, W, b, width)
    assert Z.shape == (B, T - width + 1, F)
    for i in range(B):
        for t in range(T - width + 1):
            window = X[i, t : t + width, :].reshape(-1)
            assert np.allclose(Z[i, t], window @ W + b, atol=1e-12)


def test_conv1d_backward_matches_finite_differences():
    rng = np.random.default_rng(2)
    B, T, D, F, width = 2, 6, 2, 3, 3
    X = rng.standard_normal((B, T, D))
    W = rng.standard_normal((width * D, F))
    b = rng.standard_normal(F)
    G = rng.standard_normal((B, T - width + 1, F))  # upstream cotangent

    def loss_wrt(which, flat):
        Xl, Wl, bl = X, W, b
        if which == "X":
            Xl = flat.reshape(X.shape)
        elif which == "W":
            Wl = flat.reshape(W.shape)
        else:
            bl = flat.reshape(b.shape)
        Z, _ = nn.conv1d_forward(Xl, Wl, bl, width)
        return float((Z * G).sum())

    Z, win = nn.conv1d_forward(X, W, b, width)
    dX, dW, db = nn.conv1d_backward(G, win, W, X.shape, width)
    assert _rel_err(dX.ravel(), _fd_grad(lambda f: loss_wrt("X", f), X.ravel())) < 1e-6
    assert _rel_err(dW.ravel(), _fd_grad(lambda f: loss_wrt("W", f), W.ravel())) < 1e-6
    assert _rel_err(db.ravel(), _fd_grad(lambda f: loss_wrt("b", f), b.ravel())) < 1e-6


def test_global_max_pool_and_backward():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((3, 5, 4))
    pooled, amax = nn.global_max_pool(A)
    assert np.allclose(pooled, A.max(axis=1))
    dP = rng.standard_normal(pooled.shape)
    dA = nn.global_max_pool_backward(dP, amax, A.shape)
    fd = _fd_grad(
        lambda flat: float((nn.global_max_pool(flat.reshape(A.shape))[0] * dP).sum()),
        A.ravel(),
    )
    assert _rel_err(dA.ravel(), fd) < 1e-6


def test_dropout_mask_properties():
    rng = np.random.default_rng(4)
    assert np.all(nn.dropout_mask((5, 5), 0.0, rng) == 1.0)
    mask = nn.dropout_mask((200, 200), 0.3, rng)
    values = np.unique(mask)
    assert set(np.round(values, 12)) <= {0.0, round(1 / 0.7, 12)}
    assert abs(mask.mean() - 1.0) < 0.02


def test_adam_single_step_by_hand():
    params = {"w": np.array([1.0])}
    grads = {"w": np.array([0.5])}
    opt = nn.Adam(params, lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
    opt.step(params, grads)
    m_hat = (0.1 * 0.5) / (1 - 0.9)
    v_hat = (0.001 * 0.25) / (1 - 0.999)
    expected = 1.0 - 0.1 * m_hat / (np.sqrt(v_hat) + 1e-8)
    assert abs(params["w"][0] - expected) < 1e-12


def test_adam_descends_quadratic():
    params = {"w": np.array([5.0, -3.0])}
    opt = nn.Adam(params, lr=0.05)
    for _ in range(500):
        opt.step(params, {"w": 2 * params["w"]})
    assert np.all(np.abs(params["w"]) < 0.1)


def test_flatten_round_trip():
    rng = np.random.default_rng(5)
    params = {"b": rng.standard_normal(3), "a": rng.standard_normal((2, 4))}
    flat, spec = nn.flatten_params(params)
    assert flat.size == 11
    back = nn.unflatten_params(flat, spec)
    assert set(back) == set(params)
    for k in params:
        assert np.array_equal(back[k], params[k])


def test_snap_float32_idempotent_and_lossless_through_f4():
    rng = np.random.default_rng(6)
    params = {"w": rng.standard_normal((4, 4))}
    snapped = nn.snap_float32(params)
    again = nn.snap_float32(snapped)
    assert np.array_equal(snapped["w"], again["w"])
    assert np.array_equal(
        snapped["w"], snapped["w"].astype(np.float32).astype(np.float64)
    )
