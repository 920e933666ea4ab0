import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surgassist.mop import (
    ConfigError,
    MopConfig,
    MopParams,
    ProjectorParams,
    RouterParams,
    ShapeError,
    gelu,
    init_params,
    mop_backward,
    mop_forward,
    nll_loss,
    projector_forward,
    route,
    router_utilization,
)

# Frozen from a 40-digit erf evaluation (mpmath) before the implementation.
GELU_AT_1 = 0.8413447460685429485852325
GELU_AT_MINUS_1 = -0.1586552539314570514147675
# Two-way softmax over logits [2, 1]: e/(e+1) and 1/(e+1).
SOFTMAX2_HI = 0.7310585786300048792511592
SOFTMAX2_LO = 0.2689414213699951207488408
# -log softmax([1,2,3])[2] = log(1 + e^-1 + e^-2), hand-computed.
NLL_PINNED = 0.4076059644443803044829199


def small_cfg(**overrides):
    base = dict(
        n_projectors=4,
        top_k=2,
        c_in=3,
        hidden=4,
        c_out=2,
        router_hidden=3,
        noise_sigma=0.0,
        mode="training",
    )
    base.update(overrides)
    return MopConfig(**base)


class TestGelu:
    def test_zero(self):
        assert gelu(0.0) == 0.0

    def test_large_positive_is_identity(self):
        assert gelu(10.0) == pytest.approx(10.0, abs=1e-9)

    def test_pinned_value(self):
        assert gelu(1.0) == pytest.approx(GELU_AT_1, abs=1e-12)
        assert gelu(-1.0) == pytest.approx(GELU_AT_MINUS_1, abs=1e-12)

    def test_vectorized(self):
        xs = np.array([0.0, 1.0, -1.0])
        out = gelu(xs)
        assert out[0] == 0.0
        assert out[1] == pytest.approx(GELU_AT_1, abs=1e-12)


class TestProjectorForward:
    def test_zero_weights_zero_output(self):
        p = ProjectorParams(
            w1=np.zeros((3, 4)), b1=np.zeros(4), w2=np.zeros((4, 2)), b2=np.zeros(2)
        )
        tokens = np.arange(6.0).reshape(2, 3)
        out = projector_forward(tokens, p)
        assert out.shape == (2, 2)
        assert np.all(out == 0.0)

    def test_identity_weights_apply_gelu(self):
        p = ProjectorParams(
            w1=np.eye(2), b1=np.zeros(2), w2=np.eye(2), b2=np.zeros(2)
        )
        out = projector_forward(np.array([[1.0, -1.0]]), p)
        assert out[0, 0] == pytest.approx(GELU_AT_1, abs=1e-12)
        assert out[0, 1] == pytest.approx(GELU_AT_MINUS_1, abs=1e-12)

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(3)
        p = ProjectorParams(
            w1=rng.normal(size=(3, 5)),
            b1=rng.normal(size=5),
            w2=rng.normal(size=(5, 2)),
            b2=rng.normal(size=2),
        )
        tokens = rng.normal(size=(4, 3))
        out = projector_forward(tokens, p)

        # Scalar-loop re-implementation as the oracle.
        expected = np.zeros((4, 2))
        for t in range(4):
            hidden = []
            for j in range(5):
                acc = p.b1[j]
                for i in range(3):
                    acc += tokens[t, i] * p.w1[i, j]
                hidden.append(gelu(acc))
            for o in range(2):
                acc = p.b2[o]
                for j in range(5):
                    acc += hidden[j] * p.w2[j, o]
                expected[t, o] = acc
        np.testing.assert_allclose(out, expected, rtol=0, atol=1e-12)

    def test_shape_mismatch_names_dimension(self):
        p = ProjectorParams(
            w1=np.zeros((3, 4)), b1=np.zeros(4), w2=np.zeros((4, 2)), b2=np.zeros(2)
        )
        with pytest.raises(ShapeError, match="c_in=3"):
            projector_forward(np.zeros((2, 5)), p)


def forced_logit_router(logits_row, c_in):
    """Router whose logits equal a constant row regardless of input."""
    n = len(logits_row)
    return RouterParams(
        wr1=np.zeros((c_in, 1)),
        br1=np.zeros(1),
        wr2=np.zeros((1, n)),
        br2=np.asarray(logits_row, dtype=float),
    )


class TestRoute:
    def test_hand_computed_two_way_softmax(self):
        cfg = small_cfg(n_projectors=4, top_k=2)
        r = forced_logit_router([2.0, 1.0, 0.0, -1.0], cfg.c_in)
        decision = route(np.zeros((1, 3)), r, cfg, rng_seed=0)
        np.testing.assert_array_equal(decision.selected, [[0, 1]])
        assert decision.weights[0, 0] == pytest.approx(SOFTMAX2_HI, abs=1e-12)
        assert decision.weights[0, 1] == pytest.approx(SOFTMAX2_LO, abs=1e-12)
        assert decision.weights[0, 2] == 0.0
        assert decision.weights[0, 3] == 0.0

    def test_equal_logits_full_k_uniform(self):
        cfg = small_cfg(n_projectors=4, top_k=4)
        r = forced_logit_router([1.0, 1.0, 1.0, 1.0], cfg.c_in)
        decision = route(np.zeros((3, 3)), r, cfg, rng_seed=0)
        np.testing.assert_allclose(decision.weights, 0.25, atol=1e-12)

    def test_tie_break_lowest_index(self):
        cfg = small_cfg(n_projectors=4, top_k=2)
        r = forced_logit_router([1.0, 1.0, 1.0, 0.0], cfg.c_in)
        decision = route(np.zeros((1, 3)), r, cfg, rng_seed=0)
        np.testing.assert_array_equal(decision.selected, [[0, 1]])

    def test_noisy_routing_deterministic_per_seed(self):
        cfg = small_cfg(n_projectors=8, top_k=2, noise_sigma=1.0, c_in=4)
        params = init_params(cfg, seed=11)
        tokens = np.random.default_rng(5).normal(size=(6, 4))
        a = route(tokens, params.router, cfg, rng_seed=42)
        b = route(tokens, params.router, cfg, rng_seed=42)
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.selected, b.selected)

    def test_noise_off_at_inference(self):
        cfg = small_cfg(n_projectors=8, top_k=2, noise_sigma=1.0, c_in=4, mode="inference")
        params = init_params(cfg, seed=11)
        tokens = np.random.default_rng(5).normal(size=(6, 4))
        a = route(tokens, params.router, cfg, rng_seed=1)
        b = route(tokens, params.router, cfg, rng_seed=999)
        np.testing.assert_array_equal(a.weights, b.weights)

    def test_k_above_n_rejected_at_config(self):
        with pytest.raises(ConfigError):
            small_cfg(n_projectors=2, top_k=3)


def dense_mixture_oracle(tokens, params):
    """Dense softmax mixture over all projectors (no selection)."""
    from surgassist.mop import router_logits

    logits = router_logits(tokens, params.router)
    shifted = logits - logits.max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    weights /= weights.sum(axis=1, keepdims=True)
    out = np.zeros((tokens.shape[0], params.projectors[0].w2.shape[1]))
    for j, p in enumerate(params.projectors):
        out += weights[:, j][:, None] * projector_forward(tokens, p)
    return out


class TestMopForward:
    def test_single_projector_equals_projector_forward(self):
        cfg = small_cfg(n_projectors=1, top_k=1)
        params = init_params(cfg, seed=2)
        tokens = np.random.default_rng(0).normal(size=(5, 3))
        out, decision = mop_forward(tokens, params, cfg, rng_seed=0)
        np.testing.assert_allclose(
            out, projector_forward(tokens, params.projectors[0]), atol=1e-12
        )
        assert np.all(decision.weights == 1.0)

    def test_full_k_matches_dense_oracle(self):
        cfg = small_cfg(n_projectors=4, top_k=4)
        params = init_params(cfg, seed=7)
        tokens = np.random.default_rng(1).normal(size=(6, 3))
        out, _ = mop_forward(tokens, params, cfg, rng_seed=0)
        np.testing.assert_allclose(out, dense_mixture_oracle(tokens, params), atol=1e-9)

    def test_equal_logits_average_two_linear_maps(self):
        cfg = small_cfg(n_projectors=2, top_k=2, c_in=2, hidden=2, c_out=2, router_hidden=2)
        # Two projectors acting as scaled identities on the gelu-transformed input.
        map_a = ProjectorParams(np.eye(2), np.zeros(2), 2.0 * np.eye(2), np.zeros(2))
        map_b = ProjectorParams(np.eye(2), np.zeros(2), 4.0 * np.eye(2), np.zeros(2))
        params = MopParams(
            projectors=[map_a, map_b], router=forced_logit_router([0.0, 0.0], 2)
        )
        tokens = np.array([[1.0, 2.0], [0.5, -0.5]])
        out, _ = mop_forward(tokens, params, cfg, rng_seed=0)
        expected = 0.5 * (
            projector_forward(tokens, map_a) + projector_forward(tokens, map_b)
        )
        np.testing.assert_allclose(out, expected, atol=1e-12)


class TestNllLoss:
    def test_uniform_logits_give_log_vocab(self):
        logits = np.zeros((5, 7))
        loss = nll_loss(logits, [0, 1, 2, 3, 4])
        assert loss.per_token_mean == pytest.approx(np.log(7), abs=1e-12)
        assert loss.total == pytest.approx(5 * np.log(7), abs=1e-12)

    def test_pinned_hand_softmax(self):
        loss = nll_loss(np.array([[1.0, 2.0, 3.0]]), [2])
        assert loss.total == pytest.approx(NLL_PINNED, abs=1e-12)

    def test_loss_decreases_with_correct_logit_margin(self):
        margins = [0.0, 1.0, 5.0, 20.0]
        losses = []
        for m in margins:
            loss = nll_loss(np.array([[m, 0.0, 0.0]]), [0])
            losses.append(loss.total)
        assert all(a > b for a, b in zip(losses, losses[1:]))
        assert losses[-1] < 1e-8

    def test_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            logits = rng.normal(size=(4, 5))
            targets = rng.integers(0, 5, size=4)
            assert nll_loss(logits, targets).total >= 0.0

    def test_rejects_empty_and_out_of_range(self):
        with pytest.raises(ValueError):
            nll_loss(np.zeros((0, 3)), [])
        with pytest.raises(ValueError):
            nll_loss(np.zeros((1, 3)), [3])


class TestMopBackward:
    def test_zero_upstream_zero_grads(self):
        cfg = small_cfg()
        params = init_params(cfg, seed=4)
        tokens = np.random.default_rng(2).normal(size=(3, 3))
        grads = mop_backward(tokens, params, cfg, rng_seed=0, upstream=np.zeros((3, 2)))
        for g in grads.projectors:
            assert np.all(g.w1 == 0) and np.all(g.w2 == 0)
        assert np.all(grads.router.wr1 == 0)
        assert np.all(grads.d_input == 0)

    def test_never_selected_projector_has_zero_grads(self):
        cfg = small_cfg(n_projectors=3, top_k=1)
        params = init_params(cfg, seed=9)
        # Force all rows onto projector 0.
        params.router = forced_logit_router([5.0, 0.0, 0.0], cfg.c_in)
        tokens = np.random.default_rng(8).normal(size=(4, 3))
        upstream = np.ones((4, 2))
        grads = mop_backward(tokens, params, cfg, rng_seed=0, upstream=upstream)
        for j in (1, 2):
            assert np.all(grads.projectors[j].w1 == 0)
            assert np.all(grads.projectors[j].b1 == 0)
            assert np.all(grads.projectors[j].w2 == 0)
            assert np.all(grads.projectors[j].b2 == 0)
        assert np.any(grads.projectors[0].w1 != 0)

    def test_upstream_shape_checked(self):
        cfg = small_cfg()
        params = init_params(cfg, seed=4)
        tokens = np.zeros((3, 3))
        with pytest.raises(ShapeError):
            mop_backward(tokens, params, cfg, rng_seed=0, upstream=np.zeros((3, 5)))

    def test_matches_finite_differences(self):
        from surgassist.mop import gradient_check

        report = gradient_check(n_configs=4, seed=123)
        assert report.max_rel_error <= 1e-4, report.per_config


class TestRouterUtilization:
    def test_all_rows_one_projector(self):
        cfg = small_cfg(n_projectors=2, top_k=1)
        r = forced_logit_router([3.0, 0.0], cfg.c_in)
        d = route(np.zeros((5, 3)), r, cfg, rng_seed=0)
        np.testing.assert_allclose(router_utilization([d]), [1.0, 0.0])

    def test_sums_to_one(self):
        cfg = small_cfg(n_projectors=4, top_k=2, noise_sigma=1.0)
        params = init_params(cfg, seed=0)
        tokens = np.random.default_rng(3).normal(size=(10, 3))
        decisions = [route(tokens, params.router, cfg, rng_seed=s) for s in range(5)]
        hist = router_utilization(decisions)
        assert hist.sum() == pytest.approx(1.0, abs=1e-12)

    def test_uniform_router_large_sample_near_k_over_n(self):
        # Identity router on zero tokens: logits are iid noise, so selection
        # is uniform and each projector's share tends to K/N (= 1/N at K=1).
        cfg = small_cfg(n_projectors=4, top_k=1, noise_sigma=1.0, c_in=4, router_hidden=4)
        r = RouterParams(
            wr1=np.eye(4), br1=np.zeros(4), wr2=np.eye(4), br2=np.zeros(4)
        )
        decisions = [
            route(np.zeros((50, 4)), r, cfg, rng_seed=s) for s in range(100)
        ]
        hist = router_utilization(decisions)
        np.testing.assert_allclose(hist, 0.25, atol=0.05)


# --- invariants as property tests -------------------------------------------

config_strategy = st.builds(
    lambda n, k_frac, ci, h, co, rh: MopConfig(
        n_projectors=n,
        top_k=max(1, min(n, int(round(k_frac * n)))),
        c_in=ci,
        hidden=h,
        c_out=co,
        router_hidden=rh,
        noise_sigma=0.0,
        mode="training",
    ),
    n=st.integers(1, 8),
    k_frac=st.floats(0.1, 1.0),
    ci=st.integers(1, 5),
    h=st.integers(1, 5),
    co=st.integers(1, 5),
    rh=st.integers(1, 5),
)


@settings(max_examples=60, deadline=None)
@given(cfg=config_strategy, seed=st.integers(0, 2**31 - 1), rows=st.integers(1, 6))
def test_routing_simplex_property(cfg, seed, rows):
    rng = np.random.default_rng(seed)
    params = init_params(cfg, seed=seed)
    tokens = rng.normal(size=(rows, cfg.c_in))
    d = route(tokens, params.router, cfg, rng_seed=seed)
    n, k = cfg.n_projectors, cfg.top_k
    for row in d.weights:
        assert np.sum(row == 0.0) == n - k
        assert np.all(row >= 0.0)
        assert abs(row.sum() - 1.0) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    scale=st.floats(0.1, 50.0),
    rows=st.integers(1, 4),
)
def test_topk_selection_scale_invariant(seed, scale, rows):
    # Scaling a row's logits by a positive constant keeps the selected set.
    cfg = small_cfg(n_projectors=5, top_k=2, c_in=2, router_hidden=2)
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=5)
    r1 = forced_logit_router(logits, cfg.c_in)
    r2 = forced_logit_router(scale * logits, cfg.c_in)
    tokens = np.zeros((rows, 2))
    d1 = route(tokens, r1, cfg, rng_seed=0)
    d2 = route(tokens, r2, cfg, rng_seed=0)
    np.testing.assert_array_equal(d1.selected, d2.selected)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), rows=st.integers(2, 6))
def test_token_permutation_equivariance(seed, rows):
    cfg = small_cfg(n_projectors=4, top_k=2)
    params = init_params(cfg, seed=seed)
    rng = np.random.default_rng(seed)
    tokens = rng.normal(size=(rows, cfg.c_in))
    perm = rng.permutation(rows)
    out, _ = mop_forward(tokens, params, cfg, rng_seed=0)
    out_p, _ = mop_forward(tokens[perm], params, cfg, rng_seed=0)
    np.testing.assert_allclose(out_p, out[perm], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_dense_sparse_equivalence_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    cfg = small_cfg(n_projectors=n, top_k=n)
    params = init_params(cfg, seed=seed)
    tokens = rng.normal(size=(4, cfg.c_in))
    out, _ = mop_forward(tokens, params, cfg, rng_seed=0)
    np.testing.assert_allclose(out, dense_mixture_oracle(tokens, params), atol=1e-9)
