"""Finite-difference verification of the analytic gradients.

The oracle only ever calls the forward pass: every parameter and input entry
is perturbed by +/-h and the scalar probe loss sum(upstream * output) is
re-evaluated. Run with sigma = 0 so the top-K mask is stable under the
perturbation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Array, MopConfig, MopParams, init_params, mop_backward, mop_forward


def _probe_loss(
    tokens: Array, params: MopParams, cfg: MopConfig, seed: int, upstream: Array
) -> float:
    out, _ = mop_forward(tokens, params, cfg, seed)
    return float(np.sum(upstream * out))


def _fd_entry(get, set_, tokens, params, cfg, seed, upstream, h):
    orig = get()
    set_(orig + h)
    plus = _probe_loss(tokens, params, cfg, seed, upstream)
    set_(orig - h)
    minus = _probe_loss(tokens, params, cfg, seed, upstream)
    set_(orig)
    return (plus - minus) / (2.0 * h)


def _max_rel_error(analytic: Array, numeric: Array) -> float:
    denom = np.maximum(1e-6, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def compare_grads(
    tokens: Array,
    params: MopParams,
    cfg: MopConfig,
    seed: int,
    upstream: Array,
    h: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients."""
    grads = mop_backward(tokens, params, cfg, seed, upstream)
    worst = 0.0

    def check_matrix(mat: Array, analytic: Array) -> None:
        nonlocal worst
        numeric = np.zeros_like(mat)
        it = np.nditer(mat, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            numeric[idx] = _fd_entry(
                lambda: mat[idx],
                lambda v: mat.__setitem__(idx, v),
                tokens,
                params,
                cfg,
                seed,
                upstream,
                h,
            )
            it.iternext()
        worst = max(worst, _max_rel_error(analytic, numeric))

    for p, g in zip(params.projectors, grads.projectors):
        check_matrix(p.w1, g.w1)
        check_matrix(p.b1, g.b1)
        check_matrix(p.w2, g.w2)
        check_matrix(p.b2, g.b2)
    check_matrix(params.router.wr1, grads.router.wr1)
    check_matrix(params.router.br1, grads.router.br1)
    check_matrix(params.router.wr2, grads.router.wr2)
    check_matrix(params.router.br2, grads.router.br2)
    check_matrix(tokens, grads.d_input)
    return worst


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_config: list[tuple[str, float]]


def gradient_check(
    n_configs: int = 10, seed: int = 0, h: float = 1e-5, max_dim: int = 6
) -> GradCheckReport:
    """Run ``compare_grads`` over randomized small configurations (sigma=0)."""
    rng = np.random.default_rng(seed)
    rows = []
    worst = 0.0
    for i in range(n_configs):
        n = int(rng.choice([1, 2, 4, 8]))
        k = int(rng.integers(1, n + 1))
        cfg = MopConfig(
            n_projectors=n,
            top_k=k,
            c_in=int(rng.integers(2, max_dim + 1)),
            hidden=int(rng.integers(2, max_dim + 1)),
            c_out=int(rng.integers(2, max_dim + 1)),
            router_hidden=int(rng.integers(2, max_dim + 1)),
            noise_sigma=0.0,
            mode="training",
        )
        n_rows = int(rng.integers(1, 6))
        params = init_params(cfg, seed=int(rng.integers(0, 2**31)))
        tokens = rng.normal(0.0, 1.0, size=(n_rows, cfg.c_in))
        upstream = rng.normal(0.0, 1.0, size=(n_rows, cfg.c_out))
        err = compare_grads(tokens, params, cfg, seed=0, upstream=upstream, h=h)
        label = f"config {i}: N={n} K={k} dims=({cfg.c_in},{cfg.hidden},{cfg.c_out})"
        rows.append((label, err))
        worst = max(worst, err)
    return GradCheckReport(max_rel_error=worst, per_config=rows)
