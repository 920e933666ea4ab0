"""Sparse mixture-of-projectors alignment layer.

N parallel two-layer GeLU MLPs ("projectors") map visual token embeddings
(L x c_in) into a target embedding space (L x c_out). A small router MLP
scores every projector per token; the top K logits are kept (ties broken by
lowest index), softmaxed among themselves, and the selected projector
outputs are combined with those weights. Gaussian noise is added to the
router input in training mode only.

Everything here is plain float64 numpy with hand-written reverse-mode
gradients; the top-K selection mask is held fixed during differentiation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import erf

Array = np.ndarray

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


class ShapeError(ValueError):
    """Raised when an input dimension disagrees with the configured one."""


class ConfigError(ValueError):
    """Raised for invalid layer hyperparameters."""


def gelu(x):
    """Exact GeLU: x * Phi(x) with Phi the standard normal CDF (erf form)."""
    x = np.asarray(x, dtype=np.float64)
    out = x * 0.5 * (1.0 + erf(x * _INV_SQRT2))
    if out.ndim == 0:
        return float(out)
    return out


def gelu_grad(x):
    """d/dx of exact GeLU: Phi(x) + x * pdf(x)."""
    x = np.asarray(x, dtype=np.float64)
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
    out = cdf + x * pdf
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class MopConfig:
    """Hyperparameters of the layer.

    ``noise_sigma`` perturbs the router input only, and only when
    ``mode == "training"``; inference is always noise-free.
    """

    n_projectors: int
    top_k: int
    c_in: int
    hidden: int
    c_out: int
    router_hidden: int
    noise_sigma: float = 0.0
    mode: str = "training"

    def __post_init__(self):
        if self.n_projectors < 1:
            raise ConfigError(f"n_projectors must be >= 1, got {self.n_projectors}")
        if not (1 <= self.top_k <= self.n_projectors):
            raise ConfigError(
                f"top_k must satisfy 1 <= top_k <= n_projectors "
                f"({self.top_k} vs {self.n_projectors})"
            )
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        for name in ("c_in", "hidden", "c_out", "router_hidden"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.mode not in ("training", "inference"):
            raise ConfigError(f"mode must be 'training' or 'inference', got {self.mode!r}")

    def inference(self) -> "MopConfig":
        return replace(self, mode="inference")


@dataclass
class ProjectorParams:
    """Two-layer MLP: (c_in x hidden) GeLU (hidden x c_out)."""

    w1: Array
    b1: Array
    w2: Array
    b2: Array


@dataclass
class RouterParams:
    """Contribution-scoring MLP: (c_in x router_hidden) GeLU (router_hidden x N)."""

    wr1: Array
    br1: Array
    wr2: Array
    br2: Array


@dataclass
class MopParams:
    projectors: list[ProjectorParams]
    router: RouterParams

    def copy(self) -> "MopParams":
        return MopParams(
            projectors=[
                ProjectorParams(p.w1.copy(), p.b1.copy(), p.w2.copy(), p.b2.copy())
                for p in self.projectors
            ],
            router=RouterParams(
                self.router.wr1.copy(),
                self.router.br1.copy(),
                self.router.wr2.copy(),
                self.router.br2.copy(),
            ),
        )


@dataclass
class RoutingDecision:
    """Per-token routing: dense weight rows with exactly N-K zeros each.

    ``selected`` holds the chosen projector indices per row, ascending.
    """

    weights: Array  # (L, N)
    selected: Array  # (L, K) int64


class MopGrads(NamedTuple):
    projectors: list[ProjectorParams]  # same shapes as params, holding gradients
    router: RouterParams
    d_input: Array


def _uniform_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> Array:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(cfg: MopConfig, seed: int) -> MopParams:
    """Seeded uniform [-a, a] init with a = sqrt(6 / (fan_in + fan_out))."""
    rng = np.random.default_rng(seed)
    projectors = []
    for _ in range(cfg.n_projectors):
        projectors.append(
            ProjectorParams(
                w1=_uniform_init(rng, cfg.c_in, cfg.hidden),
                b1=np.zeros(cfg.hidden),
                w2=_uniform_init(rng, cfg.hidden, cfg.c_out),
                b2=np.zeros(cfg.c_out),
            )
        )
    router = RouterParams(
        wr1=_uniform_init(rng, cfg.c_in, cfg.router_hidden),
        br1=np.zeros(cfg.router_hidden),
        wr2=_uniform_init(rng, cfg.router_hidden, cfg.n_projectors),
        br2=np.zeros(cfg.n_projectors),
    )
    return MopParams(projectors=projectors, router=router)


def zero_grads(cfg: MopConfig, n_rows: int) -> MopGrads:
    projectors = [
        ProjectorParams(
            w1=np.zeros((cfg.c_in, cfg.hidden)),
            b1=np.zeros(cfg.hidden),
            w2=np.zeros((cfg.hidden, cfg.c_out)),
            b2=np.zeros(cfg.c_out),
        )
        for _ in range(cfg.n_projectors)
    ]
    router = RouterParams(
        wr1=np.zeros((cfg.c_in, cfg.router_hidden)),
        br1=np.zeros(cfg.router_hidden),
        wr2=np.zeros((cfg.router_hidden, cfg.n_projectors)),
        br2=np.zeros(cfg.n_projectors),
    )
    return MopGrads(projectors=projectors, router=router, d_input=np.zeros((n_rows, cfg.c_in)))


def _check_input(tokens: Array, c_in: int) -> Array:
    tokens = np.asarray(tokens, dtype=np.float64)
    if tokens.ndim != 2:
        raise ShapeError(f"token matrix must be 2-D, got ndim={tokens.ndim}")
    if tokens.shape[1] != c_in:
        raise ShapeError(
            f"token matrix has {tokens.shape[1]} columns, expected c_in={c_in}"
        )
    if tokens.size and not np.all(np.isfinite(tokens)):
        raise ValueError("token matrix contains non-finite entries")
    return tokens


def projector_forward(tokens: Array, p: ProjectorParams) -> Array:
    """Apply one projector MLP row-wise: gelu(x W1 + b1) W2 + b2."""
    tokens = _check_input(tokens, p.w1.shape[0])
    hidden = gelu(tokens @ p.w1 + p.b1)
    return hidden @ p.w2 + p.b2


def router_logits(tokens: Array, r: RouterParams) -> Array:
    """Raw contribution logits per token, shape (L, N)."""
    tokens = _check_input(tokens, r.wr1.shape[0])
    return gelu(tokens @ r.wr1 + r.br1) @ r.wr2 + r.br2


def _router_noise(cfg: MopConfig, shape: tuple, rng_seed: int) -> Array | None:
    if cfg.mode == "training" and cfg.noise_sigma > 0:
        rng = np.random.default_rng(rng_seed)
        return rng.normal(0.0, cfg.noise_sigma, size=shape)
    return None


def _topk_rows(logits: Array, k: int) -> Array:
    # K largest per row; ties broken by lowest index (stable sort on -logits).
    order = np.argsort(-logits, axis=1, kind="stable")[:, :k]
    order.sort(axis=1)
    return order.astype(np.int64)


def _masked_softmax(logits: Array, selected: Array) -> Array:
    n_rows, n = logits.shape
    weights = np.zeros_like(logits)
    rows = np.arange(n_rows)[:, None]
    chosen = logits[rows, selected]
    chosen = chosen - chosen.max(axis=1, keepdims=True)
    expd = np.exp(chosen)
    weights[rows, selected] = expd / expd.sum(axis=1, keepdims=True)
    return weights


def route(tokens: Array, r: RouterParams, cfg: MopConfig, rng_seed: int) -> RoutingDecision:
    """Score and select projectors for every token row independently.

    Noise (N(0, sigma^2), elementwise, seeded) is added to the router input
    in training mode; the selected logits are softmaxed among themselves and
    all non-selected weights are exactly zero.
    """
    tokens = _check_input(tokens, cfg.c_in)
    noise = _router_noise(cfg, tokens.shape, rng_seed)
    router_in = tokens + noise if noise is not None else tokens
    logits = router_logits(router_in, r)
    selected = _topk_rows(logits, cfg.top_k)
    weights = _masked_softmax(logits, selected)
    return RoutingDecision(weights=weights, selected=selected)


class _ForwardCache(NamedTuple):
    tokens: Array
    router_in: Array
    pre_r: Array  # router hidden pre-activation
    hid_r: Array
    logits: Array
    decision: RoutingDecision
    proj_rows: list[Array]  # row indices handled by each projector
    proj_pre: list[Array | None]  # hidden pre-activation per projector
    proj_hid: list[Array | None]
    proj_out: list[Array | None]
    output: Array


def _forward_cached(
    tokens: Array, params: MopParams, cfg: MopConfig, rng_seed: int
) -> _ForwardCache:
    tokens = _check_input(tokens, cfg.c_in)
    if len(params.projectors) != cfg.n_projectors:
        raise ShapeError(
            f"params hold {len(params.projectors)} projectors, "
            f"config says {cfg.n_projectors}"
        )
    noise = _router_noise(cfg, tokens.shape, rng_seed)
    router_in = tokens + noise if noise is not None else tokens
    pre_r = router_in @ params.router.wr1 + params.router.br1
    hid_r = gelu(pre_r)
    logits = hid_r @ params.router.wr2 + params.router.br2
    selected = _topk_rows(logits, cfg.top_k)
    weights = _masked_softmax(logits, selected)
    decision = RoutingDecision(weights=weights, selected=selected)

    output = np.zeros((tokens.shape[0], cfg.c_out))
    proj_rows: list[Array] = []
    proj_pre: list[Array | None] = []
    proj_hid: list[Array | None] = []
    proj_out: list[Array | None] = []
    for j, proj in enumerate(params.projectors):
        rows = np.nonzero(weights[:, j] > 0.0)[0]
        proj_rows.append(rows)
        if rows.size == 0:
            proj_pre.append(None)
            proj_hid.append(None)
            proj_out.append(None)
            continue
        pre = tokens[rows] @ proj.w1 + proj.b1
        hid = gelu(pre)
        out = hid @ proj.w2 + proj.b2
        proj_pre.append(pre)
        proj_hid.append(hid)
        proj_out.append(out)
        output[rows] += weights[rows, j][:, None] * out
    return _ForwardCache(
        tokens=tokens,
        router_in=router_in,
        pre_r=pre_r,
        hid_r=hid_r,
        logits=logits,
        decision=decision,
        proj_rows=proj_rows,
        proj_pre=proj_pre,
        proj_hid=proj_hid,
        proj_out=proj_out,
        output=output,
    )


def mop_forward(
    tokens: Array, params: MopParams, cfg: MopConfig, rng_seed: int
) -> tuple[Array, RoutingDecision]:
    """Full layer forward: (L x c_in) -> (L x c_out) plus the routing taken.

    Only the selected projectors are evaluated for each row.
    """
    cache = _forward_cached(tokens, params, cfg, rng_seed)
    return cache.output, cache.decision


def mop_backward(
    tokens: Array,
    params: MopParams,
    cfg: MopConfig,
    rng_seed: int,
    upstream: Array,
) -> MopGrads:
    """Exact reverse-mode gradients for ``mop_forward``.

    The forward pass is replayed with the same seed/mode, so the noise and
    the top-K selection are identical; the selection mask is treated as a
    constant while the softmax over the selected logits is differentiated.
    """
    cache = _forward_cached(tokens, params, cfg, rng_seed)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != cache.output.shape:
        raise ShapeError(
            f"upstream gradient has shape {upstream.shape}, "
            f"forward output was {cache.output.shape}"
        )
    n_rows = cache.tokens.shape[0]
    grads = zero_grads(cfg, n_rows)
    weights = cache.decision.weights

    # d(loss)/d(logit) through the masked softmax; selected entries only.
    # For row t: dz_j = w_j * (d_j - sum_l w_l d_l) with d_j = g . p_j.
    d_scores = np.zeros_like(weights)  # d_j per (row, projector)
    for j, proj in enumerate(params.projectors):
        rows = cache.proj_rows[j]
        if rows.size == 0:
            continue
        out = cache.proj_out[j]
        d_scores[rows, j] = np.einsum("ij,ij->i", upstream[rows], out)

        # Projector branch: upstream scaled by the routing weight.
        u = weights[rows, j][:, None] * upstream[rows]
        hid = cache.proj_hid[j]
        pre = cache.proj_pre[j]
        grads.projectors[j].w2[...] = hid.T @ u
        grads.projectors[j].b2[...] = u.sum(axis=0)
        d_hid = u @ proj.w2.T
        d_pre = d_hid * gelu_grad(pre)
        grads.projectors[j].w1[...] = cache.tokens[rows].T @ d_pre
        grads.projectors[j].b1[...] = d_pre.sum(axis=0)
        grads.d_input[rows] += d_pre @ proj.w1.T

    inner = (weights * d_scores).sum(axis=1, keepdims=True)
    d_logits = weights * (d_scores - inner)

    # Router branch (dense over rows; d_logits is zero outside selections).
    grads.router.wr2[...] = cache.hid_r.T @ d_logits
    grads.router.br2[...] = d_logits.sum(axis=0)
    d_hid_r = d_logits @ params.router.wr2.T
    d_pre_r = d_hid_r * gelu_grad(cache.pre_r)
    grads.router.wr1[...] = cache.router_in.T @ d_pre_r
    grads.router.br1[...] = d_pre_r.sum(axis=0)
    grads.d_input[...] += d_pre_r @ params.router.wr1.T
    return grads


class NllLoss(NamedTuple):
    total: float
    per_token_mean: float


def nll_loss(token_logits: Sequence[Array] | Array, targets: Sequence[int]) -> NllLoss:
    """Autoregressive negative log-likelihood of target ids under the logits.

    Returns the sum over positions and the per-token mean.
    """
    logits = np.asarray(token_logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[0] == 0:
        raise ValueError("token_logits must be a non-empty sequence of logit vectors")
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != (logits.shape[0],):
        raise ValueError(
            f"expected {logits.shape[0]} targets, got shape {targets.shape}"
        )
    vocab = logits.shape[1]
    if np.any(targets < 0) or np.any(targets >= vocab):
        raise ValueError(f"target id out of range for vocabulary size {vocab}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(len(targets)), targets]
    total = float(np.sum(log_z - picked))
    return NllLoss(total=total, per_token_mean=total / len(targets))


def router_utilization(decisions: Sequence[RoutingDecision]) -> Array:
    """Fraction of token-routings assigned to each projector; sums to 1."""
    if not decisions:
        raise ValueError("need at least one routing decision")
    n = decisions[0].weights.shape[1]
    counts = np.zeros(n)
    for d in decisions:
        idx, c = np.unique(d.selected, return_counts=True)
        counts[idx] += c
    return counts / counts.sum()
