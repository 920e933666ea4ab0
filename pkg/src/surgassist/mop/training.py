"""Toy-scale trainer for the mixture-of-projectors layer.

Minimizes mean squared error between the layer output and synthetic target
embeddings with plain seeded SGD. Also provides the synthetic tasks used by
the projector-count experiments: a single-linear-map dataset and a
two-domain piecewise task where a flag column decides which of two linear
maps produced the targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    Array,
    MopConfig,
    MopGrads,
    MopParams,
    _forward_cached,
    init_params,
    mop_backward,
    zero_grads,
)


class TrainingDiverged(RuntimeError):
    """Raised when the loss becomes non-finite during training."""


@dataclass(frozen=True)
class TrainHyper:
    lr: float = 0.05
    steps: int = 2000
    batch: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.steps < 1 or self.batch < 1:
            raise ValueError("lr must be > 0, steps/batch must be >= 1")


@dataclass
class TrainResult:
    params: MopParams
    loss_curve: Array  # per-step training batch loss
    final_loss: float  # full-dataset MSE in inference mode


def _sample_mse_grads(
    tokens: Array, target: Array, params: MopParams, cfg: MopConfig, rng_seed: int
) -> tuple[float, MopGrads]:
    cache = _forward_cached(tokens, params, cfg, rng_seed)
    diff = cache.output - target
    loss = float(np.mean(diff * diff))
    upstream = 2.0 * diff / diff.size
    grads = mop_backward(tokens, params, cfg, rng_seed, upstream)
    return loss, grads


def dataset_mse(
    dataset: list[tuple[Array, Array]], params: MopParams, cfg: MopConfig
) -> float:
    """Mean of per-sample MSE over the whole dataset, noise-free."""
    eval_cfg = cfg.inference()
    losses = []
    for tokens, target in dataset:
        cache = _forward_cached(tokens, params, eval_cfg, rng_seed=0)
        diff = cache.output - target
        losses.append(float(np.mean(diff * diff)))
    return float(np.mean(losses))


def train_mop(
    dataset: list[tuple[Array, Array]],
    cfg: MopConfig,
    hyper: TrainHyper,
    init_seed: int | None = None,
) -> TrainResult:
    """SGD on mean squared error to the target matrices.

    Deterministic per (dataset, cfg, hyper): batch sampling and router noise
    both derive from ``hyper.seed``. Raises :class:`TrainingDiverged` if the
    loss goes non-finite.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    for tokens, target in dataset:
        if tokens.shape[0] != target.shape[0] or target.shape[1] != cfg.c_out:
            raise ValueError(
                f"sample shapes {tokens.shape} -> {target.shape} do not fit "
                f"c_out={cfg.c_out}"
            )
    params = init_params(cfg, hyper.seed if init_seed is None else init_seed)
    rng = np.random.default_rng(hyper.seed)
    curve = np.zeros(hyper.steps)

    for step in range(hyper.steps):
        idx = rng.integers(0, len(dataset), size=hyper.batch)
        accum = zero_grads(cfg, 0)
        batch_loss = 0.0
        for pos, i in enumerate(idx):
            tokens, target = dataset[int(i)]
            # Distinct noise stream per (seed, step, batch position).
            noise_seed = hyper.seed * 1_000_003 + step * 61 + pos
            loss, grads = _sample_mse_grads(tokens, target, params, cfg, noise_seed)
            batch_loss += loss
            for a, g in zip(accum.projectors, grads.projectors):
                a.w1 += g.w1
                a.b1 += g.b1
                a.w2 += g.w2
                a.b2 += g.b2
            accum.router.wr1 += grads.router.wr1
            accum.router.br1 += grads.router.br1
            accum.router.wr2 += grads.router.wr2
            accum.router.br2 += grads.router.br2
        batch_loss /= hyper.batch
        if not np.isfinite(batch_loss):
            raise TrainingDiverged(
                f"loss became non-finite at step {step} (lr={hyper.lr})"
            )
        curve[step] = batch_loss
        scale = hyper.lr / hyper.batch
        for p, g in zip(params.projectors, accum.projectors):
            p.w1 -= scale * g.w1
            p.b1 -= scale * g.b1
            p.w2 -= scale * g.w2
            p.b2 -= scale * g.b2
        params.router.wr1 -= scale * accum.router.wr1
        params.router.br1 -= scale * accum.router.br1
        params.router.wr2 -= scale * accum.router.wr2
        params.router.br2 -= scale * accum.router.br2

    return TrainResult(
        params=params,
        loss_curve=curve,
        final_loss=dataset_mse(dataset, params, cfg),
    )


def make_linear_dataset(
    n_samples: int,
    rows_per_sample: int,
    c_in: int,
    c_out: int,
    seed: int,
    scale: float = 0.5,
) -> list[tuple[Array, Array]]:
    """Targets realizable by one linear map: target = tokens @ A."""
    rng = np.random.default_rng(seed)
    lin = rng.normal(0.0, scale, size=(c_in, c_out))
    data = []
    for _ in range(n_samples):
        tokens = rng.normal(0.0, 1.0, size=(rows_per_sample, c_in))
        data.append((tokens, tokens @ lin))
    return data


def make_two_domain_dataset(
    n_samples: int,
    rows_per_sample: int,
    c_in: int,
    c_out: int,
    seed: int,
    scale: float = 0.8,
) -> list[tuple[Array, Array]]:
    """Piecewise-linear task: the last input column is a domain flag.

    Rows with flag +1 follow ``tokens @ A``; rows with flag -1 follow
    ``tokens @ B`` with B drawn independently. A single small MLP struggles
    to serve both maps at once, while a routed mixture can dedicate
    projectors per domain.
    """
    if c_in < 2:
        raise ValueError("two-domain task needs c_in >= 2 (features + flag)")
    rng = np.random.default_rng(seed)
    map_a = rng.normal(0.0, scale, size=(c_in, c_out))
    map_b = -map_a + rng.normal(0.0, 0.2 * scale, size=(c_in, c_out))
    data = []
    for _ in range(n_samples):
        tokens = rng.normal(0.0, 1.0, size=(rows_per_sample, c_in))
        flags = rng.integers(0, 2, size=rows_per_sample) * 2 - 1
        tokens[:, -1] = flags
        target = np.where((flags == 1)[:, None], tokens @ map_a, tokens @ map_b)
        data.append((tokens, target))
    return data
