import warnings

import numpy as np
import pytest

from surgassist.mop import (
    MopConfig,
    TrainHyper,
    TrainingDiverged,
    load_checkpoint,
    make_linear_dataset,
    make_two_domain_dataset,
    save_checkpoint,
    train_mop,
    write_loss_curve,
)


def test_linear_task_converges_below_1e_3():
    data = make_linear_dataset(64, 4, 5, 3, seed=7, scale=0.3)
    cfg = MopConfig(
        n_projectors=1, top_k=1, c_in=5, hidden=8, c_out=3,
        router_hidden=4, noise_sigma=0.0, mode="training",
    )
    res = train_mop(data, cfg, TrainHyper(lr=0.3, steps=2000, batch=8, seed=1))
    assert res.final_loss < 1e-3


def test_two_domain_mixture_beats_single_projector():
    data = make_two_domain_dataset(64, 4, 6, 4, seed=100)
    hyper = TrainHyper(lr=0.2, steps=2000, batch=8, seed=0)

    def cfg(n, k, sigma):
        return MopConfig(
            n_projectors=n, top_k=k, c_in=6, hidden=8, c_out=4,
            router_hidden=8, noise_sigma=sigma, mode="training",
        )

    baseline = train_mop(data, cfg(1, 1, 0.0), hyper).final_loss
    mixture = train_mop(data, cfg(4, 1, 1.0), hyper).final_loss
    assert mixture <= 0.5 * baseline, (mixture, baseline)


def test_fixed_seed_gives_bitwise_identical_curve():
    data = make_linear_dataset(16, 4, 4, 3, seed=2)
    cfg = MopConfig(
        n_projectors=2, top_k=1, c_in=4, hidden=4, c_out=3,
        router_hidden=4, noise_sigma=0.5, mode="training",
    )
    hyper = TrainHyper(lr=0.1, steps=300, batch=4, seed=9)
    a = train_mop(data, cfg, hyper)
    b = train_mop(data, cfg, hyper)
    np.testing.assert_array_equal(a.loss_curve, b.loss_curve)
    assert a.final_loss == b.final_loss


def test_divergence_aborts_with_diagnostic():
    data = make_linear_dataset(16, 4, 5, 3, seed=7, scale=2.0)
    cfg = MopConfig(
        n_projectors=2, top_k=1, c_in=5, hidden=8, c_out=3,
        router_hidden=4, noise_sigma=0.0, mode="training",
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(TrainingDiverged, match="step"):
            train_mop(data, cfg, TrainHyper(lr=500.0, steps=200, batch=4, seed=1))


def test_empty_dataset_rejected():
    cfg = MopConfig(
        n_projectors=1, top_k=1, c_in=3, hidden=2, c_out=2,
        router_hidden=2, noise_sigma=0.0,
    )
    with pytest.raises(ValueError):
        train_mop([], cfg, TrainHyper())


def test_shape_mismatch_rejected():
    cfg = MopConfig(
        n_projectors=1, top_k=1, c_in=3, hidden=2, c_out=2,
        router_hidden=2, noise_sigma=0.0,
    )
    bad = [(np.zeros((4, 3)), np.zeros((4, 5)))]
    with pytest.raises(ValueError):
        train_mop(bad, cfg, TrainHyper())


def test_checkpoint_round_trip(tmp_path):
    from surgassist.mop import init_params, mop_forward

    cfg = MopConfig(
        n_projectors=3, top_k=2, c_in=4, hidden=5, c_out=3,
        router_hidden=4, noise_sigma=1.0, mode="training",
    )
    params = init_params(cfg, seed=5)
    path = tmp_path / "mop.json"
    save_checkpoint(path, cfg, params)
    cfg2, params2 = load_checkpoint(path)
    assert cfg2 == cfg
    tokens = np.random.default_rng(0).normal(size=(3, 4))
    out1, _ = mop_forward(tokens, params, cfg, rng_seed=3)
    out2, _ = mop_forward(tokens, params2, cfg2, rng_seed=3)
    np.testing.assert_array_equal(out1, out2)


def test_checkpoint_version_checked(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format_version": 99}')
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(path)


def test_loss_curve_csv_layout(tmp_path):
    path = tmp_path / "curve.csv"
    write_loss_curve(path, [0.5, 0.25])
    lines = path.read_text().splitlines()
    assert lines[0] == "step,loss"
    assert lines[1].startswith("0,")
    assert float(lines[2].split(",")[1]) == 0.25
