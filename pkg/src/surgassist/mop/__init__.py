from .core import (
    ConfigError,
    MopConfig,
    MopGrads,
    MopParams,
    NllLoss,
    ProjectorParams,
    RouterParams,
    RoutingDecision,
    ShapeError,
    gelu,
    gelu_grad,
    init_params,
    mop_backward,
    mop_forward,
    nll_loss,
    projector_forward,
    route,
    router_logits,
    router_utilization,
)
from .training import (
    TrainHyper,
    TrainResult,
    TrainingDiverged,
    dataset_mse,
    make_linear_dataset,
    make_two_domain_dataset,
    train_mop,
)
from .checkpoint import load_checkpoint, save_checkpoint, write_loss_curve
from .gradcheck import GradCheckReport, compare_grads, gradient_check

__all__ = [
    "ConfigError",
    "GradCheckReport",
    "compare_grads",
    "gradient_check",
    "MopConfig",
    "MopGrads",
    "MopParams",
    "NllLoss",
    "ProjectorParams",
    "RouterParams",
    "RoutingDecision",
    "ShapeError",
    "TrainHyper",
    "TrainResult",
    "TrainingDiverged",
    "dataset_mse",
    "gelu",
    "gelu_grad",
    "init_params",
    "load_checkpoint",
    "make_linear_dataset",
    "make_two_domain_dataset",
    "mop_backward",
    "mop_forward",
    "nll_loss",
    "projector_forward",
    "route",
    "router_logits",
    "router_utilization",
    "save_checkpoint",
    "train_mop",
    "write_loss_curve",
]
