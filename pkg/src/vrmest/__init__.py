"""vrmest: variance-reduced solvers and landscape diagnostics for two
non-convex M-estimation problems (squared-sigmoid binary classification
and redescending robust regression)."""

__version__ = "0.1.0"

from .losses import (  # noqa: E402
    CLASSIFICATION,
    REGRESSION,
    DataSet,
    LossModel,
    Sample,
    SigmoidLink,
    TukeyLoss,
    batch_gradient,
    batch_hessian,
    batch_objective,
    sample_gradient,
    sigmoid_eval,
    smoothness_estimate,
    tukey_eval,
)
from .datagen import CovarianceSpec, NoiseSpec, synthetic_dataset  # noqa: E402
from .optim import (  # noqa: E402
    BallConstraint,
    GdConfig,
    SagaConfig,
    SagaState,
    SgdConfig,
    SvrgConfig,
    TrainTrace,
    default_hyperparams,
    project_ball,
    run_algorithm,
    run_batch_gd,
    run_saga,
    run_sgd,
    run_svrg,
    saga_step,
    svrg_vr_gradient,
)
from .errors import DivergenceError, NoViableStepError  # noqa: E402

__all__ = [
    "CLASSIFICATION",
    "REGRESSION",
    "DataSet",
    "LossModel",
    "Sample",
    "SigmoidLink",
    "TukeyLoss",
    "BallConstraint",
    "GdConfig",
    "SgdConfig",
    "SvrgConfig",
    "SagaConfig",
    "SagaState",
    "TrainTrace",
    "CovarianceSpec",
    "NoiseSpec",
    "DivergenceError",
    "NoViableStepError",
    "batch_gradient",
    "batch_hessian",
    "batch_objective",
    "default_hyperparams",
    "project_ball",
    "run_algorithm",
    "run_batch_gd",
    "run_saga",
    "run_sgd",
    "run_svrg",
    "saga_step",
    "sample_gradient",
    "sigmoid_eval",
    "smoothness_estimate",
    "svrg_vr_gradient",
    "synthetic_dataset",
    "tukey_eval",
]
