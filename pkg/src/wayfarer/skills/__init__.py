from .params import ParamVector, mlp_params
from .nets import mlp_forward, mlp_backward, softmax, log_softmax, softplus, sigmoid
from .losses import (
    build_distance,
    build_events,
    build_policy,
    build_q,
    build_vib,
    forward_distance,
    forward_events,
    forward_policy,
    forward_q,
    kl_standard_normal,
    loss_awac,
    loss_distance_regression,
    loss_events,
    loss_expected_q,
    loss_gcbc,
    loss_vib,
    sample_subgoal,
    vib_encode,
)
from .gradcheck import GradReport, grad_check
from .qfit import TabularQ, fit_q_tabular, fit_q_mlp, loss_q_mse, steps_to_value, value_to_steps
from .train import TrainConfig, adam_minimize, save_loss_curve, train
from .models import (
    DistanceRegressor,
    EventPredictor,
    GoalConditionedPolicy,
    QFunction,
    SubgoalEncoder,
    encode_action_sequences,
    fit_q,
)
from .checkpoint import load_model, save_model

__all__ = [
    "ParamVector",
    "GradReport",
    "grad_check",
    "TrainConfig",
    "train",
    "fit_q",
    "value_to_steps",
    "GoalConditionedPolicy",
    "DistanceRegressor",
    "QFunction",
    "EventPredictor",
    "SubgoalEncoder",
    "save_model",
    "load_model",
]
