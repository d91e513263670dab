from .model_spec import Architecture, LayerShape, ModelSpec
from .network import ParamVector, forward, init_params, loss_and_grad, unpack
from .training import evaluate, local_train, predict, sgd_step
