from .controller import (
    AdaptiveController,
    ControllerConfig,
    ControllerMode,
    ControllerState,
    Experience,
    LossSignal,
    reduction_ratio,
    step,
)
