from .model import (
    ConsistencyModel,
    cold_start_bias,
    consistency_forward,
    inject_bias,
    lcm_loss,
    lcm_step,
    residual_target,
)

__all__ = ["ConsistencyModel", "cold_start_bias", "consistency_forward",
           "inject_bias", "lcm_loss", "lcm_step", "residual_target"]
