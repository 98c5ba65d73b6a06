from .integrate import euler_integrate, ot_interpolate, target_velocity
from .policy import FingerprintMismatchError, FlowPolicy, time_features

__all__ = ["euler_integrate", "ot_interpolate", "target_velocity",
           "FingerprintMismatchError", "FlowPolicy", "time_features"]
