from .autodiff import AutodiffError, GradientReport, Tensor, as_tensor, backward, concat, constant, softmax
from .blocks import attention_apply, attention_forward, gru_apply, mlp_apply, mlp_forward, recurrent_step, reset_state
from .checkpoint import load_checkpoint, save_checkpoint
from .optim import OptimizerError, adamw_step
from .params import BLOCK_KINDS, BlockLayout, DenseBlockSpec, ParamStore, init_block

__all__ = [
    "AutodiffError", "GradientReport", "Tensor", "as_tensor", "backward", "concat",
    "constant", "softmax", "attention_apply", "attention_forward", "gru_apply",
    "mlp_apply", "mlp_forward", "recurrent_step", "reset_state", "load_checkpoint",
    "save_checkpoint", "OptimizerError", "adamw_step", "BLOCK_KINDS", "BlockLayout",
    "DenseBlockSpec", "ParamStore", "init_block",
]
