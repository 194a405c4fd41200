from . import functional
from .gradcheck import check_gradients, numerical_grad, relative_error
from .optim import SGD, Adam, OptimConfig, make_optimizer
from .rng import derive, make_rng
from .tensor import NonFiniteError, Tensor, as_tensor, concat, is_grad_enabled, make_op, no_grad, stack

__all__ = [
    "Adam", "NonFiniteError", "OptimConfig", "SGD", "Tensor", "as_tensor", "check_gradients",
    "concat", "derive", "functional", "is_grad_enabled", "make_op", "make_optimizer", "make_rng",
    "no_grad", "numerical_grad", "relative_error", "stack",
]
