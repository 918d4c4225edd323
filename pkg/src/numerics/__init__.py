"""Dense float64 tensor engine with reverse-mode differentiation."""
from src.numerics.gradcheck import grad_check
from src.numerics.layers import Activation, Mlp, MlpSpec, ParameterSet, mhdpa, mlp_forward
from src.numerics.optim import Adam
from src.numerics.tensor import Gradients, Tape, Tensor, backward, no_grad, softmax


__all__ = [
    'Activation',
    'Adam',
    'Gradients',
    'Mlp',
    'MlpSpec',
    'ParameterSet',
    'Tape',
    'Tensor',
    'backward',
    'grad_check',
    'mhdpa',
    'mlp_forward',
    'no_grad',
    'softmax',
]
