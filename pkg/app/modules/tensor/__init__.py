from .tensor import (
    Tensor, Function, Graph, backward, no_grad, as_tensor,
    add, sub, mul, div, neg, power, exp, sqrt, absolute, tanh, sigmoid, leaky_relu, relu, clamp,
    noise_add, reduce_sum, reduce_mean, reduce_max, reshape, getitem, concat, matmul, log_softmax,
    LEAKY_SLOPE,
)
from .functional import (
    conv2d, nearest_upsample, avg_pool, adaptive_avg_pool, batch_norm, glu, linear, embedding,
    translate, conv_output_size, RunningStats,
)
from .nn import Module, Parameter, Linear, Conv2d, BatchNorm2d, Embedding
from .rng import Rng
from .gradcheck import grad_check, GradCheckReport
from .blocks import (
    write_tensor_blocks, read_tensor_blocks, save_tensor_blocks, load_tensor_blocks, TENSOR_MAGIC,
)
from .optim import Adam, Sgd

__all__ = [
    "Tensor", "Function", "Graph", "backward", "no_grad", "as_tensor",
    "add", "sub", "mul", "div", "neg", "power", "exp", "sqrt", "absolute", "tanh", "sigmoid",
    "leaky_relu", "relu", "clamp", "noise_add", "reduce_sum", "reduce_mean", "reduce_max",
    "reshape", "getitem", "concat", "matmul", "log_softmax", "LEAKY_SLOPE",
    "conv2d", "nearest_upsample", "avg_pool", "adaptive_avg_pool", "batch_norm", "glu", "linear",
    "embedding", "translate", "conv_output_size", "RunningStats",
    "Module", "Parameter", "Linear", "Conv2d", "BatchNorm2d", "Embedding",
    "Rng", "grad_check", "GradCheckReport",
    "write_tensor_blocks", "read_tensor_blocks", "save_tensor_blocks", "load_tensor_blocks",
    "TENSOR_MAGIC", "Adam", "Sgd",
]
