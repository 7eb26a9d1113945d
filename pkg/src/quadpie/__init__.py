"""Exact PI-operator algebra and SDP stability certificates for scalar quadratic PDEs."""

from .polykernel import Poly, Var
from .pialgebra import Interval, PIOp, adjoint, apply, compose, identity, inner, multiplier, norm_bound
from .tensorpi import TensorPIOp, SimplexFunctional, compose_3pi_tensor, klin, tensor_product
from .pde2pie import PDESpec, PIESpec, IllPosed, SpecError, assemble_pie, construct_maps

__version__ = "0.1.0"

__all__ = [
    "Poly",
    "Var",
    "Interval",
    "PIOp",
    "adjoint",
    "apply",
    "compose",
    "identity",
    "inner",
    "multiplier",
    "norm_bound",
    "TensorPIOp",
    "SimplexFunctional",
    "compose_3pi_tensor",
    "klin",
    "tensor_product",
    "PDESpec",
    "PIESpec",
    "IllPosed",
    "SpecError",
    "assemble_pie",
    "construct_maps",
]
