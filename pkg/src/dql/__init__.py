"""Dyadic quantized Laplace mechanism: exact Laplace noise from a finite-length message."""

from dql.distributions import MechanismParams, dyadic_tables, ft_density, g_delta, solve_delta0
from dql.mechanism import (
    Description,
    DescriptionBatch,
    dql_decode_scalar,
    dql_decode_vector,
    dql_encode_scalar,
    dql_encode_vector,
)
from dql.protocol import Frame, FrameHeader, open_frame, seal
from dql.randomness import RandomStream

__version__ = "0.1.0"
