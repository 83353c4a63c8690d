# Copyright 2026 the distsketch authors
# SPDX-License-Identifier: Apache-2.0
"""Distributed sketching and sampling protocols over a simulated fabric.

Thin Python surface over the C++ core: sketched low-rank approximation,
importance-sampled moment estimators, and the exact oracles used to
validate them. Inputs are numpy arrays, one per server.
"""

try:
    from ._core import (  # wheel layout: the extension lives in the package
        FunctionSpec,
        FunctionSpecError,
        ProtocolError,
        adaptive_compress,
        best_rank_k_error,
        distributed_sum,
        exact_frequency_moment,
        exact_generalized_moment,
        exact_moment,
        frequency_moments,
        generalized_moment,
        lipschitz_moments,
        power_moment,
        quartic_quintic,
        rejection_sample_tuples,
        table_function,
        two_level_draws,
    )
except ImportError:  # build-tree layout: _core.so sits on PYTHONPATH
    from _core import (
        FunctionSpec,
        FunctionSpecError,
        ProtocolError,
        adaptive_compress,
        best_rank_k_error,
        distributed_sum,
        exact_frequency_moment,
        exact_generalized_moment,
        exact_moment,
        frequency_moments,
        generalized_moment,
        lipschitz_moments,
        power_moment,
        quartic_quintic,
        rejection_sample_tuples,
        table_function,
        two_level_draws,
    )

__version__ = "0.1.0"

__all__ = [
    "FunctionSpec",
    "FunctionSpecError",
    "ProtocolError",
    "adaptive_compress",
    "best_rank_k_error",
    "distributed_sum",
    "exact_frequency_moment",
    "exact_generalized_moment",
    "exact_moment",
    "frequency_moments",
    "generalized_moment",
    "lipschitz_moments",
    "power_moment",
    "quartic_quintic",
    "rejection_sample_tuples",
    "table_function",
    "two_level_draws",
]
