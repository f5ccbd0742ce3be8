# SPDX-License-Identifier: Apache-2.0
"""Routing-aware configuration dispatch for fused MoE kernels."""

from ._core import (
    CostCoefficients,
    DispatchTable,
    DomainError,
    HardwareModel,
    MoeGeometry,
    ParseError,
    RampError,
    TileConfig,
    ValidationError,
    balancedness,
    catalog,
    classify,
    enumerate_configs,
    fit,
    grid_size,
    model,
    predict,
    run_cli,
    sample_histogram,
    simulate_time,
    split_k_gate,
)

__all__ = [
    "CostCoefficients",
    "DispatchTable",
    "DomainError",
    "HardwareModel",
    "MoeGeometry",
    "ParseError",
    "RampError",
    "TileConfig",
    "ValidationError",
    "balancedness",
    "catalog",
    "classify",
    "enumerate_configs",
    "fit",
    "grid_size",
    "model",
    "predict",
    "run_cli",
    "sample_histogram",
    "simulate_time",
    "split_k_gate",
]
