"""Hybrid quantum-classical recurrent network simulator.

The heavy lifting lives in the compiled ``_core`` extension; this package
re-exports its public surface.
"""

from ._core import (
    CircuitLayout,
    QuantumState,
    Session,
    apply_unitary,
    build_ansatz14,
    build_ry_layer,
    copy_baseline_loss,
    expressibility_kl,
    gen_copy_dataset,
    gen_parity_dataset,
    inner_product,
)

__all__ = [
    "CircuitLayout",
    "QuantumState",
    "Session",
    "apply_unitary",
    "build_ansatz14",
    "build_ry_layer",
    "copy_baseline_loss",
    "expressibility_kl",
    "gen_copy_dataset",
    "gen_parity_dataset",
    "inner_product",
]
