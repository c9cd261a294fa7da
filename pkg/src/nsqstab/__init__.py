"""Stability certificates for block-structured non-square real matrices."""

__version__ = "0.1.0"

from .blocks import (BlockStructure, Detuning, GainMatrix, PlantMatrix, SquaredSelection,
                     assemble_AEK, effective_gains, enumerate_full_selections,
                     enumerate_reduced_selections, extract_squared)
from .linalg import Tolerances
from .lyapunov import Status, find_common_D, find_individual_Ds, vl_margin

__all__ = [
    "BlockStructure",
    "Detuning",
    "GainMatrix",
    "PlantMatrix",
    "SquaredSelection",
    "Status",
    "Tolerances",
    "assemble_AEK",
    "effective_gains",
    "enumerate_full_selections",
    "enumerate_reduced_selections",
    "extract_squared",
    "find_common_D",
    "find_individual_Ds",
    "vl_margin",
]
