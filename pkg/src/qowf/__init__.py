"""Simulator for a quantum-to-classical one-way function over GCH states and
the quantum-money protocols built on it."""

from qowf.gch import (
    CBit,
    Gate,
    GchRegister,
    GchState,
    GhzGroup,
    GhzMember,
    HSign,
    apply_cnot,
    apply_single,
    canonical_equal,
    decode_state,
    encode_state,
    enumerate_gch_states,
    gch_state,
    is_compatible,
    measure,
    random_gch_state,
)
from qowf.owf import (
    OwfDescription,
    OwfImage,
    build_owf_unitary,
    cnot_count,
    deterministic_image,
    evaluate,
    verify,
)

__version__ = "0.1.0"
