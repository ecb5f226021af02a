"""Gate-level circuit IR, exact branch-enumerating simulator, and
Fourier-arithmetic constraint oracles."""

from .circuit import Circuit
from .oracle import (
    ConstraintOracle,
    ResourceCount,
    constraint_measurement_circuit,
    constraint_value_poly,
    count_resources,
)
from .qft import (
    FixedPointPoly,
    fourier_load_polynomial,
    from_twos_complement,
    qft_circuit,
    semiclassical_inverse_qft,
    twos_complement,
    twos_complement_bits,
)
from .simulate import (
    AuxiliaryEntangledError,
    Branch,
    basis_channel_distance,
    channel_distance,
    clbit_distribution,
    enumerate_branches,
    induced_superoperator,
    measurement_kraus,
    probe_states,
    sample,
    unitary_matrix,
)

__all__ = [
    "AuxiliaryEntangledError",
    "Branch",
    "Circuit",
    "ConstraintOracle",
    "FixedPointPoly",
    "ResourceCount",
    "basis_channel_distance",
    "channel_distance",
    "clbit_distribution",
    "constraint_measurement_circuit",
    "constraint_value_poly",
    "count_resources",
    "enumerate_branches",
    "fourier_load_polynomial",
    "from_twos_complement",
    "induced_superoperator",
    "measurement_kraus",
    "probe_states",
    "qft_circuit",
    "sample",
    "semiclassical_inverse_qft",
    "twos_complement",
    "twos_complement_bits",
    "unitary_matrix",
]
