"""Two-leg Rydberg ladder simulator with string extraction and a
hadronization pipeline over an event-generator file protocol."""

from .errors import (
    AccuracyError,
    CapacityError,
    ConfigError,
    KinematicsError,
    LadderError,
    MalformedEventError,
    NormalizationError,
)
from .lattice import (
    DEFAULT_C6,
    DEFAULT_RABI_FREQUENCY,
    LadderGeometry,
    PhysicalParams,
    blockade_radius,
    build_ladder,
    interaction_table,
    pair_potential,
)
from .hilbert import (
    HamiltonianSpec,
    TruncatedBasis,
    apply_hamiltonian,
    dense_matrix,
    diagonal_energies,
    occupancy_expectations,
)
from .propagate import (
    PreparationResult,
    RampSchedule,
    Trajectory,
    adiabatic_prepare,
    central_excitation_state,
    default_preparation_ramp,
    dense_evolve,
    fields_to_bitmask,
    krylov_evolve,
    prepare_product_state,
)
from .observe import (
    EntropyTrace,
    FieldExpectation,
    PhaseDiagram,
    charges_from_field,
    entropy_trace,
    field_expectations,
    half_chain_entropy,
    max_entropy_sweep,
)
from .hadronize import (
    EnergyDetuningCalibration,
    EventHadrons,
    FieldConfig,
    HadronizationConfig,
    Meson,
    Shot,
    StringSegment,
    apportion_energy,
    decode_shot,
    default_measurement_time,
    detuning_from_energy,
    extract_strings,
    hadronize_event,
    meson_kinematics,
    sample_shots,
)
from .bridge import (
    FourMomentum,
    HadronRecord,
    PartonEvent,
    PipelineResult,
    boost_to_rest_frame,
    invariant_mass,
    parse_events,
    run_pipeline,
)

__version__ = "0.1.0"
