"""Stability analysis and simulation of consensus under rotated local frames."""
from .ambiguity import (
    AgentAmbiguity,
    AmbiguitySet,
    assemble_global,
    homogeneous,
    improper_rotation,
    rotation,
    unambiguous,
)
from .dynamics import (
    Classification,
    Method,
    PinnedSystem,
    SimulationTrace,
    error_trace,
    fit_decay_rate,
    integrate,
    pin_leaders,
)
from .graph import Configuration, Graph, build_laplacian, compute_stress_matrix, validate_laplacian
from .scenarios import (
    ScenarioConfig,
    build_formation_scenario,
    build_rendezvous_scenario,
    load_config,
    run_experiment,
)
from .spectral import (
    SpectralSplit,
    gamma,
    general_eig,
    is_positive_definite,
    kron,
    split_range_nullspace,
    symmetric_eig,
)
from .stability import (
    StabilityReport,
    SweepGrid,
    Verdict,
    check_rotation_lemma,
    homogeneous_margin,
    mixed_rotation_evidence,
    stability_check,
    sufficient_check,
    sweep_heterogeneous,
    sweep_homogeneous,
)

__version__ = "0.1.0"
