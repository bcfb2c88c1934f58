"""
Prospect Drive - Cumulative prospect theory for driver pass/yield decisions

Learns utility weights from demonstrations by maximum-entropy IRL, fits CPT value and
weighting parameters to labeled interactions and predicts whether a target vehicle passes
ahead of, or yields to, an interacting vehicle.

Basic Usage:
    >>> from prospect_drive import CptParams, UtilityConfig, cpt_predict, load_dataset
    >>>
    >>> dataset = load_dataset("trajectories.csv", "labels.csv")
    >>> frame = dataset.frames(window=10)[0]
    >>> prediction = cpt_predict(frame, [1.0, 0.5, 0.2, -0.3], UtilityConfig(),
    ...                          CptParams.driving(alpha=0.98, gamma=0.67))
    >>> print(prediction.pr_pass, prediction.decision)
"""

__version__ = "0.1.0"

# Geometry and kinematics
from prospect_drive.geometry import (
    CrossingPoint,
    FrenetPose,
    ReferencePath,
    find_crossing,
    project_to_path,
    to_shared_frenet,
)
from prospect_drive.kinematics import (
    Frame,
    InteractionPair,
    Trajectory,
    kinematics,
    slice_frames,
    ttc,
)

# Utility and synthesis
from prospect_drive.features import feature_matrix, utility, utility_gradient
from prospect_drive.synthesis import (
    InitialState,
    YieldConstraint,
    compose_pass_nonyield,
    optimal_pass_trajectory,
    optimal_yield_trajectory,
)

# CPT engine
from prospect_drive.cpt import (
    DrivingUtilities,
    Prospect,
    decision_probabilities,
    decision_weights,
    driving_values,
    prospect_value,
    value_fn,
    weighting_fn,
    yield_probability,
)

# Learning and evaluation
from prospect_drive.estimation import CptObservation, Demonstration, cpt_fit, irl_fit
from prospect_drive.evaluation import cpt_predict, eut_predict, evaluate, ttc_predict

# Datasets
from prospect_drive.dataset import (
    TrajectoryDataset,
    export_curves,
    generate_synthetic,
    load_dataset,
    save_dataset,
)

# Exceptions
from prospect_drive.exceptions import ErrorCode, NonConvergenceError, ProspectDriveError

# Data models
from prospect_drive.models import (
    CptParams,
    Decision,
    FitResult,
    MotionLimits,
    SynthConfig,
    UtilityConfig,
    WeightingMode,
)

__all__ = [
    # Geometry and kinematics
    "CrossingPoint",
    "FrenetPose",
    "ReferencePath",
    "find_crossing",
    "project_to_path",
    "to_shared_frenet",
    "Frame",
    "InteractionPair",
    "Trajectory",
    "kinematics",
    "slice_frames",
    "ttc",
    # Utility and synthesis
    "feature_matrix",
    "utility",
    "utility_gradient",
    "InitialState",
    "YieldConstraint",
    "compose_pass_nonyield",
    "optimal_pass_trajectory",
    "optimal_yield_trajectory",
    # CPT engine
    "DrivingUtilities",
    "Prospect",
    "decision_probabilities",
    "decision_weights",
    "driving_values",
    "prospect_value",
    "value_fn",
    "weighting_fn",
    "yield_probability",
    # Learning and evaluation
    "CptObservation",
    "Demonstration",
    "cpt_fit",
    "irl_fit",
    "cpt_predict",
    "eut_predict",
    "evaluate",
    "ttc_predict",
    # Datasets
    "TrajectoryDataset",
    "export_curves",
    "generate_synthetic",
    "load_dataset",
    "save_dataset",
    # Exceptions
    "ErrorCode",
    "NonConvergenceError",
    "ProspectDriveError",
    # Models
    "CptParams",
    "Decision",
    "FitResult",
    "MotionLimits",
    "SynthConfig",
    "UtilityConfig",
    "WeightingMode",
]
