"""Key-rate upper bounds for entanglement-based QKD under convex-combination
attacks with classical side-channel leakage."""

__version__ = "0.1.0"

from .attack import (
    Convention,
    LeakageModel,
    closed_form_gamma,
    eve_joint_distribution,
    mixing_weight_qv,
    question_conditional,
    separability_threshold,
    zero_key_threshold,
)
from .distributions import JointDistribution, born_distribution, shannon_entropy, total_correlation
from .measurements import (
    MeasurementSet,
    ProjectiveMeasurement,
    computational_basis,
    parse_setting,
    qubit_bloch_measurement,
    xz_plane_measurement,
)
from .montecarlo import empirical_objective, simulate_rounds
from .optimize import (
    KeyRateBound,
    SettingsSpace,
    maximize_over_settings,
    minimize_over_gamma,
    rate_curve,
    weighted_objective,
)
from .quantum import QuantumState, ghz_projector, isotropic_state, sep_isotropic, tensor_product
from .repeater import max_repeaters, repeater_rate_curve, swapped_visibility
