"""Phase-space simulation of a QND-based light-to-matter quantum interface."""

__version__ = "0.1.0"

from .phase_space import (  # noqa: F401
    ORDERING,
    ConditionalAffineMap,
    QuadratureIndex,
    balanced_bs_gate,
    compose,
    conditional_map,
    joint_qnd_gate,
    paper_matrix_u,
    qnd_gate,
    squeeze_gate,
)
from .protocols import (  # noqa: F401
    JointConfig,
    PostSelection,
    ProbabilisticConfig,
    ProbabilisticResult,
    SequentialConfig,
    deterministic_joint_map,
    deterministic_sequential_map,
    probabilistic_output,
    single_qnd_reference,
)
from .metrics import MeritReport, fidelity, invert_ps, negativity  # noqa: F401
from .wigner_calculus import (  # noqa: F401
    GaussPolyWigner,
    single_photon_wigner,
    thermal_wigner,
    vacuum_wigner,
)
