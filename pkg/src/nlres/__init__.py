"""Non-local optical response of few-level models under structured fields.

Core layers, bottom up: periodic grids and their matched vector calculus
(``grid``), driving fields with analytic time derivatives (``fields``),
few-level models built from transition charge densities (``model``),
superoperator propagation machinery (``liouville``), the order-resolved
induced current (``response``), measurable traces (``signals``), and a
non-perturbative propagator used as an independent cross-check (``oracle``).
On top sit the NLRM/1 model store (``nlrm``), the recipe generator
(``generator``), run configs (``runconfig``) and the command layer
(``runner``) shared by the CLI and the HTTP service.
"""

from .constants import A2_VERTEX, DIAMAG, HBAR, SPEED_OF_LIGHT
from .errors import (
    GridMismatchError,
    ModelIOError,
    NlresError,
    NumericalError,
    ValidationFailure,
)
from .fields import (
    ConstantEnvelope,
    DrivingField,
    FieldMode,
    FlatTopEnvelope,
    GaussianEnvelope,
    GaugeFunction,
    SpaceTimeProduct,
    TimeGrid,
    apply_gauge,
)
from .generator import generate_model, parse_recipe
from .grid import Grid3D, ScalarFieldG, VectorFieldG
from .model import MolecularModel, build_model_from_charges, validate_model
from .nlrm import read_model, write_model
from .oracle import (
    DensityTrajectory,
    extract_orders,
    oracle_energy_exchange,
    propagate,
)
from .response import (
    InducedCurrent,
    induced_current_order1,
    induced_current_order2,
    induced_current_order3,
    induced_currents_up_to,
)
from .runconfig import RunConfig, parse_run_config
from .signals import (
    ComplexEnvelope,
    HeterodyneMode,
    SignalTrace,
    energy_exchange,
    heterodyne_signal,
    linear_spectra,
)

__version__ = "0.1.0"

__all__ = [
    "A2_VERTEX",
    "DIAMAG",
    "HBAR",
    "SPEED_OF_LIGHT",
    "ComplexEnvelope",
    "ConstantEnvelope",
    "DensityTrajectory",
    "DrivingField",
    "FieldMode",
    "FlatTopEnvelope",
    "GaugeFunction",
    "GaussianEnvelope",
    "Grid3D",
    "GridMismatchError",
    "HeterodyneMode",
    "InducedCurrent",
    "ModelIOError",
    "MolecularModel",
    "NlresError",
    "NumericalError",
    "RunConfig",
    "ScalarFieldG",
    "SignalTrace",
    "SpaceTimeProduct",
    "TimeGrid",
    "ValidationFailure",
    "VectorFieldG",
    "apply_gauge",
    "build_model_from_charges",
    "energy_exchange",
    "extract_orders",
    "generate_model",
    "heterodyne_signal",
    "induced_current_order1",
    "induced_current_order2",
    "induced_current_order3",
    "induced_currents_up_to",
    "linear_spectra",
    "oracle_energy_exchange",
    "parse_recipe",
    "parse_run_config",
    "propagate",
    "read_model",
    "validate_model",
    "write_model",
    "__version__",
]
