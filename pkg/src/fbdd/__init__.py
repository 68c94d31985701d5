"""
Simulation of open-loop dynamical decoupling and single-bit feedback
decoupling for a qubit coupled to a finite environment.
"""

from .conditions import check_blocks, check_ld, check_mixing, check_simultaneous, solve_qubit_feedback
from .decoupling import PulseSequence, evolve_cycle, max_dd, sel_dd
from .errors import DimensionError, NumericalError, PreconditionError, ValidationError
from .estimate import EstimationState, estimate_eps_x, estimate_eps_z, tune
from .feedback import FeedbackCycleSpec, def_spec, fdd_cycle, fdd_repeated, fdd_spec, fed_spec
from .fidelity import ChannelMap, average_fidelity, channel_of_protocol, entanglement_fidelity, unitary_fidelity
from .magnus import average_hamiltonian, effective_hamiltonian, first_order_correction, toggled_sequence
from .model import OpenSystemModel, QubitErrorModel, make_model, propagator
from .protocols import ProtocolRun, run, table1_registry

__version__ = "0.1.0"
