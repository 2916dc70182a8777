"""Survey propagation for random K-SAT with certitude-driven decimation."""
from .decimation import DecimationConfig, DecimationOutcome, DecimationStatus, Selection, run
from .instance import FactorGraph, Instance, Literal, ParseError, fix_variable, generate_random, parse_dimacs, write_dimacs
from .sp import MessageState, SPConfig, SPResult, SPStatus, solve
from .survey import ContradictionError, Survey

__all__ = [
    "ContradictionError", "DecimationConfig", "DecimationOutcome", "DecimationStatus", "FactorGraph",
    "Instance", "Literal", "MessageState", "ParseError", "SPConfig", "SPResult", "SPStatus", "Selection",
    "Survey", "fix_variable", "generate_random", "parse_dimacs", "run", "solve", "write_dimacs",
]
__version__ = "0.1.0"
