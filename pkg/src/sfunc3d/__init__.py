"""First integrals of 3D polynomial ODE systems by the S-function method."""

from .grammar import ParseError, parse, to_text
from .pipeline import PipelineConfig, RunReport, emit_report, parse_report, run
from .system import System3D, check_preconditions, darboux_apply, parse_system
from .verify import VerificationRecord, verify_invariant

__all__ = [
    "ParseError",
    "PipelineConfig",
    "RunReport",
    "System3D",
    "VerificationRecord",
    "check_preconditions",
    "darboux_apply",
    "emit_report",
    "parse",
    "parse_report",
    "parse_system",
    "run",
    "to_text",
    "verify_invariant",
]
