"""Split feasibility problems with polynomial sets, solved by moment relaxations."""

from .moment import (LocalizingOperator, MonomialBasis, RelaxationInstance, TruncatedMomentVector,
                     assemble, build_relaxation, enumerate_basis, localizing_operator,
                     moment_operator, riesz)
from .poly import Polynomial, compose_linear, format_polynomial, parse_polynomial
from .problem import SfpProblem
from .sdp import (FarkasCertificate, SdpBlock, SdpOutcome, SdpProblem, SdpStatus, SolverOptions,
                  check_certificate, check_optimal)
from .sdp import solve as solve_sdp
from .sfp import (Feasible, Inconclusive, Infeasible, SfpOptions, extract_point, sample_xi,
                  solve_sfp, verify_point)

__version__ = "0.1.0"

__all__ = [
    "Polynomial", "compose_linear", "format_polynomial", "parse_polynomial", "SfpProblem",
    "MonomialBasis", "TruncatedMomentVector", "LocalizingOperator", "RelaxationInstance",
    "enumerate_basis", "localizing_operator", "moment_operator", "assemble", "riesz",
    "build_relaxation", "SdpBlock", "SdpProblem", "SdpOutcome", "SdpStatus", "SolverOptions",
    "FarkasCertificate", "check_certificate", "check_optimal", "solve_sdp", "SfpOptions",
    "Feasible", "Infeasible", "Inconclusive", "sample_xi", "extract_point", "verify_point",
    "solve_sfp", "__version__",
]
