"""Factorization of Lagrangian control systems.

Parse a control system, form its Hamiltonian system through the maximum
principle, and check or build maps onto lower-dimensional factor systems.
"""

from .control import (
    HamiltonianSystem,
    LagrangianSystem,
    Synthesis,
    canonical_equations,
    check_nondegenerate,
    check_regularity,
    hamiltonian_system,
    pontryagin_function,
    solve_synthesis,
)
from .errors import OCFactorError
from .expr import OneForm, Verdict, ZeroTest, differentiate, is_zero, simplify, to_text
from .factorization import (
    FactorizationCandidate,
    FactorSpec,
    FactorSystem,
    VerifyOptions,
    build_factor_system,
    classify_boundary,
    identity_candidate,
    reconstruct_Qtilde,
    verify_candidate,
)
from .frame import CoordinateFrame
from .numeric import integrate
from .ocs import SystemFile, load, loads
from .parsing import parse_expression
from .report import CheckResult, VerificationReport
from .symplectic import interior_product, lie_derivative_oneform, poisson_bracket

__version__ = "0.1.0"

__all__ = [
    "CheckResult",
    "CoordinateFrame",
    "FactorSpec",
    "FactorSystem",
    "FactorizationCandidate",
    "HamiltonianSystem",
    "LagrangianSystem",
    "OCFactorError",
    "OneForm",
    "Synthesis",
    "SystemFile",
    "Verdict",
    "VerificationReport",
    "VerifyOptions",
    "ZeroTest",
    "build_factor_system",
    "canonical_equations",
    "check_nondegenerate",
    "check_regularity",
    "classify_boundary",
    "differentiate",
    "hamiltonian_system",
    "identity_candidate",
    "integrate",
    "interior_product",
    "is_zero",
    "lie_derivative_oneform",
    "load",
    "loads",
    "parse_expression",
    "poisson_bracket",
    "pontryagin_function",
    "reconstruct_Qtilde",
    "simplify",
    "solve_synthesis",
    "to_text",
    "verify_candidate",
]
