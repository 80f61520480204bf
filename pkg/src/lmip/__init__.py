"""Levenberg-Marquardt methods with inexact projections for constrained
nonlinear equations."""

from lmip.errors import (
    BudgetExhausted,
    InvalidConfig,
    InvalidDims,
    LineSearchFail,
    LmipError,
    MalformedTrace,
    NoConverge,
    NonFinite,
    RequiresLMO,
    ZeroResidual,
)
from lmip.globalized import GlobalConfig, g_lmm_ip_solve, preset
from lmip.local import LocalConfig, ThetaSchedule, lmm_ip_solve
from lmip.problems import (
    NlsProblem,
    SpectraInstance,
    desk_suite,
    gen_spectra_instance,
    spectra_start,
)
from lmip.sets import (
    BoxSet,
    EpsProjection,
    Projector,
    SimplexSet,
    SpectrahedronSet,
    condg_project,
    exact_project_spectrahedron,
    fw_rank_p_project,
    smat,
    svec,
)
from lmip.trace import IterateTrace, SolveResult, Status

__version__ = "0.1.0"

__all__ = [
    "BoxSet",
    "BudgetExhausted",
    "EpsProjection",
    "GlobalConfig",
    "InvalidConfig",
    "InvalidDims",
    "IterateTrace",
    "LineSearchFail",
    "LmipError",
    "LocalConfig",
    "MalformedTrace",
    "NlsProblem",
    "NoConverge",
    "NonFinite",
    "Projector",
    "RequiresLMO",
    "SimplexSet",
    "SolveResult",
    "SpectraInstance",
    "SpectrahedronSet",
    "Status",
    "ThetaSchedule",
    "ZeroResidual",
    "condg_project",
    "desk_suite",
    "exact_project_spectrahedron",
    "fw_rank_p_project",
    "g_lmm_ip_solve",
    "gen_spectra_instance",
    "lmm_ip_solve",
    "preset",
    "smat",
    "spectra_start",
    "svec",
]
