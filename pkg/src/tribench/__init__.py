"""Calibrated multi-view triangulation methods and a benchmark harness."""

from .errors import (
    AmbiguousCheirality,
    CheiralityViolation,
    CollinearDegeneracy,
    DegenerateAngle,
    DegenerateConfiguration,
    DegenerateError,
    DegenerateGeometry,
    DisconnectedGraph,
    EmptyInput,
    EpipoleAtPoint,
    InputFormatError,
    TriBenchError,
)
from .geometry import Calibration, Camera, Pose, Ray, bearing, line_of_sight, project
from .triangulation import (
    TriangulationResult,
    angular_l1_twoview,
    angular_l2_twoview,
    l1_multiview_irls,
    l1_twoview,
    l2_multiview_refine,
    l2_twoview,
    midpoint,
    midpoint_irls,
)

__version__ = "0.1.0"
