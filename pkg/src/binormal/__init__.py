"""Binormal flow of polygonal vortex filaments.

NLS ansatz with Dirac-comb amplitudes, frame reconstruction by the inverse
Hasimoto transform, self-similar corner profiles, resonance-window spectral
diagnostics and an independent finite-difference Schroedinger-map solver.
"""

__version__ = "0.1.0"

from .ansatz import AnsatzField
from .config import RunConfig
from .direct_sim import (TangentField, compare_to_hasimoto, init_from_polyline, make_grid,
                         simulate, step, total_turning)
from .errors import (AdmissibilityError, BinormalError, ConvergenceError, DomainError,
                     IntegrationError, RefinementError, ValidationError)
from .geometry import (CornerData, GrowthVector, PolyLine, alpha_from_angle, angle_from_alpha,
                       build_polyline, curvature_torsion_from_u, growth_vector_V,
                       growth_vector_Vm)
from .hasimoto import (Frame, FrameField, Grid, HasimotoSampler, align_to_polyline,
                       integrate_frame_in_space, integrate_frame_in_time, polyline_limit_error,
                       reconstruct_curve)
from .selfsimilar import (SelfSimilar, angle_law_row, asymptotic_tangents, integrate_profile,
                          measured_corner_angle, selfsimilar_state)
from .spectral import (GrowthReport, Spectrum, admissible_time, energy_density_Xi,
                       fourier_transform_Tx, growth_scan, measure_Xi, offwindow_check,
                       resonant_pairs, resonant_predictor, xi_window)
