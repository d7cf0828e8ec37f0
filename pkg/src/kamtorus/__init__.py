"""Numerical toolkit for KAM-type linearization of vector fields on tori."""

__version__ = "0.1.0"

from .errors import (BallExitError, ComponentMismatchError, ConfigError, ConvergenceError,
                     DomainViolation, EmptyRangeError, KamError, NeumannError, ResonanceError,
                     ResourceError, SmallnessError, WindowMismatchError)
from .lattice import CoordinateWindow
from .norms import (ApproximationFunction, IndexNorm, Weight, make_weight, m_norm,
                    parse_approximation, parse_index_norm, sigma_norm)
from .fourier import (FourierField, MatrixFourierField, compose_shift, jacobian, neumann_inverse,
                      numeric_settings, product, pullback, truncate_residual)
from .nonresonance import (DiophantineSpec, Frequency, appendix_bound_check, delta_max,
                           diophantine_verify, homological_solve, lattice_census, parse_frequency)
from .schemes import SchemeConfig, make_scheme, parse_scheme, rho_weight_check, series_condition_I
from .engine import (IterationConfig, IterationResult, StepInput, StepOutput, kam_iterate,
                     kam_step, write_trace_csv)

__all__ = [name for name in dir() if not name.startswith("_")]
