"""Multi-frequency inverse source problem for the Helmholtz equation in R^n.

Synthesizes boundary data and recovers the source on the Fourier side,
with numerical checks of the stability estimate."""

from .field import GridSpec, SourceField, h2d_norm, l2_norm, laplacian_power, make_bump
from .forward import BoundaryDataset, add_noise, forward_solve, make_sphere_rule, sweep
from .spectral import (DirectionSet, SpectralSamples, assemble_spectra, fhat_direct,
                       fhat_from_boundary, i1, i1_complex, i2, reconstruct, tail_slope)
from .stability import (StabilityParams, StabilityReport, bound_rhs, continuation_check,
                        epsilon_of_data, factorial_inequality_check, mu, run_report, select_s0)

__version__ = "0.1.0"
