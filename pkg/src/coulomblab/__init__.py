"""Desk-scale numerical laboratory for planar Coulomb gases at low
temperature: Gibbs and minimum-energy ensembles, weighted polynomial
kernels, microscopic scaling limits, concentration spectra, and
equidistribution statistics."""

__version__ = "0.1.0"

from .potential import (Potential, DropletDescriptor, ginibre,
                        radial_monomial, radial_plus_harmonic,
                        custom_potential, droplet, vicinity,
                        equilibrium_density)
from .ensemble import (Configuration, ChainDiagnostics, hamiltonian,
                       hamiltonian_delta, grad_hamiltonian, sample_gibbs,
                       fekete)
from .polyspace import (WeightedPolySpace, build_space, lagrange_values,
                        sup_norms_lagrange)
from .limits import (erfc_profile, dawson, ginibre_kernel, edge_kernel,
                     LimitKernel, RescaleMap, rescale_points, rescale_kernel,
                     area_law, boundary_profile, verify_decay)
from .landau import (OmegaRegion, ConcentrationSpectrum, concentration,
                     eig_count_check, trace_asymptotics, mz_constant,
                     interpolation_constant, localized_lagrange)
from .stats import (spacing, count_disc, vacuum_distance, psi6, ZoomRule,
                    bl_density, discrepancy, StatReport)
