"""magspec: lattice laboratory for semiclassical magnetic operators.

Discretizes H = (1/p) * (magnetic Bochner Laplacian) + V on 2D model
geometries and measures Landau-level clustering, spectral gaps, and the
exponential localization of gap eigenstates near interface sets.
"""

__version__ = "0.1.0"

from .lattice import (DistanceField, Lattice, WeightField, build_lattice,
                      distance_to_set, smooth_distance)
from .fields import (EdgeIntegrals, FieldSpec, GaugeLinks, PotentialField,
                     ScalarField, apply_gauge_transform,
                     check_flux_quantization, constant_potential,
                     edge_integrals, gauge_links, gaussian_bump_potential,
                     plaquette_holonomy, sample_field, trivial_links,
                     zero_potential)
from .operators import (SparseHermitian, assemble_H, conjugate_H,
                        gershgorin_interval, read_operator, taylor_terms,
                        write_operator)
from .model import (InterfaceSet, LandauLevel, LandauSet, SigmaUnion,
                    dist_to_sigma, distances_to_sigma, find_gaps,
                    interface_set, landau_levels, omega_collar, sigma_region,
                    skew_invariants)
from .solvers import (EigenPair, SpectrumSlice, count_below, dense_spectrum,
                      lowest_eigs, read_slice, window_eigs, write_slice)
from .analysis import (ClusterReport, FilteredSlice, LocalizationReport,
                       TrialBound, bandlimited_trial, boundary_filter,
                       cluster_assign, decay_fit, localization_report,
                       mass_fraction_beyond, norm_lower_bound_trial,
                       scaling_exponent, weighted_mass)
