"""Avalanche-driven depinning toolkit for a 1-D periodic charge-density-wave chain.

Public surface, by theme:

  lattice     ModelParams, Disorder, gen_disorder, periodic_laplacian,
              invert_laplacian, nearest_integer
  full model  well_coords_full, jump_response_full, avalanche_with_force,
              zfa_full, threshold_full
  toy model   ToyConfig, z_of, toy_jump, zfa_toy, avalanche_aggregate,
              positive_threshold, negative_threshold, threshold_max_and_force
  evolution   t2t_evolve, observables_at, flat_evolve, AvalancheEvent
  oracle      brute_threshold, sandpile_stabilize, correspondence_check
  stats       phi, p_u_density, bessel_k0, bridge_covariance,
              polar_covariance, estimators and hypothesis checks
"""

from . import errors, evolution, full_model, lattice, oracle, stats, toy_model
from .evolution import AvalancheEvent, flat_evolve, observables_at, t2t_evolve
from .full_model import (
    FullConfig,
    avalanche_with_force,
    jump_response_full,
    threshold_full,
    well_coords_full,
    zfa_full,
)
from .lattice import (
    Disorder,
    ModelParams,
    gen_disorder,
    invert_laplacian,
    nearest_integer,
    periodic_laplacian,
    realization_seed,
)
from .oracle import SandpileState, brute_threshold, correspondence_check, sandpile_stabilize
from .toy_model import (
    ToyConfig,
    avalanche_aggregate,
    negative_threshold,
    positive_threshold,
    threshold_max_and_force,
    toy_jump,
    z_of,
    zfa_toy,
)

__version__ = "0.1.0"
