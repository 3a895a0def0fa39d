"""Z_d toric codes: RG soft decoding, belief propagation, thresholds."""

from .zd import as_exponents, commutation_exponent, compose, negate
from .noise import (DegenerateDistributionError, NoiseModel,
                    bitflip_distribution, depolarizing_bitflip_rate,
                    iid_bitflip, log_probability, sample_error)
from .lattice import (TorusLattice, build_lattice, canonical_representative,
                      exact_class_probabilities, logical_representative,
                      syndrome, vertex_stabilizer, winding)
from .cell import (CellBasis, build_cell_basis, cell_marginal,
                   coset_coordinates, defect_representative)
from .bp import bp_messages, exchange, initial_messages, message_update
from .rg import (CellGeometry, DecodeOutcome, build_cell_geometry, decode,
                 decode_batch, recursion_levels, renormalize)
from .threshold import (DecoderConfig, FitResult, SweepSpec, TrialResult,
                        hashing_bound, monte_carlo, rescaled_hashing_curve,
                        run_sweep, run_trial, threshold_fit, wilson_interval)

__version__ = "0.1.0"
