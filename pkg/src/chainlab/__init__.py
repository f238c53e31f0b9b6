"""Absolute probability sequences, approximate reciprocity and infinite flow
graphs for time-varying stochastic chains."""

from .absolute_probability import (
    ApsTrace,
    aps_backward,
    basis_sweep,
    class_pstar_verdict,
    ergodicity_check,
    stationary_limit,
    uniqueness_diagnostic,
)
from .bounds import EtaParams, eta_n, lemma4_path_bound, log_eta_n, verify_product_lower_bound
from .chain_core import (
    ChainWindow,
    SubsetCut,
    backward_product,
    block,
    cut_flow,
    deviation_from_stochasticity,
    strong_aperiodicity_gamma,
)
from .chain_io import read_chain, read_ct, write_chain
from .continuous_time import CtChain, ct_reciprocity_beta, sample_discrete, sandwich_check, transition
from .dynamics import contraction_check, epoch_times, mutual_ergodicity, quadratic_comparison, simulate
from .errors import ChainError, ChainIndexError, DimensionMismatch, DomainError, NotStochastic
from .flow_graph import FlowGraph, build_flow_graph, connected_components, ergodic_classes, jet_interaction
from .random_chains import GeneratorSpec, expected_chain, feedback_coefficient, generate
from .reciprocity import approximate_reciprocity_beta, cut_balance_alpha, static_equivalence_check

__version__ = "0.1.0"
