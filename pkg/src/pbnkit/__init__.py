"""Probabilistic Boolean network toolkit: exact model checking, interventions
as MDP actions, and seeded Monte Carlo simulation, with a bundled model of the
Intelligent Power Router."""
from .expr import parse_expr, pretty, evaluate, support, synthesize_from_truth_table
from .pbn import (
    NodeSpec,
    Pbn,
    RewardStructure,
    enumerate_realizations,
    intervene,
    next_state_distribution,
    sample_step,
    validate,
)
from .markov import build_dtmc, find_attractors, steady_state, transient_distribution
from .mdp import ActionSpace, build_mdp, max_cumulative_reward, max_reachability, q_values
from .modelfmt import check, parse_model, parse_property, run_experiment, serialize_model
from .sim import simulate, export_csv
from .kernels import BACKEND

__version__ = "0.1.0"
