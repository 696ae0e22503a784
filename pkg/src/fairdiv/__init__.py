"""Fair and efficient random allocations on finite allocation spaces.

A lottery over a finite, agent-symmetric set of deterministic allocations is
found that is envy-free and weakly Pareto efficient up to a tolerance: the
regularized weighted welfare is maximized for Pareto weights located by a
Sperner-style search over the weight simplex. Cake cutting on finitely many
cells is handled exactly, including conversion between fractional shares and
lotteries over partitions.
"""
from .cake import (CellMeasure, Decomposition, IndicatorPartition, NuMatrix, SimpleAllocation,
                   cake_bridge, decompose_general, decompose_two_agents, decomposition_lottery,
                   dww_atomless_to_partition, farkas_feasibility, lottery_shares, nu_matrix,
                   stirling_column_count)
from .errors import FairDivError, InvalidInstanceError
from .instance import (DeterministicSpace, explicit_space, gen_cake_space, gen_differentiated,
                       gen_hz, gen_multiunit, gen_partition_family, gen_pazner_schmeidler,
                       gen_slots, validate_space)
from .oracle import certify
from .preferences import EU, MAXMIN, Lottery, Preference, envy_matrix, marginal_matrix, max_envy
from .qsolver import QSolution, SolverConfig, WeightVector, solve_q, wpe_gap
from .sperner import FairCertificate, RefinementTrace, solve_fair

__all__ = [
    "CellMeasure", "Decomposition", "IndicatorPartition", "NuMatrix", "SimpleAllocation",
    "cake_bridge", "decompose_general", "decompose_two_agents", "decomposition_lottery",
    "dww_atomless_to_partition", "farkas_feasibility", "lottery_shares", "nu_matrix",
    "stirling_column_count",
    "FairDivError", "InvalidInstanceError",
    "DeterministicSpace", "explicit_space", "gen_cake_space", "gen_differentiated", "gen_hz",
    "gen_multiunit", "gen_partition_family", "gen_pazner_schmeidler", "gen_slots",
    "validate_space",
    "certify",
    "EU", "MAXMIN", "Lottery", "Preference", "envy_matrix", "marginal_matrix", "max_envy",
    "QSolution", "SolverConfig", "WeightVector", "solve_q", "wpe_gap",
    "FairCertificate", "RefinementTrace", "solve_fair",
]
