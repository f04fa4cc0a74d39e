"""Edwards-Anderson spin glasses on the 2d torus.

Gaussian bond disorder, exact small-volume Boltzmann tables, Glauber
sampling, frustration geometry on the dual lattice, cycle-free
extraction of unsatisfied sets, and the windowed bridge/region/coloring
analysis with its guaranteed energy-lowering class flips.
"""

from .analysis import (EXTERIOR, FlipOutcome, RegionDecomposition,
                       TreeTypeReport, Window, best_color_class_flip,
                       bridge_weight, color_regions, count_encounter_points,
                       decompose_regions, find_bridges, write_bridge_stats,
                       write_region_grid)
from .disorder import (SNAPSHOT_FORMAT, Couplings, edge_weight, graph_weight,
                       load_snapshot, sample_couplings, save_snapshot)
from .enumeration import (BoundsVerdict, CountTable, WeightRatioStats,
                          check_animal_bounds, connected_vertex_subsets,
                          count_fixed_polyominoes, cycle_count_table,
                          dual_edge_between, enumerate_animals,
                          enumerate_cycles_through, independent_animal_counts,
                          induced_edges, random_connected_subset,
                          weight_ratio_stats, write_count_table)
from .errors import (BoundedRunError, ConfigurationError,
                     ContractViolationError, NonContractibleCycleError,
                     SizeLimitError)
from .experiments import (CycleCensus, ExperimentConfig, ExperimentReport,
                          FlipBoundResult, PipelineConfig, PipelineReport,
                          ReplicaStats, measure_flip_bounds, replica_seed,
                          run_cluster_sweep, run_flip_bound_check, run_many,
                          run_pipeline, run_unsat_cycle_census,
                          write_cycle_census, write_flip_bound_table)
from .forest import (CycleClockSystem, build_clock_system, erase_step,
                     extract_forest, is_acyclic, same_partition,
                     simple_cycles_of, theta_edge_mass, write_dual_edge_list)
from .frustration import (ComponentStats, DualSubgraph, UnionFind, components,
                          empty_subgraph, frustrated_plaquettes,
                          plaquette_frustrated, unsatisfied_edge_bits,
                          unsatisfied_set, write_component_histogram)
from .gibbs import (ZERO_TEMPERATURE, BoltzmannTable, GroundStateVerdict,
                    LoopDynamicsConfig, LoopTrajectory, SpinConfig,
                    check_ground_state, checkerboard_chain, exact_boltzmann,
                    flip_region_delta, glauber_chain, glauber_sweep,
                    heat_bath_prob_up, loop_dynamics_run, random_spins,
                    restricted_hamiltonian, sample_ea_pair,
                    torus_boltzmann_table, torus_hamiltonian, tv_distance,
                    validate_beta)
from .lattice import (EAST, NORTH, SOUTH, WEST, BoxGeometry, TorusGeometry)

__version__ = "0.1.0"
