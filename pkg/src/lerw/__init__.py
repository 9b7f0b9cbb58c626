"""Loop erasure on Markov chains, exact erasure laws, and fractal scaling limits.

Layers, bottom up:

- erasure: path-level loop erasure and partial loop erasure
- chain: finite Markov chains with exact rational or float arithmetic
- exactlaw: Green functions and exact laws of erased trajectories
- network: electrical networks, traces, and hitting distributions
- fractal: gasket and carpet approximation graphs
- limits: metric-space tooling and scaling experiments on fractal graphs
- cli: the ``lerw`` command line entry point
"""

from lerw.chain import (
    MarkovChain,
    StepCapExceeded,
    build_chain,
    chain_from_text,
    chain_to_text,
    reachability_closure,
    sample_until_entry,
    trajectory_stream,
)
from lerw.erasure import (
    ErasureResult,
    algorithm_one,
    algorithm_two,
    concat_paths,
    detect_long_jumps,
    detect_loops,
    erase_step,
    loop_erase,
    loop_erase_naive,
    partial_loop_erase,
    partial_loop_erase_naive,
    refinement_erase,
    reverse_path,
)
from lerw.exactlaw import (
    GreenTable,
    GuardError,
    PathLaw,
    enumerate_erasure_law,
    enumerate_trajectories,
    f_product,
    green,
    green_diagonal,
    law_from_text,
    law_to_text,
    le_path_probability,
    traced_kernel,
    tv_distance,
)
from lerw.fractal import (
    CarpetTemplate,
    FractalGraph,
    adjacency_arrays,
    carpet_graph,
    corner_indices,
    gasket_graph,
    graph_to_text,
    standard_carpet,
    template_from_text,
    template_to_text,
    to_xy,
    uniform_network,
    validate_carpet_template,
)
from lerw.limits import (
    EmpiricalSetLaw,
    WalkConfig,
    atom_points,
    coupled_refinement_distance,
    empirical_tv,
    hausdorff,
    kernel_convergence,
    lerw_set_law,
    prokhorov,
    resistance_metric,
    resistance_scaling,
    set_law_from_text,
    set_law_to_text,
)
from lerw.network import (
    ElectricalNetwork,
    HittingBoundReport,
    build_network,
    check_hitting_bound,
    effective_resistance,
    effective_resistance_to_set,
    expected_exit_time,
    harmonic_extension,
    hitting_distribution,
    network_from_text,
    network_to_text,
    trace_network,
    walk_from_network,
)

__version__ = "0.1.0"

__all__ = [
    "CarpetTemplate",
    "ElectricalNetwork",
    "EmpiricalSetLaw",
    "ErasureResult",
    "FractalGraph",
    "GreenTable",
    "GuardError",
    "HittingBoundReport",
    "MarkovChain",
    "PathLaw",
    "StepCapExceeded",
    "WalkConfig",
    "adjacency_arrays",
    "algorithm_one",
    "algorithm_two",
    "atom_points",
    "build_chain",
    "build_network",
    "carpet_graph",
    "chain_from_text",
    "chain_to_text",
    "check_hitting_bound",
    "concat_paths",
    "corner_indices",
    "coupled_refinement_distance",
    "detect_long_jumps",
    "detect_loops",
    "effective_resistance",
    "effective_resistance_to_set",
    "empirical_tv",
    "enumerate_erasure_law",
    "enumerate_trajectories",
    "erase_step",
    "expected_exit_time",
    "f_product",
    "gasket_graph",
    "graph_to_text",
    "green",
    "green_diagonal",
    "harmonic_extension",
    "hausdorff",
    "hitting_distribution",
    "kernel_convergence",
    "law_from_text",
    "law_to_text",
    "le_path_probability",
    "lerw_set_law",
    "loop_erase",
    "loop_erase_naive",
    "network_from_text",
    "network_to_text",
    "partial_loop_erase",
    "partial_loop_erase_naive",
    "prokhorov",
    "reachability_closure",
    "refinement_erase",
    "resistance_metric",
    "resistance_scaling",
    "reverse_path",
    "sample_until_entry",
    "set_law_from_text",
    "set_law_to_text",
    "standard_carpet",
    "template_from_text",
    "template_to_text",
    "to_xy",
    "trace_network",
    "traced_kernel",
    "trajectory_stream",
    "tv_distance",
    "uniform_network",
    "validate_carpet_template",
    "walk_from_network",
]
