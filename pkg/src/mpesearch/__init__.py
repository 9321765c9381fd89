"""Local search toolkit for most-probable-explanation queries.

Core pieces: a log-space factor-graph model with UAI file support, Gibbs
sampling, greedy and penalty-augmented local search, pluggable move
scorers (objective gain, distance oracle, learned attention scorer, and
blends), training-data generation, biased-walk analysis, and a benchmark
harness.
"""

__version__ = "0.1.0"

from .datagen import (
    DatagenConfig,
    TrainingRecord,
    collect_dataset,
    generate_query,
    label_neighbors,
    read_dataset,
    solve_mpe_anytime,
    write_dataset,
)
from .drift import AlphaEstimate, DriftConfig, DriftReport, drift_bound, measure_alpha, simulate_drift
from .errors import (
    ConfigError,
    ContractError,
    DriftError,
    EvalError,
    ModelError,
    MpeSearchError,
    ParseError,
    SamplingError,
    WeightFormatError,
)
from .evalkit import (
    MethodSpec,
    RunResult,
    SweepResult,
    lambda_sweep,
    pct_improvement,
    run_matrix,
    win_percentage,
)
from .gibbs import GibbsConfig, gibbs_sample
from .model import (
    Assignment,
    Factor,
    GraphicalModel,
    Move,
    QuerySpec,
    hamming_distance,
    ll_gain,
    log_potential_sum,
    moved,
    random_assignment,
    randomize_query_vars,
    value_gains,
)
from .scorers import (
    CombinedScorer,
    HammingOracleScorer,
    LLGainScorer,
    NeighborScorer,
    NeuralScorer,
    minmax_normalize,
    neural_forward,
)
from .search import (
    FIXED_INTERVAL,
    ON_LOCAL_OPTIMUM,
    GlsConfig,
    SearchConfig,
    Trajectory,
    collect_states,
    enumerate_neighbors,
    gls_plus_search,
    greedy_search,
    read_trajectory,
    write_trajectory,
)
from .uai import (
    parse_evidence,
    parse_evidence_file,
    parse_uai,
    parse_uai_file,
    serialize_uai,
    serialize_uai_file,
)
from .weights import ScorerWeights, load_weights, save_weights
