"""Single-feature recourse for random forest classifiers.

Train a forest, discretize its feature space into integer partitions, and
answer "which one feature should change, and to what" for instances the
forest calls novice.
"""
from .actions import FeedbackAction
from .baselines import MethodId, iter_iter, rand_iter, rand_rand
from .evaluation import (
    Engine,
    MetricsReport,
    QueryResult,
    SyntheticConfig,
    alpha_sweep,
    effectiveness,
    generate_synthetic,
    run_cv_benchmark,
    scalability_sweep,
    success_rate,
)
from .exceptions import (
    AlreadyExpert,
    ConfigError,
    DegenerateTrainingSet,
    DomainError,
    ForestFormatError,
    NoSolution,
    RecourseError,
    SchemaError,
)
from .forest import (
    Dataset,
    FeatureSpec,
    Leaf,
    RandomForest,
    Split,
    TrainConfig,
    load_forest,
    predict_proba,
    read_dataset_csv,
    save_forest,
    train_forest,
    write_dataset_csv,
)
from .geometry import (
    IntRect,
    PartitionTable,
    RectBank,
    build_partition_table,
    discretize_point,
    enumerate_points,
    extract_expert_rects,
    extract_rects,
    undiscretize_value,
)
from .recourse import (
    DAConfig,
    PrunedRect,
    densest_center,
    formulate_feedback,
    prune_rects,
    representatives_per_dim,
    select_representatives,
)

__version__ = "0.1.0"
