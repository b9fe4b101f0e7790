import numpy as np
import pytest

from forest_recourse import FeatureSpec, Leaf, RandomForest, Split, TrainConfig
from forest_recourse.evaluation import SyntheticConfig, generate_synthetic

L0 = Leaf(0, 0.0, 10)
L1 = Leaf(1, 1.0, 10)
UNIT2 = (FeatureSpec("x1", 0.0, 1.0), FeatureSpec("x2", 0.0, 1.0))


def stumps(thresholds, d=1):
    """One "x1 <= t -> novice, else expert" stump per threshold."""
    schema = tuple(FeatureSpec(f"x{i + 1}", 0.0, 1.0) for i in range(d))
    return RandomForest(tuple(Split(0, t, L0, L1) for t in thresholds), schema)


@pytest.fixture
def two_tree_forest():
    # Tree 1 expert leaf is {x1 > 0.5, x2 <= 0.2}; cuts x1 {0.3, 0.5}, x2 {0.2, 0.7}
    tree1 = Split(0, 0.5, L0, Split(1, 0.2, L1, L0))
    tree2 = Split(1, 0.7, Split(0, 0.3, L0, L1), L0)
    return RandomForest((tree1, tree2), UNIT2)


@pytest.fixture
def three_box_forest():
    # three expert boxes that all overlap in x1 in (0.3, 0.5], x2 <= 0.2
    a = Split(0, 0.3, L0, Split(0, 0.5, L1, L0))
    b = Split(0, 0.5, Split(1, 0.7, L1, L0), L0)
    c = Split(0, 0.3, L0, Split(1, 0.2, L1, L0))
    return RandomForest((a, b, c), UNIT2)


GRID = np.round(np.arange(1, 20) / 20, 2)  # coarse grid so trees share thresholds


def _random_tree(rng, d, depth, lo, hi):
    room = [f for f in range(d) if ((GRID > lo[f]) & (GRID < hi[f])).any()]
    if depth == 0 or not room or rng.random() < 0.25:
        frac = float(rng.integers(0, 11)) / 10
        return Leaf(int(frac > 0.5), frac, int(rng.integers(1, 50)))
    f = int(rng.choice(room))
    t = float(rng.choice(GRID[(GRID > lo[f]) & (GRID < hi[f])]))
    lhi, rlo = list(hi), list(lo)
    lhi[f], rlo[f] = t, t
    return Split(f, t, _random_tree(rng, d, depth - 1, lo, lhi), _random_tree(rng, d, depth - 1, rlo, hi))


def random_small_forest(rng, d=None, n_trees=None, max_depth=None) -> RandomForest:
    """Random hand-made forest: <= 10 trees, depth <= 3, d <= 4, satisfiable paths."""
    d = d or int(rng.integers(1, 5))
    n_trees = n_trees or int(rng.integers(1, 11))
    max_depth = max_depth or int(rng.integers(1, 4))
    schema = tuple(FeatureSpec(f"x{i + 1}", 0.0, 1.0) for i in range(d))
    trees = tuple(_random_tree(rng, d, max_depth, [0.0] * d, [1.0] * d) for _ in range(n_trees))
    return RandomForest(trees, schema, TrainConfig(n_trees=n_trees, max_depth=max_depth))


def walk(node, x):
    """Reference tree evaluation straight off the node objects."""
    while isinstance(node, Split):
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return node.label


def brute_proba(forest, x):
    return sum(walk(t, x) for t in forest.trees) / forest.n_trees


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic(SyntheticConfig(n_per_class=300, d=4, separation=3.0, n_groups=3, seed=5))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("]")[1].split(".")[0])):
            terminalreporter.write_line(line)
