"""Dataset handling and the regressor zoo for cost prediction.

A dataset row ties one (graph, run config) feature vector to measured
training time and peak memory, with provenance columns (graph, machine,
framework) that are carried through CSV round-trips but deliberately kept
out of the feature matrix: a predictor is only portable across machines if
hardware identity is not baked into its inputs. Train per machine/framework
by filtering rows instead (Dataset.filter).

Training fits every zoo member per target on an internal split, scores each
by mean relative error on the held-back fraction, keeps the winner, and
refits it on all rows. Models that need comparable feature scales (kNN,
ridge) are wrapped in a standardizing pipeline; trees are fit raw.
"""

from __future__ import annotations

import csv
import io
import pickle
from dataclasses import dataclass, field

import numpy as np
from sklearn.ensemble import (ExtraTreesRegressor, GradientBoostingRegressor,
                              RandomForestRegressor)
from sklearn.linear_model import Ridge
from sklearn.neighbors import KNeighborsRegressor
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler
from sklearn.tree import DecisionTreeRegressor

from .errors import (DegenerateTarget, InconsistentLayout, LayoutMismatch,
                     LengthMismatch, NonPositiveTruth, TooFewPoints,
                     VersionMismatch)
from .features import FeatureLayout, FeatureVector

PREDICTOR_MAGIC = b"ABACUS-PRED-1\n"

TARGETS = ("time_s", "mem_mib")

_SCALED_MODELS = frozenset({"knn", "ridge"})


def mre(predicted, truth) -> float:
    """Mean relative error: mean(|pred - truth| / truth)."""
    p = np.asarray(predicted, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.ndim != 1 or t.ndim != 1 or p.shape != t.shape:
        raise LengthMismatch(f"shape mismatch: predicted {p.shape} vs truth {t.shape}")
    if p.size == 0:
        raise TooFewPoints("mre over zero points is undefined")
    if np.any(t <= 0):
        raise NonPositiveTruth("truth values must be strictly positive")
    return float(np.mean(np.abs(p - t) / t))


@dataclass
class DataPoint:
    graph_id: str
    machine_id: str
    framework_id: str
    features: FeatureVector
    time_s: float
    mem_mib: float


@dataclass
class Dataset:
    layout: FeatureLayout
    points: list[DataPoint] = field(default_factory=list)

    def __post_init__(self):
        want = self.layout.digest()
        for p in self.points:
            if p.features.layout.digest() != want:
                raise InconsistentLayout(
                    f"point {p.graph_id} has layout {p.features.layout.digest()[:12]}, "
                    f"dataset has {want[:12]}")

    def __len__(self) -> int:
        return len(self.points)

    def append(self, point: DataPoint) -> None:
        if point.features.layout.digest() != self.layout.digest():
            raise InconsistentLayout(f"point {point.graph_id} does not match dataset layout")
        self.points.append(point)

    def feature_matrix(self) -> np.ndarray:
        return np.stack([p.features.values for p in self.points])

    def target(self, name: str) -> np.ndarray:
        if name not in TARGETS:
            raise ValueError(f"unknown target {name!r}")
        return np.array([getattr(p, name) for p in self.points], dtype=np.float64)

    def filter(self, machine_id: str | None = None,
               framework_id: str | None = None) -> "Dataset":
        kept = [p for p in self.points
                if (machine_id is None or p.machine_id == machine_id)
                and (framework_id is None or p.framework_id == framework_id)]
        return Dataset(layout=self.layout, points=kept)


def split_dataset(ds: Dataset, ratio: float = 0.7, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Shuffled split with round(ratio * n) points in the first part."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio {ratio} outside (0, 1)")
    n = len(ds)
    n_train = int(round(ratio * n))
    if n_train == 0 or n_train == n:
        raise TooFewPoints(f"split of {n} points at ratio {ratio} leaves an empty side")
    perm = np.random.default_rng(seed).permutation(n)
    train = [ds.points[i] for i in perm[:n_train]]
    test = [ds.points[i] for i in perm[n_train:]]
    return Dataset(ds.layout, train), Dataset(ds.layout, test)


# ---------------------------------------------------------------------------
# CSV round-trip

_PROVENANCE_COLUMNS = ("graph_id", "machine_id", "framework_id")


def dataset_to_csv(ds: Dataset) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(list(_PROVENANCE_COLUMNS) + list(ds.layout.names) + list(TARGETS))
    for p in ds.points:
        row = [p.graph_id, p.machine_id, p.framework_id]
        row += [repr(float(v)) for v in p.features.values]
        row += [repr(float(p.time_s)), repr(float(p.mem_mib))]
        writer.writerow(row)
    return out.getvalue()


def save_dataset(ds: Dataset, path: str) -> None:
    with open(path, "w", newline="") as f:
        f.write(dataset_to_csv(ds))


def load_dataset(path: str) -> Dataset:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise TooFewPoints(f"{path} is empty") from None
        prefix = tuple(header[:3])
        suffix = tuple(header[-2:])
        if prefix != _PROVENANCE_COLUMNS or suffix != TARGETS:
            raise InconsistentLayout(f"unexpected dataset header in {path}: {header[:4]}...")
        names = header[3:-2]
        if not names:
            raise InconsistentLayout(f"{path} has no feature columns")
        layout = FeatureLayout.from_feature_names(names)
        ds = Dataset(layout=layout)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise InconsistentLayout(
                    f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            values = np.array([float(v) for v in row[3:-2]], dtype=np.float64)
            ds.append(DataPoint(graph_id=row[0], machine_id=row[1], framework_id=row[2],
                                features=FeatureVector(values=values, layout=layout),
                                time_s=float(row[-2]), mem_mib=float(row[-1])))
        return ds


# ---------------------------------------------------------------------------
# The zoo

def _make_model(name: str, seed: int, n_jobs: int = -1):
    if name == "decision_tree":
        return DecisionTreeRegressor(random_state=seed)
    if name == "random_forest":
        return RandomForestRegressor(n_estimators=200, random_state=seed, n_jobs=n_jobs)
    if name == "gradient_boosting":
        return GradientBoostingRegressor(n_estimators=300, max_depth=6,
                                         learning_rate=0.1, random_state=seed)
    if name == "extra_trees":
        return ExtraTreesRegressor(n_estimators=200, random_state=seed, n_jobs=n_jobs)
    if name == "knn":
        return make_pipeline(StandardScaler(),
                             KNeighborsRegressor(n_neighbors=5, weights="distance"))
    if name == "ridge":
        return make_pipeline(StandardScaler(), Ridge(alpha=1.0))
    raise ValueError(f"unknown model {name!r}")


DEFAULT_MODELS = ("decision_tree", "random_forest", "gradient_boosting",
                  "extra_trees", "knn", "ridge")


@dataclass
class ZooConfig:
    models: tuple[str, ...] = DEFAULT_MODELS
    val_fraction: float = 0.2
    log_targets: bool = True
    seed: int = 0
    n_jobs: int = -1

    def __post_init__(self):
        if not self.models:
            raise ValueError("empty model list")
        for name in self.models:
            _make_model(name, 0)  # raises on unknown names
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError(f"val_fraction {self.val_fraction} outside (0, 1)")
        if self.n_jobs == 0:
            raise ValueError("n_jobs must be -1 or positive")


@dataclass
class TrainedPredictor:
    layout: FeatureLayout
    config: ZooConfig
    chosen: dict[str, str]                      # target -> model name
    models: dict[str, object]                   # target -> fitted estimator
    validation_mre: dict[str, dict[str, float]]  # target -> model name -> MRE


def _fit(name: str, cfg: ZooConfig, X: np.ndarray, y: np.ndarray):
    model = _make_model(name, cfg.seed, cfg.n_jobs)
    model.fit(X, np.log(y) if cfg.log_targets else y)
    return model


def _predict_matrix(model, X: np.ndarray, log_targets: bool) -> np.ndarray:
    raw = np.asarray(model.predict(X), dtype=np.float64)
    return np.exp(raw) if log_targets else np.maximum(raw, 0.0)


def train(ds: Dataset, config: ZooConfig | None = None) -> TrainedPredictor:
    """Fit the zoo per target, pick the min-MRE member, refit it on all rows."""
    cfg = config or ZooConfig()
    n = len(ds)
    if n < 5:
        raise TooFewPoints(f"need at least 5 points to train, got {n}")
    X = ds.feature_matrix()
    targets = {name: ds.target(name) for name in TARGETS}
    for name, y in targets.items():
        if np.any(y <= 0):
            raise DegenerateTarget(f"target {name} has non-positive values")

    perm = np.random.default_rng(cfg.seed).permutation(n)
    n_val = max(1, int(round(cfg.val_fraction * n)))
    if n - n_val < 2:
        raise TooFewPoints(f"{n} points leave too small a fit set at "
                           f"val_fraction {cfg.val_fraction}")
    val_idx, fit_idx = perm[:n_val], perm[n_val:]

    chosen: dict[str, str] = {}
    fitted: dict[str, object] = {}
    scores: dict[str, dict[str, float]] = {}
    for target, y in targets.items():
        scores[target] = {}
        for name in cfg.models:
            model = _fit(name, cfg, X[fit_idx], y[fit_idx])
            pred = _predict_matrix(model, X[val_idx], cfg.log_targets)
            scores[target][name] = mre(pred, y[val_idx])
        best = min(cfg.models, key=lambda name: scores[target][name])
        chosen[target] = best
        fitted[target] = _fit(best, cfg, X, y)

    return TrainedPredictor(layout=ds.layout, config=cfg, chosen=chosen,
                            models=fitted, validation_mre=scores)


def predict_matrix(p: TrainedPredictor, X: np.ndarray) -> dict[str, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(p.layout.names):
        raise LayoutMismatch(f"expected (n, {len(p.layout.names)}) matrix, got {X.shape}")
    return {target: _predict_matrix(p.models[target], X, p.config.log_targets)
            for target in TARGETS}


@dataclass
class Prediction:
    time_s: float
    mem_mib: float


def predict(p: TrainedPredictor, features: FeatureVector) -> Prediction:
    if features.layout.digest() != p.layout.digest():
        raise LayoutMismatch(
            f"feature layout {features.layout.digest()[:12]} does not match the "
            f"predictor's {p.layout.digest()[:12]}")
    out = predict_matrix(p, features.values.reshape(1, -1))
    return Prediction(time_s=float(out["time_s"][0]), mem_mib=float(out["mem_mib"][0]))


@dataclass
class EvaluationReport:
    n_points: int
    mre_by_target: dict[str, float]


def evaluate(p: TrainedPredictor, ds: Dataset) -> EvaluationReport:
    if ds.layout.digest() != p.layout.digest():
        raise LayoutMismatch("dataset layout does not match the predictor's")
    if len(ds) == 0:
        raise TooFewPoints("cannot evaluate on an empty dataset")
    out = predict_matrix(p, ds.feature_matrix())
    report = {target: mre(out[target], ds.target(target)) for target in TARGETS}
    return EvaluationReport(n_points=len(ds), mre_by_target=report)


# ---------------------------------------------------------------------------
# Persistence

def save_predictor(p: TrainedPredictor, path: str) -> None:
    with open(path, "wb") as f:
        f.write(PREDICTOR_MAGIC)
        pickle.dump(p, f)


def load_predictor(path: str) -> TrainedPredictor:
    """Load a predictor saved by save_predictor.

    The payload is a pickle; only load files you produced yourself.
    """
    with open(path, "rb") as f:
        magic = f.read(len(PREDICTOR_MAGIC))
        if magic != PREDICTOR_MAGIC:
            raise VersionMismatch(f"{path} does not start with {PREDICTOR_MAGIC!r}")
        p = pickle.load(f)
    if not isinstance(p, TrainedPredictor):
        raise VersionMismatch(f"{path} payload is {type(p).__name__}, "
                              "expected TrainedPredictor")
    return p
