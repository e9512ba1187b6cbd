"""Training-cost prediction for neural-network computation graphs.

The pipeline: parse a computation graph, validate and shape-infer it,
turn it into a feature vector (scalar run features plus either the network
structural matrix or a learned graph embedding), train a zoo of shallow
regressors against measured or synthetic (time, memory) labels, and hand
the predictions to a genetic-algorithm scheduler that assigns jobs to
machines under sequential-peak memory feasibility.
"""

from .embedding import (EmbeddingModel, embed, load_embeddings,
                        save_embeddings, train_embeddings, wl_tokens)
from .errors import AbacusError
from .features import (FeatureLayout, FeatureVector, Optimizer, RunConfig,
                       count_flops, count_layers, count_params,
                       extract_features)
from .graph import (ComputationGraph, OperatorNode, OpType,
                    estimate_memory_shape_inference, infer_shapes, load_graph,
                    save_graph, topological_order, validate)
from .netgen import (GenSpec, SyntheticCostParams, build_dataset,
                     generate_random_network, synthetic_cost)
from .nsm import NSM, OperatorVocabulary, build_nsm, default_vocabulary, flatten_nsm
from .predictor import (DataPoint, Dataset, TrainedPredictor, ZooConfig,
                        evaluate, load_dataset, load_predictor, mre, predict,
                        save_dataset, save_predictor, split_dataset, train)
from .scheduler import (GAParams, Job, ScheduleResult, brute_force_schedule,
                        ga_schedule, greedy_schedule, load_jobs, makespan,
                        random_schedule, save_jobs)

__version__ = "0.1.0"

__all__ = [
    "AbacusError", "ComputationGraph", "OperatorNode", "OpType",
    "estimate_memory_shape_inference", "infer_shapes", "load_graph",
    "save_graph", "topological_order", "validate",
    "NSM", "OperatorVocabulary", "build_nsm", "default_vocabulary", "flatten_nsm",
    "FeatureLayout", "FeatureVector", "Optimizer", "RunConfig",
    "count_flops", "count_layers", "count_params", "extract_features",
    "DataPoint", "Dataset", "TrainedPredictor", "ZooConfig", "evaluate",
    "load_dataset", "load_predictor", "mre", "predict", "save_dataset",
    "save_predictor", "split_dataset", "train",
    "EmbeddingModel", "embed", "load_embeddings", "save_embeddings",
    "train_embeddings", "wl_tokens",
    "GenSpec", "SyntheticCostParams", "build_dataset",
    "generate_random_network", "synthetic_cost",
    "GAParams", "Job", "ScheduleResult", "brute_force_schedule", "ga_schedule",
    "greedy_schedule", "load_jobs", "makespan", "random_schedule", "save_jobs",
    "__version__",
]
