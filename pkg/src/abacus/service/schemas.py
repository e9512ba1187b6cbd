"""Request/response models for the HTTP service.

These mirror the library's domain types closely; the service endpoints
convert between the two and add nothing of their own.
"""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator


class GraphNodeModel(BaseModel):
    id: int
    op: str
    attrs: dict[str, int] = Field(default_factory=dict)


class GraphModel(BaseModel):
    input_shape: tuple[int, int, int]
    nodes: list[GraphNodeModel]
    edges: list[tuple[int, int]]

    def to_doc(self) -> dict:
        return self.model_dump()


class RunConfigModel(BaseModel):
    batch_size: int
    learning_rate: float
    epochs: int
    optimizer: str = "sgd"
    # Input dimensions default to the graph's input shape.
    input_h: int | None = None
    input_w: int | None = None
    channels: int | None = None


class HealthResponse(BaseModel):
    status: str
    version: str


class IssueModel(BaseModel):
    subject: str
    message: str


class ValidateResponse(BaseModel):
    ok: bool
    issues: list[IssueModel]


class NSMResponse(BaseModel):
    operators: list[str]
    counts: list[list[int]]


class FeaturesRequest(BaseModel):
    graph: GraphModel
    config: RunConfigModel
    structural: str = "nsm"  # "nsm" or "embedding"
    embeddings: str | None = None  # registry name for structural="embedding"
    graph_id: str = ""


class FeaturesResponse(BaseModel):
    names: list[str]
    values: list[float]
    digest: str


class GenerateRequest(BaseModel):
    seed: int
    count: int = 20
    configs_per_graph: int = 3
    node_count: tuple[int, int] = (5, 60)
    branch_prob: float = 0.25
    pool_prob: float = 0.12
    channel_range: tuple[int, int] = (8, 256)
    kernel_choices: tuple[int, ...] = (1, 3, 5, 7)
    input_shape: tuple[int, int, int] = (3, 32, 32)


class GenerateResponse(BaseModel):
    graphs: list[GraphModel]
    points: int
    dataset_csv: str


class JobModel(BaseModel):
    id: str
    time_s: float
    mem_mib: float


class ScheduleRequest(BaseModel):
    jobs: list[JobModel]
    capacities: list[float] | None = None
    machines: int | None = None  # alternative: machine count, unbounded memory
    method: str = "ga"  # "ga", "brute" or "random"
    seed: int = 0
    generations: int = 20
    population: int = 20

    @model_validator(mode="after")
    def _machine_spec(self):
        if self.capacities is None and self.machines is None:
            raise ValueError("give capacities or machines")
        if (self.capacities is not None and self.machines is not None
                and self.machines != len(self.capacities)):
            raise ValueError(f"machines {self.machines} disagrees with "
                             f"{len(self.capacities)} capacities")
        if self.method not in ("ga", "brute", "random"):
            raise ValueError(f"unknown method {self.method!r}")
        return self


class ScheduleResponse(BaseModel):
    method: str
    makespan: float
    lower_bound: float
    assignment: dict[str, int]
    per_machine_time: list[float]
    history: list[float]


class RegisterRequest(BaseModel):
    name: str
    path: str


class PredictorInfo(BaseModel):
    name: str
    structural: str
    n_features: int
    chosen: dict[str, str]


class EmbeddingsInfo(BaseModel):
    name: str
    dims: int
    depth: int
    tokens: int


class PredictRequest(BaseModel):
    predictor: str
    graph: GraphModel
    config: RunConfigModel
    embeddings: str | None = None
    graph_id: str = ""


class PredictResponse(BaseModel):
    time_s: float
    mem_mib: float
