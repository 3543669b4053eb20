"""
Pydantic schemas for run configuration and machine-readable documents.

These schemas define every document that crosses the process boundary:
the run configuration (file + CLI overrides), circuit JSON, the
resource-estimate report and the eval and multi-run summaries.
Configuration schemas forbid unknown keys so a typo in a config file is
rejected instead of silently ignored.
"""

from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


# Circuit Schemas
class GateDocument(BaseModel):
    """One gate of a serialized circuit."""
    kind: str = Field(..., min_length=2, max_length=16)
    target: int = Field(..., ge=0)
    control: Optional[int] = Field(default=None, ge=0)
    param_slot: Optional[int] = Field(default=None, ge=0)


class CircuitDocument(BaseModel):
    """Serialized GateCircuit (gate list with kind/target/control/param_slot)."""
    format: str = Field(default="quixer-circuit/1")
    num_qubits: int = Field(..., ge=1)
    num_params: int = Field(..., ge=0)
    gates: List[GateDocument] = Field(default_factory=list)


# Training Schemas
class TrainConfig(BaseModel):
    """
    Optimization knobs.

    Defaults mirror the PTB setup (32 contexts x 32 consecutive targets per
    optimizer step, 30 epochs); learning rates, dropout and weight decay are
    placeholders to be tuned per run.
    """
    model_config = ConfigDict(extra="forbid")

    lr_max: float = Field(default=2e-3, gt=0)
    lr_min: float = Field(default=1e-5, gt=0)
    epochs: int = Field(default=30, ge=0)
    batch_contexts: int = Field(default=32, ge=1)
    tokens_per_context: int = Field(default=32, ge=1)
    window: int = Field(default=32, ge=1)
    stride: int = Field(default=1, ge=1)
    weight_decay: float = Field(default=1e-4, ge=0)
    dropout: float = Field(default=0.1, ge=0, lt=1)
    seed: int = Field(default=0, ge=0)
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)
    clip_norm: Optional[float] = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def check_learning_rates(self):
        """lr_max >= lr_min > 0."""
        if self.lr_max < self.lr_min:
            raise ValueError(f"lr_max ({self.lr_max}) must be >= lr_min ({self.lr_min})")
        return self

    @property
    def step_size(self) -> int:
        """(context, target) pairs per optimizer step."""
        return self.batch_contexts * self.tokens_per_context


class RunConfig(TrainConfig):
    """
    Flat run configuration: training knobs plus model shape, data paths and
    output location. Every key maps one-to-one onto a `--key-with-dashes`
    CLI flag.
    """
    num_qubits: int = Field(default=6, ge=2, le=12)
    degree: int = Field(default=3, ge=1)
    ansatz_layers: int = Field(default=4, ge=1)
    embed_dim: int = Field(default=512, ge=1)
    head_hidden: Optional[int] = Field(default=None, ge=1)

    train_path: str = Field(default="data/ptb/ptb.train.txt", min_length=1)
    valid_path: str = Field(default="data/ptb/ptb.valid.txt", min_length=1)
    test_path: str = Field(default="data/ptb/ptb.test.txt", min_length=1)
    append_eos: bool = Field(default=True)

    output_dir: Optional[str] = Field(default=None)
    threads: int = Field(default=1, ge=1)
    chunk_size: int = Field(default=64, ge=1)
    freeze_embeddings: bool = Field(default=False)
    step_log: bool = Field(default=False)

    @property
    def effective_head_hidden(self) -> int:
        """Head width, defaulting to 4 * 3q."""
        return self.head_hidden if self.head_hidden is not None else 12 * self.num_qubits

    def train_config(self) -> TrainConfig:
        """The TrainConfig subset of this run configuration."""
        return TrainConfig(**{k: getattr(self, k) for k in TrainConfig.model_fields})


# Resource Estimation Schemas
class ResourceQuery(BaseModel):
    """Instance to cost on fault-tolerant hardware."""
    model_config = ConfigDict(extra="forbid")

    q: int = Field(..., ge=1)
    n: int = Field(..., ge=2)
    l: int = Field(default=1, ge=1)
    d: int = Field(..., ge=1)
    g_override: Optional[int] = Field(default=None, ge=1)
    use_ancilla_select: bool = Field(default=False)
    ancilla_select_multiplier: int = Field(default=1, ge=1)
    prep_gates_override: Optional[int] = Field(default=None, ge=0)


class ResourceEstimate(BaseModel):
    """Concrete qubit and gate totals for one ResourceQuery."""
    format: str = Field(default="quixer-resources/1")
    q: int
    n: int
    l: int
    d: int
    gates_per_token: int = Field(..., ge=0)
    use_ancilla_select: bool
    control_qubits: int = Field(..., ge=0)
    ancilla_qubits: int = Field(..., ge=0)
    total_qubits: int = Field(..., ge=0)
    multicontrolled_cost: int = Field(..., ge=0)
    gates_select: int = Field(..., ge=0)
    gates_prep_bound: Union[int, str]
    gates_qsvt_projectors: int = Field(..., ge=0)
    gates_total: int = Field(..., ge=0)
    asymptotic_class: str
    notes: List[str] = Field(default_factory=list)


# Run Report Schemas
class EvalSummary(BaseModel):
    """What `eval` measured on one split (eval-<split>.json)."""
    format: str = Field(default="quixer-eval/1")
    checkpoint: str
    split: str
    windows: int = Field(..., ge=0)
    perplexity: float = Field(..., gt=0)
    postselection_mean: float
    postselection_min: float
    postselection_max: float


class RunSummary(BaseModel):
    """One run directory reduced to its best epoch."""
    run_dir: str
    best_epoch: int = Field(..., ge=1)
    best_valid_ppl: float
    test_ppl: Optional[float] = None
    postselection_mean: float


class AggregateReport(BaseModel):
    """
    Statistics over several runs (typically one per seed).

    Standard deviations use ddof=1 and are 0.0 for a single run. Test
    perplexity covers only the runs with an eval-test.json.
    """
    format: str = Field(default="quixer-aggregate/1")
    num_runs: int = Field(..., ge=1)
    valid_ppl_mean: float
    valid_ppl_std: float
    test_runs: int = Field(..., ge=0)
    test_ppl_mean: Optional[float] = None
    test_ppl_std: Optional[float] = None
    postselection_mean: float
    postselection_min_of_means: float
    runs: List[RunSummary] = Field(default_factory=list)

__all__ = [
    "GateDocument",
    "CircuitDocument",
    "TrainConfig",
    "RunConfig",
    "ResourceQuery",
    "ResourceEstimate",
    "EvalSummary",
    "RunSummary",
    "AggregateReport",
]
