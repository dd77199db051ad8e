"""Configuration and request models."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ConfigMixin:
    """Strict pydantic configuration."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")


def _split_ints(value: Any) -> Any:
    if isinstance(value, str):
        return tuple(int(part) for part in value.replace(" ", "").split(",") if part)
    return value


class TrainConfig(ConfigMixin, BaseModel):
    """Hyperparameters shared by both neural models.

    Defaults for d, hidden widths, batch size and dropout are desk-scale
    choices; none of them come from published settings.
    """

    seed: int = Field(0, ge=0, description="Run seed; all randomness derives from it")
    d: int = Field(64, ge=1, description="Embedding dimension")
    hidden: tuple[int, int] = Field((128, 64), description="Widths of the two hidden layers")
    lr: float = Field(1e-3, gt=0, description="Learning rate")
    batch: int = Field(64, ge=1, description="Mini-batch size")
    epochs: int = Field(10, ge=1, description="Training epochs")
    dropout: float = Field(0.2, ge=0.0, lt=1.0, description="Inverted dropout rate")
    optimizer: Literal["sgd", "adam"] = Field("adam", description="Optimizer")

    @field_validator("hidden", mode="before")
    @classmethod
    def _parse_hidden(cls, value: Any) -> Any:
        return _split_ints(value)


class SelectionConfig(TrainConfig):
    """CNTAS training configuration."""

    negatives: int = Field(4, ge=1, description="Negatives (or pairs) per positive")
    loss: Literal["pointwise", "pairwise"] = Field("pointwise", description="Training loss")
    use_context: bool = Field(True, description="Keep the usage-context path")
    user_candidates: bool = Field(
        False, description="Restrict candidates to apps the user has touched in training"
    )
    horizon: int = Field(86400, ge=1, description="Usage context window in seconds")
    min_count: int = Field(
        2, ge=1, description="Terms and context apps seen less often share the UNK row"
    )


class RecommendationConfig(TrainConfig):
    """NeuSA training configuration."""

    k: int = Field(9, ge=1, description="Previous apps in the window")
    h: int | None = Field(None, ge=1, description="LSTM hidden size, defaults to d")
    d_u: int = Field(16, ge=1, description="User embedding dimension")
    d_t: int = Field(8, ge=1, description="Time-bin embedding dimension")
    use_user: bool = Field(True, description="Feed the user embedding")
    use_time: bool = Field(True, description="Feed the time-bin embedding")
    bin_usage_feature: bool = Field(
        False, description="Feed the bin-conditioned usage embedding"
    )
    same_day_bins: bool = Field(
        False, description="Bin usage from the current day only instead of all history"
    )
    min_app_count: int = Field(2, ge=1, description="Apps seen less often share UNK")

    @property
    def hidden_size(self) -> int:
        return self.h if self.h is not None else self.d


class GeneratorSpec(ConfigMixin, BaseModel):
    """Knobs of the synthetic dataset generator."""

    seed: int = Field(0, ge=0)
    num_users: int = Field(50, ge=1)
    num_apps: int = Field(10, ge=2)
    events_per_user: int = Field(2000, ge=2)
    zipf_exponent: float = Field(1.0, ge=0.0, description="Per-user popularity skew")
    chain: Literal["dirichlet", "cycle", "uniform"] = "dirichlet"
    concentration: float = Field(0.1, gt=0.0, description="Dirichlet concentration of chain rows")
    order: Literal[1, 3] = 1
    user_specific_chains: bool = False
    bin_preference_strength: float = Field(
        0.0, ge=0.0, description="Exponent on the 8 x apps time-of-day preference table"
    )
    session_length_mean: float = Field(8.0, ge=1.0)
    queries_per_user: int = Field(0, ge=0)
    vocab_per_app: int = Field(20, ge=1)
    mixing: float = Field(0.0, ge=0.0, le=1.0, description="Share of terms drawn from the shared pool")
    context_correlation: float = Field(
        0.0, ge=0.0, le=1.0, description="Probability the target is the most used app"
    )
    mean_extra_terms: float = Field(2.0, ge=0.0)
    start_epoch: int = Field(1_520_000_000, gt=0)

    @field_validator("order", mode="before")
    @classmethod
    def _parse_order(cls, value: Any) -> Any:
        if isinstance(value, str) and value.strip().isdigit():
            return int(value)
        return value

    @model_validator(mode="after")
    def _check_cycle(self) -> GeneratorSpec:
        if self.chain == "cycle" and self.order != 1:
            raise ValueError("cycle chains are first-order")
        return self


class IngestRequest(ConfigMixin, BaseModel):
    """Arguments of the ingest subcommand."""

    data_dir: Path = Field(..., description="Directory with raw TSV files")
    out_dir: Path = Field(..., description="Directory for normalized TSV files")
    top_apps: int | None = Field(None, ge=1, description="Keep only the N most used apps")
    allow_errors: bool = Field(False, description="Keep valid lines when some lines fail")


class SplitRequest(ConfigMixin, BaseModel):
    """Arguments of the split subcommand."""

    data_dir: Path
    out_dir: Path
    strategy: Literal["istas_r", "istas_t", "lsapp"]
    seed: int = Field(0, ge=0)
    repeats: int = Field(1, ge=1, description="Random splits with seeds seed..seed+repeats-1")
    jobs: int = Field(1, ge=1)


class TrainRequest(ConfigMixin, BaseModel):
    """Arguments of the train subcommand."""

    model: Literal["cntas", "neusa"]
    data_dir: Path
    split_path: Path
    out_dir: Path
    config_file: Path | None = Field(None, description="KEY=VALUE hyperparameter file")
    config: dict[str, Any] = Field(default_factory=dict, description="Flag overrides")
    sweep: tuple[int, ...] = Field(
        (), description="Negatives per positive (cntas) or window lengths (neusa) to compare"
    )
    ablations: bool = Field(False, description="Also train every user/time ablation preset")
    jobs: int = Field(1, ge=1)

    @field_validator("sweep", mode="before")
    @classmethod
    def _parse_sweep(cls, value: Any) -> Any:
        return _split_ints(value)

    @field_validator("sweep")
    @classmethod
    def _check_sweep(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(v < 1 for v in value):
            raise ValueError("sweep values must be positive")
        return value


class EvalRequest(ConfigMixin, BaseModel):
    """Arguments of the eval subcommand."""

    task: Literal["selection", "recommendation"]
    data_dir: Path | None = None
    split_path: Path | None = None
    out_dir: Path
    checkpoints: list[Path] = Field(default_factory=list)
    baselines: list[str] = Field(default_factory=list)
    predictions: Path | None = None
    oracle: bool = False
    embeddings: Path | None = None
    alpha: float | None = Field(None, gt=0.0, lt=1.0)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_inputs(self) -> EvalRequest:
        if self.predictions is None and (self.data_dir is None or self.split_path is None):
            raise ValueError("data_dir and split_path are required unless predictions are given")
        return self


class AnalyzeRequest(ConfigMixin, BaseModel):
    """Arguments of the analyze subcommand."""

    data_dir: Path
    out_dir: Path
    threshold: float = Field(0.05, ge=0.0, le=1.0, description="Edge threshold for transitions")
    max_rank: int = Field(10, ge=1)
    top_n: int = Field(10, ge=1)


class SynthRequest(ConfigMixin, BaseModel):
    """Arguments of the synth subcommand."""

    out_dir: Path
    config_file: Path | None = Field(None, description="KEY=VALUE generator file")
    spec: dict[str, Any] = Field(default_factory=dict, description="Flag overrides")


class PredictRequest(ConfigMixin, BaseModel):
    """Arguments of the predict subcommand."""

    checkpoint: Path
    data_dir: Path
    user_id: str
    timestamp: int = Field(..., gt=0)
    query: str | None = None
    top_k: int = Field(10, ge=1)
