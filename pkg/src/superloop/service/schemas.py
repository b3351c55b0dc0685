"""Pydantic wire schemas for the /v1 API.

These mirror the JSON forms documented in the steering and
representation modules; validation failures surface as 400 responses.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class NoteModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    instrument: int = Field(ge=0)
    pitch: int = Field(ge=0)
    onset_beat: int = Field(ge=0, le=16)
    onset_tick: int = Field(ge=0, le=23)
    offset_beat: int = Field(ge=0, le=16)
    offset_tick: int = Field(ge=0, le=23)
    velocity: int = Field(ge=0, le=31)
    tag: int = Field(ge=0, le=39)


class LoopModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    notes: list[NoteModel] = Field(default_factory=list)
    tempo_bpm: float = 120.0
    tags: list[int] = Field(default_factory=lambda: [0])


class SelectorModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["all", "slots", "instrument", "time_window"] = "all"
    slots: Optional[list[int]] = None
    instrument: Optional[int] = None
    pitch_in: Optional[list[int]] = None
    start_tick: Optional[int] = None
    end_tick: Optional[int] = None


class ConstraintModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    selector: SelectorModel
    attribute: Literal[
        "instrument", "pitch", "onset_beat", "onset_tick",
        "offset_beat", "offset_tick", "velocity", "tempo", "tag",
    ]
    allowed: list[int]
    allow_inactive: bool = False


class NoteCountModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    min: int = Field(ge=0)
    max: int = Field(ge=0)
    slots: Optional[list[int]] = None


class RegenerateModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    selector: SelectorModel
    attributes: Optional[list[str]] = None


class EditSpecModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    base: Optional[LoopModel] = None
    constraints: list[ConstraintModel] = Field(default_factory=list)
    note_count: Optional[NoteCountModel] = None
    regenerate: Optional[RegenerateModel] = None


class SparsePriorRowModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t: int = Field(ge=0)
    support: list[tuple[int, float]]


class SparsePriorModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rows: list[SparsePriorRowModel] = Field(default_factory=list)
    default: Literal["uniform-valid", "truth"] = "uniform-valid"


class SamplerOptionsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: Optional[int] = None
    temperature: float = 1.0
    enforce_prior_support: bool = True


class GenerateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    spec: Optional[EditSpecModel] = None
    prior: Optional[SparsePriorModel] = None
    sampler: SamplerOptionsModel = Field(default_factory=SamplerOptionsModel)


class EditRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    action: str
    args: dict = Field(default_factory=dict)
    sampler: SamplerOptionsModel = Field(default_factory=SamplerOptionsModel)


class LoopRecordModel(BaseModel):
    id: str
    loop: dict
    created_at: float
    parent_id: Optional[str]
    seed: int


class LoopListModel(BaseModel):
    records: list[LoopRecordModel]
    total: int
    offset: int


class HealthModel(BaseModel):
    status: str
    model_loaded: bool
    checkpoint: Optional[str]
    n_notes: Optional[int]
    vocab_size: Optional[int]


class ApiErrorModel(BaseModel):
    code: str
    message: str
    detail: Optional[dict] = None
