"""Superposed-prior generation and editing of 4-bar MIDI loops.

The engine models a loop as a permutation-invariant multiset of
note-event tuples and a generation task as a row-stochastic prior over
the flattened token sequence.  A bidirectional transformer maps priors
to posteriors; random-order autoregressive sampling resolves the
unknowns under hard support constraints.
"""

from .representation import (
    ATTRIBUTE_NAMES,
    BEATS_PER_LOOP,
    LOOP_TICKS,
    Loop,
    NoteEvent,
    NUM_ATTRIBUTES,
    RepresentationConfig,
    TICKS_PER_BEAT,
    VocabSpec,
    build_syntax_mask,
    build_vocab,
    decode_tokens,
    encode_loop,
    loop_from_json,
    loop_to_json,
    quantize_tempo,
    quantize_velocity,
    tempo_bin_bpm,
)
from .superposition import (
    PriorMatrix,
    SuperpositionSample,
    one_hot_prior,
    random_add,
    uniform_prior,
    validate_prior,
)
from .steering import (
    ACTION_NAMES,
    Constraint,
    EditSpec,
    NoteCountRange,
    Regenerate,
    Selector,
    action_to_spec,
    compile_spec,
)
from .model import (
    ModelConfig,
    SuperposedLM,
    init_model,
    load_checkpoint,
    load_checkpoint_file,
    save_checkpoint,
    save_checkpoint_file,
)
from .trainer import TrainConfig, TrainStats, batch_loss, evaluate_loss, train
from .sampler import SamplerConfig, SampleTrace, batch_generate, sample

__version__ = "0.1.0"

__all__ = [
    "ACTION_NAMES",
    "ATTRIBUTE_NAMES",
    "BEATS_PER_LOOP",
    "Constraint",
    "EditSpec",
    "LOOP_TICKS",
    "Loop",
    "ModelConfig",
    "NUM_ATTRIBUTES",
    "NoteCountRange",
    "NoteEvent",
    "PriorMatrix",
    "Regenerate",
    "RepresentationConfig",
    "SampleTrace",
    "SamplerConfig",
    "Selector",
    "SuperposedLM",
    "SuperpositionSample",
    "TICKS_PER_BEAT",
    "TrainConfig",
    "TrainStats",
    "VocabSpec",
    "action_to_spec",
    "batch_generate",
    "batch_loss",
    "build_syntax_mask",
    "build_vocab",
    "compile_spec",
    "decode_tokens",
    "encode_loop",
    "evaluate_loss",
    "init_model",
    "load_checkpoint",
    "load_checkpoint_file",
    "loop_from_json",
    "loop_to_json",
    "one_hot_prior",
    "quantize_tempo",
    "quantize_velocity",
    "random_add",
    "sample",
    "save_checkpoint",
    "save_checkpoint_file",
    "tempo_bin_bpm",
    "train",
    "uniform_prior",
    "validate_prior",
]
