"""Corpus construction: MIDI ingestion, loop mining, dataset splitting."""

from .midi import (
    ExportError,
    MalformedHeader,
    MidiError,
    MidiNote,
    MidiSong,
    MidiTrack,
    TruncatedChunk,
    UnsupportedFormat,
    parse_midi,
    parse_tag_marker,
    write_loop_midi,
)
from .loops import (
    DetectConfig,
    LoopCandidate,
    MetricalAnalyzer,
    RuleBasedAnalyzer,
    default_metrical_salience,
    detect_loops,
    extract_window_loop,
    song_to_loop,
)
from .split import (
    DEFAULT_RATIOS,
    SPLIT_NAMES,
    SplitGraph,
    UnionFind,
    connected_hash_components,
    split_dataset,
)

__all__ = [
    "DEFAULT_RATIOS",
    "DetectConfig",
    "ExportError",
    "LoopCandidate",
    "MalformedHeader",
    "MetricalAnalyzer",
    "MidiError",
    "MidiNote",
    "MidiSong",
    "MidiTrack",
    "RuleBasedAnalyzer",
    "SPLIT_NAMES",
    "SplitGraph",
    "TruncatedChunk",
    "UnionFind",
    "UnsupportedFormat",
    "connected_hash_components",
    "default_metrical_salience",
    "detect_loops",
    "extract_window_loop",
    "parse_midi",
    "parse_tag_marker",
    "song_to_loop",
    "split_dataset",
    "write_loop_midi",
]
