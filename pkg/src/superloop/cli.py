"""Command-line entry points.

    superloop vocab dump                 vocabulary layout as TSV
    superloop init                       write a freshly initialised checkpoint
    superloop train                      train on a JSONL loop corpus
    superloop extract                    mine loops from a directory of .mid files
    superloop sample                     compile a spec, sample, export MIDI
    superloop serve                      run the HTTP editing service

The SUPERLOOP_SEED environment variable supplies the default seed
wherever one is not given explicitly.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import click
import numpy as np

from . import instruments
from .model import ModelConfig, init_model, load_checkpoint_file, save_checkpoint_file
from .representation import (
    ATTRIBUTE_NAMES,
    build_syntax_mask,
    build_vocab,
    encode_loop,
    loop_from_json,
    loop_to_json,
)
from .sampler import SamplerConfig, sample
from .steering import compile_spec, spec_from_json
from .trainer import TrainConfig, train

SEED_ENV_VAR = "SUPERLOOP_SEED"


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV_VAR, "0"))


@click.group()
def main():
    """Superposed loop engine."""


@main.group()
def vocab():
    """Vocabulary inspection."""


@vocab.command("dump")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write TSV here instead of stdout.")
def vocab_dump(out):
    """Emit the token layout as TSV: token_id, attribute, label."""
    spec = build_vocab()
    lines = ["token_id\tattribute\tlabel"]
    for token in range(spec.total):
        attr, value = spec.value_of(token)
        name = ATTRIBUTE_NAMES[attr]
        if value is None:
            label = f"undefined:{name}"
        elif attr == 0:
            label = instruments.class_name(value)
        elif attr == 1:
            if value < spec.pitched_values:
                label = instruments.pitch_name(value)
            else:
                label = "drum:" + instruments.DRUM_NAMES[value - spec.pitched_values]
        elif name in ("onset_beat", "offset_beat"):
            label = f"beat_{value}"
        elif name in ("onset_tick", "offset_tick"):
            label = f"tick_{value}"
        elif name == "velocity":
            label = f"vel_{value * 4}-{value * 4 + 3}"
        elif name == "tempo":
            from .representation import tempo_bin_bpm
            label = f"{tempo_bin_bpm(value):.1f}bpm"
        else:
            label = f"tag_{value}"
        lines.append(f"{token}\t{name}\t{label}")
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text)
        click.echo(f"wrote {spec.total} tokens to {out}")
    else:
        click.echo(text, nl=False)


@main.command("init")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Model config JSON (defaults to desk scale).")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def init_cmd(config_path, seed, out):
    """Write a freshly initialised (untrained) checkpoint."""
    config = _load_model_config(config_path)
    seed = seed if seed is not None else _default_seed()
    model = init_model(config, seed=seed)
    save_checkpoint_file(model, out)
    click.echo(f"initialised {sum(p.numel() for p in model.parameters())} parameters -> {out}")


def _load_model_config(config_path) -> ModelConfig:
    if config_path is None:
        return ModelConfig()
    doc = json.loads(Path(config_path).read_text())
    return ModelConfig.from_json(doc.get("model", doc))


@main.command("train")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="JSONL file of loop records.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help='JSON with "model" and "train" sections.')
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Checkpoint output path.")
@click.option("--stats", "stats_path", type=click.Path(dir_okay=False), default=None,
              help="Write JSON-lines step statistics here.")
def train_cmd(corpus_path, config_path, out_path, stats_path):
    """Train on a JSONL corpus of loop records."""
    model_config = _load_model_config(config_path)
    train_config = TrainConfig(seed=_default_seed())
    if config_path is not None:
        doc = json.loads(Path(config_path).read_text())
        if "train" in doc:
            train_config = TrainConfig.from_json(doc["train"])
    vocab_spec = model_config.vocab()
    mask = build_syntax_mask(vocab_spec, model_config.n_notes)

    sequences = []
    with open(corpus_path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            loop = loop_from_json(doc.get("loop", doc), vocab_spec)
            if len(loop.notes) > model_config.n_notes:
                continue
            sequences.append(encode_loop(loop, vocab_spec, model_config.n_notes))
    if not sequences:
        raise click.ClickException("corpus contains no usable loops")
    click.echo(f"training on {len(sequences)} loops")

    model = init_model(model_config, seed=train_config.seed)
    stats_fh = open(stats_path, "w") if stats_path else None

    def snapshot(step, snapshot_model):
        save_checkpoint_file(snapshot_model, out_path)

    try:
        for stats in train(model, sequences, train_config, mask, on_checkpoint=snapshot):
            if stats_fh is not None:
                stats_fh.write(json.dumps(stats.to_json()) + "\n")
            if stats.step % 100 == 0 or stats.step == train_config.steps:
                click.echo(f"step {stats.step}  loss {stats.loss:.4f}  lr {stats.lr:.2e}")
    finally:
        if stats_fh is not None:
            stats_fh.close()
    save_checkpoint_file(model, out_path)
    click.echo(f"saved checkpoint -> {out_path}")


@main.command("extract")
@click.option("--in", "in_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="JSONL of extracted loops.")
@click.option("--matches", type=click.Path(exists=True, dir_okay=False), default=None,
              help="TSV of (file_hash, track_id) pairs for split assignment.")
@click.option("--split-out", type=click.Path(dir_okay=False), default=None,
              help="Write a (hash, split) TSV manifest here.")
@click.option("--seed", type=int, default=None)
def extract_cmd(in_dir, out_path, matches, split_out, seed):
    """Mine 4-bar loops from every .mid file under a directory."""
    from .corpus import SplitGraph, detect_loops, parse_midi, split_dataset
    from .corpus.midi import MidiError

    vocab_spec = build_vocab()
    seed = seed if seed is not None else _default_seed()
    files = sorted(Path(in_dir).rglob("*.mid")) + sorted(Path(in_dir).rglob("*.midi"))
    hashes: dict[str, str] = {}
    n_loops = 0
    with open(out_path, "w") as out_fh:
        for path in files:
            data = path.read_bytes()
            file_hash = hashlib.sha256(data).hexdigest()
            hashes[str(path)] = file_hash
            try:
                song = parse_midi(data)
            except MidiError as exc:
                click.echo(f"skipping {path}: {exc}", err=True)
                continue
            for candidate in detect_loops(song, vocab_spec, source_id=file_hash):
                record = {
                    "loop": loop_to_json(candidate.loop),
                    "source": file_hash,
                    "start_bar": candidate.start_bar,
                    "salience": candidate.start_salience,
                }
                out_fh.write(json.dumps(record, sort_keys=True) + "\n")
                n_loops += 1
    click.echo(f"extracted {n_loops} loops from {len(files)} files -> {out_path}")

    if split_out is not None:
        edges = []
        matched = set()
        if matches is not None:
            with open(matches) as fh:
                for line in fh:
                    parts = line.strip().split("\t")
                    if len(parts) == 2:
                        edges.append((parts[0], parts[1]))
                        matched.add(parts[0])
        unmatched = [h for h in sorted(set(hashes.values())) if h not in matched]
        graph = SplitGraph(edges=edges, unmatched_hashes=unmatched)
        assignment = split_dataset(graph, rng=np.random.default_rng(seed))
        with open(split_out, "w") as fh:
            for file_hash in sorted(assignment):
                fh.write(f"{file_hash}\t{assignment[file_hash]}\n")
        click.echo(f"wrote split manifest -> {split_out}")


@main.command("sample")
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="EditSpec JSON (defaults to unconstrained).")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--temperature", type=float, default=1.0)
@click.option("--out-midi", type=click.Path(dir_okay=False), default=None)
@click.option("--out-json", type=click.Path(dir_okay=False), default=None)
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None,
              help="Dump the resolution trace as JSON.")
def sample_cmd(spec_path, checkpoint, seed, temperature, out_midi, out_json, trace_path):
    """Compile an EditSpec, sample one loop, export it."""
    from .corpus.midi import write_loop_midi
    from .representation import decode_tokens
    from .steering import EditSpec

    model = load_checkpoint_file(checkpoint)
    vocab_spec = model.config.vocab()
    mask = build_syntax_mask(vocab_spec, model.config.n_notes)
    edit_spec = EditSpec()
    if spec_path is not None:
        edit_spec = spec_from_json(json.loads(Path(spec_path).read_text()), vocab_spec)
    prior = compile_spec(edit_spec, vocab_spec, model.config.n_notes)
    seed = seed if seed is not None else _default_seed()
    tokens, trace = sample(
        model, prior, mask, SamplerConfig(seed=seed, temperature=temperature)
    )
    loop = decode_tokens(tokens, vocab_spec)
    click.echo(f"sampled {len(loop.notes)} notes in {trace.forward_passes} forward passes")
    if out_midi:
        Path(out_midi).write_bytes(write_loop_midi(loop))
        click.echo(f"wrote {out_midi}")
    if out_json:
        Path(out_json).write_text(json.dumps(loop_to_json(loop), sort_keys=True, indent=2))
        click.echo(f"wrote {out_json}")
    if trace_path:
        Path(trace_path).write_text(json.dumps(trace.to_json(), indent=2))
    if not (out_midi or out_json):
        click.echo(json.dumps(loop_to_json(loop), sort_keys=True, indent=2))


@main.command("serve")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--store", "store_dir", type=click.Path(file_okay=False), default=None,
              help="Persist records under this directory (in-memory otherwise).")
@click.option("--workers", type=int, default=4, help="Concurrent sampling capacity.")
def serve_cmd(checkpoint, port, host, store_dir, workers):
    """Run the /v1 editing service."""
    import uvicorn

    from .service import EngineState, LoopStore, create_app

    model = load_checkpoint_file(checkpoint)
    state = EngineState(
        model=model,
        store=LoopStore(store_dir),
        checkpoint_path=str(checkpoint),
        max_workers=workers,
    )
    app = create_app(state)
    click.echo(f"serving on http://{host}:{port} (n_notes={model.config.n_notes})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
