"""Bidirectional transformer over superposed note-event priors.

The network embeds a prior matrix with a bias-free linear map (a
probability-weighted sum of token embeddings), sums the nine attribute
embeddings of each note into note embeddings, runs a pre-norm
bidirectional transformer over the notes **without positional
encoding** (note order carries no meaning), projects back to note
logits, repeat-interleaves them to one row per attribute position and
forces syntactically invalid entries to -inf before the softmax.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np
import torch
from torch import nn

from .representation import (
    NUM_ATTRIBUTES,
    RepresentationConfig,
    VocabSpec,
    build_vocab,
)
from .superposition import PriorMatrix

NEG_INF = -1.0e9  # realisation of -inf; underflows to exact 0 after softmax

CHECKPOINT_MAGIC = b"SLOOPCK1"


class ShapeMismatch(ValueError):
    pass


class NonFiniteActivation(RuntimeError):
    def __init__(self, layer: str):
        self.layer = layer
        super().__init__(f"non-finite activation in {layer}")


class ChecksumMismatch(ValueError):
    pass


class ManifestMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Shape hyperparameters.  Defaults are the desk-scale configuration."""

    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    ff_multiplier: int = 4
    n_notes: int = 16
    representation: RepresentationConfig = RepresentationConfig()

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")

    @property
    def n_positions(self) -> int:
        return self.n_notes * NUM_ATTRIBUTES

    def vocab(self) -> VocabSpec:
        return build_vocab(self.representation)

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(doc: dict) -> "ModelConfig":
        doc = dict(doc)
        rep = doc.pop("representation", None)
        config = RepresentationConfig(**rep) if rep else RepresentationConfig()
        return ModelConfig(representation=config, **doc)


@dataclass(frozen=True)
class ForwardOutput:
    """Masked logits, posterior, and the per-note logits they interleave."""

    logits: torch.Tensor       # (B, T, |V|), -1e9 where syntactically invalid
    posterior: torch.Tensor    # (B, T, |V|), rows sum to 1, zero off-mask
    note_logits: torch.Tensor  # (B, N, |V|), pre-mask


class SuperposedLM(nn.Module):
    """The prior-in / posterior-out network."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        vocab = config.vocab()
        self.vocab_size = vocab.total
        d = config.d_model
        self.w_emb = nn.Parameter(torch.empty(self.vocab_size, d))
        self.layers = nn.ModuleList([
            nn.TransformerEncoderLayer(
                d_model=d,
                nhead=config.n_heads,
                dim_feedforward=config.ff_multiplier * d,
                dropout=0.0,
                activation="gelu",
                batch_first=True,
                norm_first=True,
            )
            for _ in range(config.n_layers)
        ])
        self.final_norm = nn.LayerNorm(d)
        self.w_out = nn.Parameter(torch.empty(d, self.vocab_size))

    def forward(
        self,
        prior: torch.Tensor,
        syntax_mask: torch.Tensor,
        check_finite: bool = False,
    ) -> ForwardOutput:
        """Run the network on a batch of priors.

        Args:
            prior: (B, T, |V|) or (T, |V|) row-stochastic prior.
            syntax_mask: (T, |V|) boolean syntax mask.
            check_finite: validate activations layer by layer (slower).

        Returns:
            ForwardOutput with masked logits and posterior.
        """
        squeeze = prior.dim() == 2
        if squeeze:
            prior = prior.unsqueeze(0)
        batch, n_positions, vocab_size = prior.shape
        if vocab_size != self.vocab_size or n_positions != self.config.n_positions:
            raise ShapeMismatch(
                f"prior {tuple(prior.shape[1:])} vs model "
                f"({self.config.n_positions}, {self.vocab_size})"
            )
        if syntax_mask.shape != (n_positions, self.vocab_size):
            raise ShapeMismatch(f"syntax mask {tuple(syntax_mask.shape)}")

        z = prior @ self.w_emb                                    # (B, T, d)
        z_note = z.view(batch, self.config.n_notes, NUM_ATTRIBUTES, -1).sum(dim=2)
        h = z_note
        for index, layer in enumerate(self.layers):
            h = layer(h)
            if check_finite and not torch.isfinite(h).all():
                raise NonFiniteActivation(f"transformer layer {index}")
        h = self.final_norm(h)
        note_logits = h @ self.w_out                              # (B, N, |V|)
        if check_finite and not torch.isfinite(note_logits).all():
            raise NonFiniteActivation("output projection")
        logits = note_logits.repeat_interleave(NUM_ATTRIBUTES, dim=1)
        logits = logits.masked_fill(~syntax_mask.unsqueeze(0), NEG_INF)
        posterior = torch.softmax(logits, dim=-1)
        if squeeze:
            return ForwardOutput(logits[0], posterior[0], note_logits[0])
        return ForwardOutput(logits, posterior, note_logits)

    def posterior_numpy(self, prior: PriorMatrix, syntax_mask: np.ndarray) -> np.ndarray:
        """Single-sequence convenience wrapper for numpy callers."""
        dtype = self.w_emb.dtype
        with torch.no_grad():
            out = self.forward(
                torch.as_tensor(prior.probs.copy(), dtype=dtype),
                torch.as_tensor(syntax_mask.copy()),
            )
        return out.posterior.cpu().numpy()


def init_model(config: ModelConfig, seed: int = 0) -> SuperposedLM:
    """Deterministically initialise a model.

    Projection weights are N(0, 0.02); biases zero; layer-norm gains one.
    """
    model = SuperposedLM(config)
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, param in model.named_parameters():
            if _is_projection_weight(name):
                param.normal_(0.0, 0.02, generator=generator)
            elif "norm" in name and name.endswith("weight"):
                param.fill_(1.0)
            else:
                param.zero_()
    return model


def _is_projection_weight(name: str) -> bool:
    if name in ("w_emb", "w_out"):
        return True
    return name.endswith("weight") and "norm" not in name


def parameter_manifest(model: SuperposedLM) -> list[tuple[str, tuple[int, ...]]]:
    return [(name, tuple(param.shape)) for name, param in model.state_dict().items()]


def save_checkpoint(model: SuperposedLM) -> bytes:
    """Serialise to the stable binary format.

    Layout: magic, little-endian uint32 header length, JSON header
    (config + parameter manifest), float32 little-endian payload in
    manifest order, then the first 8 bytes of the SHA-256 of everything
    before the checksum.
    """
    header = {
        "format_version": 1,
        "config": model.config.to_json(),
        "manifest": [
            {"name": name, "shape": list(shape)}
            for name, shape in parameter_manifest(model)
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = bytearray()
    state = model.state_dict()
    for name, _ in parameter_manifest(model):
        array = state[name].detach().cpu().to(torch.float32).numpy()
        payload.extend(array.astype("<f4").tobytes())
    blob = CHECKPOINT_MAGIC + struct.pack("<I", len(header_bytes)) + header_bytes + bytes(payload)
    checksum = hashlib.sha256(blob).digest()[:8]
    return blob + checksum


def load_checkpoint(
    data: bytes,
    expected_vocab: Optional[VocabSpec] = None,
) -> SuperposedLM:
    """Load a checkpoint, verifying checksum and manifest."""
    if len(data) < len(CHECKPOINT_MAGIC) + 12 or not data.startswith(CHECKPOINT_MAGIC):
        raise ManifestMismatch("not a checkpoint file")
    body, checksum = data[:-8], data[-8:]
    if hashlib.sha256(body).digest()[:8] != checksum:
        raise ChecksumMismatch("checkpoint payload corrupted")
    offset = len(CHECKPOINT_MAGIC)
    (header_len,) = struct.unpack_from("<I", data, offset)
    offset += 4
    header = json.loads(data[offset:offset + header_len].decode("utf-8"))
    offset += header_len
    config = ModelConfig.from_json(header["config"])
    if expected_vocab is not None and config.vocab() != expected_vocab:
        raise ManifestMismatch(
            f"checkpoint vocabulary ({config.vocab().total} tokens) does not "
            f"match runtime vocabulary ({expected_vocab.total} tokens)"
        )
    model = SuperposedLM(config)
    expected = [(entry["name"], tuple(entry["shape"])) for entry in header["manifest"]]
    if expected != parameter_manifest(model):
        raise ManifestMismatch("parameter manifest does not match model config")
    state = {}
    payload = body[offset:]
    cursor = 0
    for name, shape in expected:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        if cursor + nbytes > len(payload):
            raise ManifestMismatch("payload shorter than manifest")
        array = np.frombuffer(payload, dtype="<f4", count=count, offset=cursor)
        state[name] = torch.from_numpy(array.copy()).view(shape)
        cursor += nbytes
    if cursor != len(payload):
        raise ManifestMismatch("payload longer than manifest")
    model.load_state_dict(state)
    return model


def save_checkpoint_file(model: SuperposedLM, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_checkpoint(model))


def load_checkpoint_file(path, expected_vocab: Optional[VocabSpec] = None) -> SuperposedLM:
    with open(path, "rb") as fh:
        return load_checkpoint(fh.read(), expected_vocab=expected_vocab)
