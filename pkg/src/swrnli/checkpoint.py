"""Versioned binary checkpoints for parsers and NLI classifiers.

Layout::

    b"SWRNLI\\x00\\x01"  magic
    uint32            format version
    uint64            header length, then a UTF-8 JSON header (sorted keys)
    per tensor:       uint32 name length, name, uint32 ndim, uint64 dims..., float64 values

All integers and values are little-endian.  Serialisation is canonical, so a
file that is loaded and saved again comes out byte-identical.
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Vocabulary
from .exceptions import (CheckpointError, CheckpointShapeError, CheckpointVersionError,
                         ModelKindError, TruncatedCheckpointError)

MAGIC = b"SWRNLI\x00\x01"
FORMAT_VERSION = 1
PARSER_KIND = "parser"
NLI_KINDS = ("nli/da", "nli/esim")
PARSER_PREFIX = "parser/"


@dataclass
class Checkpoint:
    kind: str
    config: dict
    tensors: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION


def _header_bytes(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


def dumps(ckpt: Checkpoint) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", ckpt.version))
    header = {"kind": ckpt.kind, "config": ckpt.config, "metadata": ckpt.metadata,
              "n_tensors": len(ckpt.tensors)}
    raw = _header_bytes(header)
    buf.write(struct.pack("<Q", len(raw)))
    buf.write(raw)
    for name in ckpt.tensors:
        arr = np.ascontiguousarray(ckpt.tensors[name], dtype="<f8")
        encoded = name.encode()
        buf.write(struct.pack("<I", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(arr.tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedCheckpointError(
                f"checkpoint ends after {len(self.data)} bytes while reading {what}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def loads(data: bytes) -> Checkpoint:
    r = _Reader(data)
    if r.take(len(MAGIC), "magic") != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic bytes)")
    (version,) = r.unpack("<I", "version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"checkpoint format version {version}, "
                                     f"this build reads version {FORMAT_VERSION}")
    (n,) = r.unpack("<Q", "header length")
    try:
        header = json.loads(r.take(n, "header").decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    tensors = {}
    for i in range(header["n_tensors"]):
        (name_len,) = r.unpack("<I", f"tensor {i} name")
        name = r.take(name_len, f"tensor {i} name").decode()
        (ndim,) = r.unpack("<I", f"{name} rank")
        shape = r.unpack(f"<{ndim}Q", f"{name} shape")
        count = int(np.prod(shape, dtype=np.int64))
        values = r.take(8 * count, f"{name} values")
        tensors[name] = np.frombuffer(values, dtype="<f8").astype(np.float64).reshape(shape)
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} unexpected trailing bytes")
    return Checkpoint(header["kind"], header["config"], tensors, header["metadata"], version)


def write_checkpoint(ckpt: Checkpoint, path) -> None:
    Path(path).write_bytes(dumps(ckpt))


def read_checkpoint(path) -> Checkpoint:
    return loads(Path(path).read_bytes())


# -- model <-> checkpoint ---------------------------------------------------------------

def _fill(module, tensors: dict, prefix: str = "") -> None:
    own = dict(module.named_parameters())
    stored = {k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)}
    if prefix == "":
        stored = {k: v for k, v in stored.items() if not k.startswith(PARSER_PREFIX)}
    missing = sorted(set(own) - set(stored))
    extra = sorted(set(stored) - set(own))
    if missing or extra:
        raise CheckpointShapeError(f"tensor names differ (missing {missing}, unexpected {extra})")
    for name, p in own.items():
        if p.shape != stored[name].shape:
            raise CheckpointShapeError(f"{prefix}{name}: checkpoint has shape {stored[name].shape}, "
                                       f"model expects {p.shape}")
        p.data = stored[name].copy()


def _clean_history(history):
    # wall-clock fields would break byte-reproducibility of identical runs
    return [{k: v for k, v in rec.items() if k != "seconds"} for rec in history]


def parser_checkpoint(parser, prefix: str = "") -> tuple[dict, dict[str, np.ndarray]]:
    model = parser.model_
    config = {"params": {k: v for k, v in parser.get_params(deep=False).items()
                         if k != "embeddings"},
              "vocab": model.vocab.to_list(), "labels": list(model.labels),
              "frozen": bool(model.frozen)}
    tensors = {prefix + k: v for k, v in model.state_dict().items()}
    return config, tensors


def save_parser(parser, path, metadata: dict | None = None) -> None:
    config, tensors = parser_checkpoint(parser)
    meta = {"history": _clean_history(getattr(parser, "history_", []))}
    meta.update(metadata or {})
    write_checkpoint(Checkpoint(PARSER_KIND, config, tensors, meta), path)


def _restore_parser(config: dict, tensors: dict, prefix: str = ""):
    from .parser import BiaffineParser

    parser = BiaffineParser(**config["params"])
    parser.model_ = parser._build(Vocabulary.from_list(config["vocab"]), config["labels"])
    _fill(parser.model_, tensors, prefix)
    if config["frozen"]:
        parser.model_.freeze()
    return parser


def load_parser(path_or_ckpt):
    ckpt = path_or_ckpt if isinstance(path_or_ckpt, Checkpoint) else read_checkpoint(path_or_ckpt)
    if ckpt.kind != PARSER_KIND:
        raise ModelKindError(f"expected a parser checkpoint, found {ckpt.kind!r}")
    parser = _restore_parser(ckpt.config, ckpt.tensors)
    parser.history_ = ckpt.metadata.get("history", [])
    return parser


def save_nli(model, path, metadata: dict | None = None) -> None:
    params = {k: v for k, v in model.get_params(deep=False).items()
              if k not in ("parser", "embeddings")}
    config = {"params": params, "classes": [str(c) for c in model.classes_],
              "vocab": model.vocab_.to_list(), "swr_dim": int(model.swr_dim_), "parser": None}
    tensors = dict(model.network_.state_dict())
    if model.parser is not None:
        config["parser"], parser_tensors = parser_checkpoint(model.parser, PARSER_PREFIX)
        tensors.update(parser_tensors)
    meta = {"history": _clean_history(model.history_), "steps": int(getattr(model, "n_steps_", 0))}
    meta.update(metadata or {})
    write_checkpoint(Checkpoint("nli/" + model.architecture, config, tensors, meta), path)


def load_nli(path_or_ckpt):
    from .nli.estimator import ESTIMATORS
    from .nli.fusion import FusionMode
    from .nli.models import build_model

    ckpt = path_or_ckpt if isinstance(path_or_ckpt, Checkpoint) else read_checkpoint(path_or_ckpt)
    if ckpt.kind not in NLI_KINDS:
        raise ModelKindError(f"expected an NLI checkpoint, found {ckpt.kind!r}")
    cfg = ckpt.config
    parser = (_restore_parser(cfg["parser"], ckpt.tensors, PARSER_PREFIX)
              if cfg["parser"] is not None else None)
    est = ESTIMATORS[ckpt.kind.split("/")[1]](parser=parser, **cfg["params"])
    est.classes_ = np.array(cfg["classes"])
    est.fusion_ = FusionMode(est.fusion)
    est.swr_dim_ = cfg["swr_dim"]
    est.vocab_ = Vocabulary.from_list(cfg["vocab"])
    est._rngs = est._seeds()
    est.network_ = build_model(est.architecture, est._network_config(), len(est.vocab_),
                               est.embed_dim, len(est.classes_), est._rngs[0], est.fusion_,
                               est.swr_dim_, None, not est.freeze_embeddings)
    _fill(est.network_, ckpt.tensors)
    est._swr_cache = {}
    est.history_ = ckpt.metadata.get("history", [])
    est.n_steps_ = ckpt.metadata.get("steps", 0)
    return est


def save_model(model, path, metadata: dict | None = None) -> None:
    """Dispatch on estimator type."""
    if hasattr(model, "network_"):
        save_nli(model, path, metadata)
    elif hasattr(model, "model_"):
        save_parser(model, path, metadata)
    else:
        raise CheckpointError("only fitted parsers and NLI classifiers can be saved")


def load_model(path):
    ckpt = read_checkpoint(path)
    return load_parser(ckpt) if ckpt.kind == PARSER_KIND else load_nli(ckpt)
