"""Single-file model format.

Layout::

    b"ABACPIPM"  | u32 version | u64 header length | JSON header | padding | array data

The JSON header (sorted keys, no whitespace) describes the learner spec,
class names, an optional encoder and catalog fingerprint, and a table of
arrays with dtype, shape and byte offset into the data block.  Arrays are
stored raw and little-endian, so loading reproduces every float bit.
"""

from __future__ import annotations

import json
import struct
from typing import Optional

import numpy as np

from ..core import AttributeCatalog, AttributeDef, Category
from ..encoding import Encoder, EncoderConfig
from ..errors import ModelFormatError
from .models import LearnerSpec, TrainedModel
from .tree import Tree

MAGIC = b"ABACPIPM"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")
_TREE_FIELDS = ("feature", "threshold", "left", "right", "value")


def encoder_to_doc(encoder: Encoder) -> dict:
    cat = encoder.catalog
    cfg = encoder.config
    return {
        "catalog": [[a.category.value, a.name, list(a.values)] for a in cat.attributes],
        "arfe": cfg.arfe_enabled,
        "avc": cfg.avc_enabled,
        "clusters": [[col, v, name] for (col, v), name in cfg.clusters.items()],
        "value_codes": [list(t) for t in encoder.value_codes],
        "cluster_columns": [[i, list(names), list(t)] for i, names, t in encoder.cluster_columns],
        "arfe_pairs": [[n, si, oi, list(s), list(o)] for n, si, oi, s, o in encoder.arfe_pairs],
    }


def encoder_from_doc(doc: dict) -> Encoder:
    cat = AttributeCatalog(tuple(AttributeDef(n, Category(c), tuple(v))
                                 for c, n, v in doc["catalog"]))
    cfg = EncoderConfig(doc["arfe"], doc["avc"], {(c, v): n for c, v, n in doc["clusters"]})
    return Encoder(cat, cfg,
                   tuple(tuple(t) for t in doc["value_codes"]),
                   tuple((i, tuple(names), tuple(t)) for i, names, t in doc["cluster_columns"]),
                   tuple((n, si, oi, tuple(s), tuple(o)) for n, si, oi, s, o in doc["arfe_pairs"]))


def _le(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<"))


def dump_model(model: TrainedModel, encoder: Optional[Encoder] = None) -> bytes:
    arrays = [("classes", model.classes), ("init_scores", model.init_scores)]
    for t, tree in enumerate(model.trees):
        arrays += [(f"tree{t}.{name}", arr) for name, arr in zip(_TREE_FIELDS, tree.arrays())]
    table, blobs, offset = [], [], 0
    for name, arr in arrays:
        raw = _le(np.asarray(arr)).tobytes()
        table.append({"name": name, "dtype": np.asarray(arr).dtype.str.replace(">", "<"),
                      "shape": list(np.shape(arr)), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = {
        "spec": model.spec.to_mapping(),
        "class_names": list(model.class_names),
        "n_features": model.n_features,
        "n_trees": len(model.trees),
        "degenerate": model.degenerate,
        "encoder": encoder_to_doc(encoder) if encoder is not None else None,
        "catalog_fingerprint": encoder.catalog.fingerprint() if encoder is not None else None,
        "arrays": table,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    pad = (-(_PREFIX.size + len(head))) % 8
    return _PREFIX.pack(MAGIC, VERSION, len(head)) + head + b"\0" * pad + b"".join(blobs)


def load_bytes(data: bytes) -> tuple:
    """(model, encoder or None) from ``dump_model`` output."""
    if len(data) < _PREFIX.size:
        raise ModelFormatError("file too short for a model header")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    if version != VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    try:
        header = json.loads(data[_PREFIX.size:_PREFIX.size + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt model header: {exc}") from None
    base = _PREFIX.size + hlen
    base += (-base) % 8
    arrays = {}
    for entry in header["arrays"]:
        start = base + entry["offset"]
        raw = data[start:start + entry["nbytes"]]
        if len(raw) != entry["nbytes"]:
            raise ModelFormatError(f"truncated array {entry['name']}")
        dt = np.dtype(entry["dtype"])
        arr = np.frombuffer(raw, dtype=dt).reshape(entry["shape"])
        arrays[entry["name"]] = arr.astype(dt.newbyteorder("="), copy=True)
    trees = tuple(Tree(*(arrays[f"tree{t}.{name}"] for name in _TREE_FIELDS))
                  for t in range(header["n_trees"]))
    model = TrainedModel(spec=LearnerSpec.from_mapping(header["spec"]),
                         class_names=tuple(header["class_names"]),
                         n_features=header["n_features"], classes=arrays["classes"],
                         trees=trees, init_scores=arrays["init_scores"],
                         degenerate=header["degenerate"])
    encoder = encoder_from_doc(header["encoder"]) if header["encoder"] else None
    if encoder is not None and encoder.catalog.fingerprint() != header["catalog_fingerprint"]:
        raise ModelFormatError("catalog fingerprint mismatch")
    return model, encoder


def save_model(model: TrainedModel, path, encoder: Optional[Encoder] = None) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_model(model, encoder))


def load_model(path) -> tuple:
    with open(path, "rb") as fh:
        return load_bytes(fh.read())
