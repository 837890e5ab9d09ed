"""Model container: magic + version + JSON metadata header + pickled model.

The payload holds the immutable numpy-backed model, so a load/save round
trip reproduces predictions bit for bit.
"""

import dataclasses
import json
import pickle
import struct

from .errors import ParseError
from .pipeline import ExtremeQuantileModel

MAGIC = b"TBQM"
FORMAT_VERSION = 1
_HEAD = struct.Struct("<4sIQ")


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, (tuple, list)):
        return [_jsonable(v) for v in obj]
    return obj


def model_metadata(model: ExtremeQuantileModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "tau0": model.tau0,
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "boost": _jsonable(model.boosted.config),
        "forest": _jsonable(model.forest.config),
        "theta0": {"sigma": model.boosted.theta0.sigma, "gamma": model.boosted.theta0.gamma},
    }


def save_model(model: ExtremeQuantileModel, path, extra: dict | None = None) -> None:
    meta = model_metadata(model)
    if extra:
        meta.update(extra)
    header = json.dumps(meta, sort_keys=True).encode("utf-8")
    payload = pickle.dumps(model, protocol=pickle.HIGHEST_PROTOCOL)
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, FORMAT_VERSION, len(header)))
        fh.write(header)
        fh.write(payload)


def load_model(path) -> tuple[ExtremeQuantileModel, dict]:
    with open(path, "rb") as fh:
        head = fh.read(_HEAD.size)
        if len(head) != _HEAD.size:
            raise ParseError(f"{path}: truncated model file")
        magic, version, header_len = _HEAD.unpack(head)
        if magic != MAGIC:
            raise ParseError(f"{path}: not a model file (bad magic)")
        if version != FORMAT_VERSION:
            raise ParseError(f"{path}: unsupported model format version {version}")
        try:
            meta = json.loads(fh.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"{path}: corrupt metadata header: {exc}") from None
        model = pickle.load(fh)
    if not isinstance(model, ExtremeQuantileModel):
        raise ParseError(f"{path}: payload is not a model")
    return model, meta
