"""Binary model files: magic, format version, payload length, checksum, payload.

The payload is a pickle of the fitted object. Only load files you trust;
unpickling can execute code.
"""

from __future__ import annotations

import hashlib
import pickle
import struct

from .errors import ModelFormatError

MAGIC = b"EPMMODEL"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHQ32s")


def serialize_model(model) -> bytes:
    payload = pickle.dumps(model, protocol=4)
    digest = hashlib.sha256(payload).digest()
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(payload), digest) + payload


def deserialize_model(blob: bytes):
    if len(blob) < _HEADER.size:
        raise ModelFormatError("model stream is truncated (incomplete header)")
    magic, version, length, digest = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ModelFormatError("not a model file (bad magic bytes)")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    payload = blob[_HEADER.size:]
    if len(payload) != length:
        raise ModelFormatError(f"model stream is truncated ({len(payload)} of {length} bytes)")
    if hashlib.sha256(payload).digest() != digest:
        raise ModelFormatError("model payload checksum mismatch")
    try:
        return pickle.loads(payload)
    except Exception as exc:  # a corrupt pickle can raise almost anything
        raise ModelFormatError(f"cannot decode model payload: {exc}") from None


def save_model(model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_model(model))


def load_model(path):
    with open(path, "rb") as fh:
        return deserialize_model(fh.read())
