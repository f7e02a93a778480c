"""Binary parameter checkpoints (``DGPT``).

Layout, all little-endian::

    magic "DGPT" | version u32 | layer count u32
    per layer: kind u8 | n_ints u8 | i32 * n_ints | n_floats u8 | f64 * n_floats
               | n_arrays u8 | per array: ndim u8 | u32 * ndim | f32 payload | crc32 u32
    trailer:   meta length u32 | UTF-8 JSON | crc32 u32

The JSON trailer names the layer groups (e.g. generator, discriminator) and
carries model metadata such as the speaker vocabulary.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

from ..errors import CorruptArchive
from .layers import LayerSpec, Sequential, build_layer

MAGIC = b"DGPT"
VERSION = 1
KIND_TAGS = {"conv2d": 1, "fc": 2, "relu": 3, "leaky_relu": 4, "tanh": 5, "sigmoid": 6,
             "flatten": 7, "replicate_pad": 8}
_TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}


def _spec_numbers(spec: LayerSpec):
    s = spec.sizes
    if spec.kind == "conv2d":
        return [s["in_ch"], s["out_ch"], *s["kernel"], *s["stride"]], []
    if spec.kind == "fc":
        return [s["in_features"], s["out_features"]], []
    if spec.kind == "replicate_pad":
        return list(s["margins"]), []
    if spec.kind == "leaky_relu":
        return [], [s["slope"]]
    return [], []


def _spec_from_numbers(kind, ints, floats) -> LayerSpec:
    if kind == "conv2d":
        return LayerSpec(kind, {"in_ch": ints[0], "out_ch": ints[1], "kernel": tuple(ints[2:4]),
                                "stride": tuple(ints[4:6])})
    if kind == "fc":
        return LayerSpec(kind, {"in_features": ints[0], "out_features": ints[1]})
    if kind == "replicate_pad":
        return LayerSpec(kind, {"margins": tuple(ints)})
    if kind == "leaky_relu":
        return LayerSpec(kind, {"slope": floats[0]})
    return LayerSpec(kind, {})


def checkpoint_bytes(groups: dict, meta: dict | None = None) -> bytes:
    layers = [layer for net in groups.values() for layer in net.layers]
    meta = dict(meta or {})
    meta["groups"] = [[name, len(net.layers)] for name, net in groups.items()]
    out = [MAGIC, struct.pack("<II", VERSION, len(layers))]
    for layer in layers:
        ints, floats = _spec_numbers(layer.spec)
        out.append(struct.pack("<BB", KIND_TAGS[layer.spec.kind], len(ints)))
        out.append(struct.pack(f"<{len(ints)}i", *ints))
        out.append(struct.pack("<B", len(floats)))
        out.append(struct.pack(f"<{len(floats)}d", *floats))
        out.append(struct.pack("<B", len(layer.params)))
        for p in layer.params:
            payload = np.ascontiguousarray(p.data, dtype="<f4").tobytes()
            out.append(struct.pack(f"<B{p.data.ndim}I", p.data.ndim, *p.data.shape))
            out.append(payload)
            out.append(struct.pack("<I", zlib.crc32(payload)))
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    out += [struct.pack("<I", len(blob)), blob, struct.pack("<I", zlib.crc32(blob))]
    return b"".join(out)


def save_checkpoint(path, groups: dict, meta: dict | None = None):
    data = checkpoint_bytes(groups, meta)
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent or ".")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


class _Reader:
    def __init__(self, data):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CorruptArchive(f"checkpoint truncated at byte {len(self.data)}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        st = struct.Struct(fmt)
        return st.unpack(self.take(st.size))


def parse_checkpoint(data: bytes, dtype=np.float32):
    """Return ``(groups, meta)`` where groups maps name -> :class:`Sequential`."""
    r = _Reader(data)
    if bytes(r.take(4)) != MAGIC:
        raise CorruptArchive("bad checkpoint magic")
    version, n_layers = r.unpack("<II")
    if version != VERSION:
        raise CorruptArchive(f"unsupported checkpoint version {version}")
    layers = []
    for _ in range(n_layers):
        tag, n_ints = r.unpack("<BB")
        if tag not in _TAG_KINDS:
            raise CorruptArchive(f"unknown layer tag {tag}")
        ints = r.unpack(f"<{n_ints}i")
        (n_floats,) = r.unpack("<B")
        floats = r.unpack(f"<{n_floats}d")
        (n_arrays,) = r.unpack("<B")
        arrays = []
        for _ in range(n_arrays):
            (ndim,) = r.unpack("<B")
            shape = r.unpack(f"<{ndim}I")
            payload = r.take(4 * int(np.prod(shape, dtype=np.int64)))
            (crc,) = r.unpack("<I")
            if zlib.crc32(payload) != crc:
                raise CorruptArchive("parameter checksum mismatch")
            arrays.append(np.frombuffer(payload, dtype="<f4").reshape(shape))
        spec = _spec_from_numbers(_TAG_KINDS[tag], ints, floats)
        layers.append(build_layer(spec, dtype=dtype, arrays=arrays))
    (meta_len,) = r.unpack("<I")
    blob = r.take(meta_len)
    (crc,) = r.unpack("<I")
    if zlib.crc32(blob) != crc:
        raise CorruptArchive("metadata checksum mismatch")
    if r.pos != len(r.data):
        raise CorruptArchive("trailing bytes after checkpoint")
    meta = json.loads(bytes(blob).decode("utf-8"))
    groups, i = {}, 0
    for name, count in meta["groups"]:
        groups[name] = Sequential(layers[i:i + count])
        i += count
    if i != len(layers):
        raise CorruptArchive("layer groups do not cover every layer")
    return groups, meta


def load_checkpoint(path, dtype=np.float32):
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read(), dtype)
