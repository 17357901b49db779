"""Binary weight container.

Layout (little-endian throughout):

    magic   6 bytes   b"WFNET\\0"
    version u16       currently 1
    mlen    u32       manifest byte length
    manifest          UTF-8 JSON: input shape, seed, layer specs, parameter table
    payload           raw 32-bit reals per parameter, in manifest order

The manifest's parameter table lists (layer index, name, shape) so the payload
is self-describing; batchnorm running statistics are saved alongside weights.
Save/load round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from wastefinder.nn.network import Network, build_network, spec_from_dict, spec_to_dict

MAGIC = b"WFNET\x00"
VERSION = 1


class WeightFormatError(ValueError):
    pass


def save_network(net: Network, path) -> None:
    if net.dtype != np.float32:
        raise WeightFormatError("weight files store 32-bit reals; cast the network first")
    entries = []
    blobs = []
    for i, st in enumerate(net.states):
        for name in sorted(st.params):
            arr = st.params[name]
            entries.append({"layer": i, "name": name, "shape": list(arr.shape)})
            blobs.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    manifest = {
        "input_shape": list(net.input_shape),
        "seed": net.seed,
        "mode": net.mode,
        "specs": [spec_to_dict(s) for s in net.specs],
        "params": entries,
    }
    mbytes = json.dumps(manifest).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HI", VERSION, len(mbytes)))
        f.write(mbytes)
        for b in blobs:
            f.write(b)


def load_network(path) -> Network:
    data = Path(path).read_bytes()
    if data[:6] != MAGIC:
        raise WeightFormatError(f"{path}: bad magic bytes")
    version, mlen = struct.unpack_from("<HI", data, 6)
    if version != VERSION:
        raise WeightFormatError(f"{path}: unsupported version {version}")
    off = 6 + struct.calcsize("<HI")
    manifest = json.loads(data[off : off + mlen].decode("utf-8"))
    off += mlen
    specs = [spec_from_dict(d) for d in manifest["specs"]]
    net = build_network(manifest["input_shape"], specs, seed=manifest["seed"])
    net.mode = manifest["mode"]
    for e in manifest["params"]:
        shape = tuple(e["shape"])
        size = int(np.prod(shape)) * 4
        arr = np.frombuffer(data[off : off + size], dtype="<f4").reshape(shape).copy()
        net.states[e["layer"]].params[e["name"]] = arr
        off += size
    if off != len(data):
        raise WeightFormatError(f"{path}: trailing bytes after payload")
    return net
