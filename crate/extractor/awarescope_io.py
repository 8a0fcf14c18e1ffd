# SPDX-License-Identifier: MIT OR Apache-2.0
"""File formats shared with the awarescope crate, for out-of-process extractors.

An extractor that runs a real model reads `prompts.jsonl` and `facts.jsonl`,
then writes a dump directory that `awarescope validate-dump` accepts. This
module is standard library only so it can be vendored next to any model code.
"""

import hashlib
import json
import math
import os
import struct
from array import array

FORMAT_VERSION = 1
DTYPE_TAG = "f32le"
MANIFEST_FILE = "manifest.json"
RANKS_FILE = "ranks.jsonl"


def read_jsonl(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def read_prompts(path):
    return read_jsonl(path)


def read_facts(path):
    """Facts keyed by sample id."""
    return {f["sample_id"]: f for f in read_jsonl(path)}


def layer_file_name(layer):
    return f"acts_layer{layer}.bin"


def sample_order_hash(ids):
    h = hashlib.sha256()
    for i in ids:
        h.update(i.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def _f32le(values):
    a = array("f", values)
    if struct.pack("=I", 1) != struct.pack("<I", 1):
        a.byteswap()
    return a.tobytes()


def _from_f32le(raw):
    a = array("f")
    a.frombytes(raw)
    if struct.pack("=I", 1) != struct.pack("<I", 1):
        a.byteswap()
    return list(a)


def write_dump(out_dir, model_id, records, layers, vocab_size,
               perturbation="none", checkpoint_step=None):
    """Write a dump.

    `records` are dicts with `sample_id`, `category` and 1-based `ranks`.
    `layers` is a list with one entry per layer, each a list of rows of
    length `d_model`, in the same sample order as `records`.
    """
    n = len(records)
    if not layers:
        raise ValueError("a dump needs at least one layer")
    d_model = len(layers[0][0]) if n else 0
    for l, rows in enumerate(layers):
        if len(rows) != n:
            raise ValueError(f"layer {l} has {len(rows)} rows, expected {n}")
        for row in rows:
            if len(row) != d_model or not all(math.isfinite(v) for v in row):
                raise ValueError(f"layer {l} has a ragged or non-finite row")
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, RANKS_FILE), "w", encoding="utf-8") as f:
        for r in records:
            ranks = [int(x) for x in r["ranks"]]
            if not ranks or any(x < 1 or x > vocab_size for x in ranks):
                raise ValueError(f"{r['sample_id']}: ranks outside 1..={vocab_size}")
            f.write(json.dumps({
                "sample_id": r["sample_id"],
                "category": r["category"],
                "gold_token_count": len(ranks),
                "ranks": ranks,
                "vocab_size": vocab_size,
            }, separators=(",", ":")) + "\n")
    for l, rows in enumerate(layers):
        with open(os.path.join(out_dir, layer_file_name(l)), "wb") as f:
            for row in rows:
                f.write(_f32le(row))
    header = {
        "model_id": model_id,
        "checkpoint_step": checkpoint_step,
        "n_layers": len(layers),
        "d_model": d_model,
        "vocab_size": vocab_size,
        "n_samples": n,
        "dtype": DTYPE_TAG,
        "perturbation": perturbation,
        "format_version": FORMAT_VERSION,
        "sample_order_hash": sample_order_hash(r["sample_id"] for r in records),
    }
    # Manifest last, so a crash never leaves a dump that looks complete.
    with open(os.path.join(out_dir, MANIFEST_FILE), "w", encoding="utf-8") as f:
        json.dump(header, f, indent=2)
    return header


def read_dump(dump_dir):
    """Returns (header, records, layers) with layers as lists of rows."""
    with open(os.path.join(dump_dir, MANIFEST_FILE), encoding="utf-8") as f:
        header = json.load(f)
    if header.get("dtype") != DTYPE_TAG:
        raise ValueError(f"unsupported dtype {header.get('dtype')!r}")
    records = read_jsonl(os.path.join(dump_dir, RANKS_FILE))
    n, d = header["n_samples"], header["d_model"]
    if len(records) != n:
        raise ValueError(f"{len(records)} rank records, manifest says {n}")
    want = header.get("sample_order_hash")
    if want and sample_order_hash(r["sample_id"] for r in records) != want:
        raise ValueError("sample order does not match the manifest")
    layers = []
    for l in range(header["n_layers"]):
        with open(os.path.join(dump_dir, layer_file_name(l)), "rb") as f:
            raw = f.read()
        if len(raw) != n * d * 4:
            raise ValueError(f"layer {l}: {len(raw)} bytes, expected {n * d * 4}")
        flat = _from_f32le(raw)
        layers.append([flat[i * d:(i + 1) * d] for i in range(n)])
    return header, records, layers


def decode_tensors(data):
    """Named-tensor container (`toy_weights.bin`, SAE files).

    Returns (extra, tensors) where tensors maps name -> (shape, flat values)
    in file order.
    """
    (header_len,) = struct.unpack_from("<Q", data, 0)
    header = json.loads(data[8:8 + header_len].decode("utf-8"))
    body = data[8 + header_len:]
    tensors = {}
    for entry in header.pop("tensors"):
        size = 4 * math.prod(entry["shape"])
        if entry["length"] != size:
            raise ValueError(f"tensor {entry['name']}: bad length")
        raw = body[entry["offset"]:entry["offset"] + size]
        if len(raw) != size:
            raise ValueError(f"tensor {entry['name']} is truncated")
        tensors[entry["name"]] = (list(entry["shape"]), _from_f32le(raw))
    return header, tensors


def encode_tensors(extra, tensors):
    index, chunks, offset = [], [], 0
    for name, (shape, values) in tensors.items():
        if math.prod(shape) != len(values):
            raise ValueError(f"tensor {name}: shape does not match data")
        raw = _f32le(values)
        index.append({"name": name, "shape": list(shape), "offset": offset, "length": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps(dict(extra, tensors=index), separators=(",", ":")).encode("utf-8")
    return struct.pack("<Q", len(header)) + header + b"".join(chunks)


def read_tensors(path):
    with open(path, "rb") as f:
        return decode_tensors(f.read())


def write_tensors(path, extra, tensors):
    with open(path, "wb") as f:
        f.write(encode_tensors(extra, tensors))
