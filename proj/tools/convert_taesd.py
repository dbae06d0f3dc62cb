#!/usr/bin/env python3
"""Convert public tiny-autoencoder weights into the project's archive format.

Accepts either the original two-file release (encoder and decoder state
dicts with bare sequential keys) or a single combined checkpoint whose keys
carry "encoder."/"decoder." prefixes, including the "*.layers.N" variant.
Inputs may be .pth/.pt (needs torch) or .safetensors (parsed directly).

Usage:
    python tools/convert_taesd.py taesd_encoder.pth taesd_decoder.pth
    python tools/convert_taesd.py diffusion_pytorch_model.safetensors -o weights/taesd.wt

The output archive loads with the runtime's VAE weight loader; point
--vae-weights or WAVEGMS_VAE_WEIGHTS at it, or keep the default location
weights/taesd.wt which is picked up automatically.
"""

import argparse
import json
import struct
import sys
from collections import OrderedDict
from pathlib import Path

import numpy as np

ARCHIVE_MAGIC = b"WGMSTEN1"

# Sequential indices that own parameters, per half. Variants of the public
# model disagree on where parameter-free layers (clamp, relu, upsample) sit,
# so source layers are matched to these positions by rank, not by raw index.
PARAM_LAYERS = {
    "encoder": list(range(15)),
    "decoder": [1, 3, 4, 5, 7, 8, 9, 10, 12, 13, 14, 15, 17, 18, 19],
}


def conv_entries(prefix, cin, cout, bias=True):
    entries = [(prefix + ".weight", (cout, cin, 3, 3))]
    if bias:
        entries.append((prefix + ".bias", (cout,)))
    return entries


def block_entries(prefix, channels):
    entries = []
    for j in (0, 2, 4):
        entries += conv_entries(f"{prefix}.conv.{j}", channels, channels)
    return entries


def expected_layout():
    """Ordered (name, shape) pairs for every tensor the runtime expects."""
    out = conv_entries("encoder.0", 3, 64)
    out += block_entries("encoder.1", 64)
    for start in (2, 6, 10):
        out += conv_entries(f"encoder.{start}", 64, 64, bias=False)
        for i in (1, 2, 3):
            out += block_entries(f"encoder.{start + i}", 64)
    out += conv_entries("encoder.14", 64, 4)

    out += conv_entries("decoder.1", 4, 64)
    for start in (3, 8, 13):
        for i in (0, 1, 2):
            out += block_entries(f"decoder.{start + i}", 64)
        out += conv_entries(f"decoder.{start + 4}", 64, 64, bias=False)
    out += block_entries("decoder.18", 64)
    out += conv_entries("decoder.19", 64, 3)
    return out


SAFETENSOR_DTYPES = {
    "F64": np.dtype("<f8"),
    "F32": np.dtype("<f4"),
    "F16": np.dtype("<f2"),
    "I64": np.dtype("<i8"),
    "I32": np.dtype("<i4"),
    "U8": np.dtype("u1"),
}


def read_safetensors(path):
    raw = Path(path).read_bytes()
    (header_len,) = struct.unpack("<Q", raw[:8])
    header = json.loads(raw[8 : 8 + header_len])
    data = raw[8 + header_len :]

    tensors = OrderedDict()
    for name, info in header.items():
        if name == "__metadata__":
            continue
        begin, end = info["data_offsets"]
        shape = tuple(info["shape"])
        if info["dtype"] == "BF16":
            bits = np.frombuffer(data[begin:end], dtype="<u2").astype(np.uint32)
            arr = (bits << 16).view(np.float32).reshape(shape)
        else:
            dtype = SAFETENSOR_DTYPES.get(info["dtype"])
            if dtype is None:
                raise SystemExit(
                    f"{path}: tensor '{name}' has unsupported dtype {info['dtype']}"
                )
            arr = np.frombuffer(data[begin:end], dtype=dtype).reshape(shape)
        tensors[name] = np.ascontiguousarray(arr, dtype=np.float32)
    return tensors


def read_torch(path):
    import torch

    obj = torch.load(path, map_location="cpu", weights_only=True)
    if isinstance(obj, dict) and "state_dict" in obj:
        obj = obj["state_dict"]
    if not isinstance(obj, dict):
        raise SystemExit(f"{path}: expected a state dict, got {type(obj).__name__}")
    return OrderedDict(
        (name, t.detach().to(torch.float32).cpu().numpy()) for name, t in obj.items()
    )


def read_state(path):
    if str(path).endswith(".safetensors"):
        return read_safetensors(path)
    return read_torch(path)


def split_halves(tensors, bare_role):
    """Assign each source tensor to a half and strip the half prefix."""
    halves = {"encoder": OrderedDict(), "decoder": OrderedDict()}
    bad = []
    for name, arr in tensors.items():
        for half in ("encoder", "decoder"):
            if name.startswith(half + "."):
                key = name[len(half) + 1 :]
                if key.startswith("layers."):
                    key = key[len("layers.") :]
                halves[half][key] = arr
                break
        else:
            if bare_role is None:
                bad.append(name)
            else:
                halves[bare_role][name] = arr
    if bad:
        raise SystemExit(
            "unrecognized tensor keys (pass encoder and decoder files "
            "separately if the checkpoint is unprefixed): " + ", ".join(bad[:8])
        )
    return halves


def remap_half(half, tensors):
    """Renumber source layers onto the runtime's sequential positions."""
    parsed = []
    for name, arr in tensors.items():
        idx, _, rest = name.partition(".")
        if not idx.isdigit() or not rest:
            raise SystemExit(f"cannot parse {half} tensor key: {name}")
        parsed.append((int(idx), rest, arr))

    source_layers = sorted({idx for idx, _, _ in parsed})
    targets = PARAM_LAYERS[half]
    if len(source_layers) != len(targets):
        raise SystemExit(
            f"{half}: found {len(source_layers)} parameter layers, "
            f"expected {len(targets)}"
        )
    position = {idx: targets[rank] for rank, idx in enumerate(source_layers)}
    return {f"{half}.{position[idx]}.{rest}": arr for idx, rest, arr in parsed}


def write_archive(path, named, meta):
    manifest = {"meta": meta, "tensors": []}
    offset = 0
    blobs = []
    for name, arr in named:
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        manifest["tensors"].append(
            {
                "name": name,
                "dtype": "float32",
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(blob),
            }
        )
        offset += len(blob)
        blobs.append(blob)

    encoded = json.dumps(manifest).encode()
    with open(path, "wb") as f:
        f.write(ARCHIVE_MAGIC)
        f.write(struct.pack("<Q", len(encoded)))
        f.write(encoded)
        for blob in blobs:
            f.write(blob)


def main():
    parser = argparse.ArgumentParser(
        description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument(
        "inputs",
        nargs="+",
        metavar="CHECKPOINT",
        help="one combined checkpoint, or the encoder then decoder files",
    )
    parser.add_argument(
        "-o",
        "--out",
        default="weights/taesd.wt",
        help="output archive path (default: %(default)s)",
    )
    args = parser.parse_args()

    if len(args.inputs) == 1:
        halves = split_halves(read_state(args.inputs[0]), bare_role=None)
        for half in ("encoder", "decoder"):
            if not halves[half]:
                raise SystemExit(
                    f"{args.inputs[0]}: no {half} tensors found; for the "
                    "two-file release pass the encoder and decoder paths"
                )
    elif len(args.inputs) == 2:
        halves = {"encoder": OrderedDict(), "decoder": OrderedDict()}
        for path, role in zip(args.inputs, ("encoder", "decoder")):
            for half, items in split_halves(read_state(path), bare_role=role).items():
                halves[half].update(items)
    else:
        parser.error("expected one combined checkpoint or two half files")

    mapped = {}
    for half, items in halves.items():
        mapped.update(remap_half(half, items))

    problems = []
    for name, shape in expected_layout():
        if name not in mapped:
            problems.append(f"missing {name} {shape}")
        elif mapped[name].shape != shape:
            problems.append(f"{name}: shape {mapped[name].shape}, expected {shape}")
    for name in mapped:
        if name not in dict(expected_layout()):
            problems.append(f"unexpected {name}")
    if problems:
        raise SystemExit(
            "checkpoint does not match the tiny autoencoder:\n  "
            + "\n  ".join(problems)
        )

    named = [(name, mapped[name]) for name, _ in expected_layout()]
    meta = {
        "format": "tiny-vae-weights",
        "converted_from": [Path(p).name for p in args.inputs],
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_archive(out, named, meta)

    total = sum(arr.size for _, arr in named)
    print(f"wrote {out} ({len(named)} tensors, {total:,} parameters)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
