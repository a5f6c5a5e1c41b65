"""Versioned binary checkpoints with byte-identical serialization.

Layout: an 8-byte magic, a little-endian uint64 header length, a JSON header
with sorted keys, then the raw bytes of every array in header-manifest
order. JSON with sorted keys plus fixed array order makes identical states
serialize to identical bytes, which the determinism and resume guarantees
lean on (a zip-based format would embed timestamps).

The header records the format version, training step, the full flat config
echo, the random-generator state, the best validation result so far, and an
array manifest (name, shape, dtype). Arrays are grouped by role with dotted
prefixes: gen.*, disc.*, opt.gen.m.*, opt.gen.v.*, opt.disc.m.*,
opt.disc.v.*.
"""

import json
import struct

import numpy as np

from . import InvalidInputError

MAGIC = b"AVCKPT01"
FORMAT_VERSION = 1


def _flatten_arrays(state):
    """Deterministically ordered (name, array) pairs from a state dict."""
    groups = [
        ("gen", state["gen_params"]),
        ("disc", state["disc_params"]),
        ("opt.gen.m", state["opt_gen_m"]),
        ("opt.gen.v", state["opt_gen_v"]),
        ("opt.disc.m", state["opt_disc_m"]),
        ("opt.disc.v", state["opt_disc_v"]),
    ]
    out = []
    for prefix, params in groups:
        for name in sorted(params):
            out.append((f"{prefix}.{name}", np.ascontiguousarray(params[name])))
    return out


def save_checkpoint(path, *, step, config_echo, rng_state, best_val,
                    gen_params, disc_params, opt_gen_m, opt_gen_v,
                    opt_disc_m, opt_disc_v):
    """Serialize one complete training state; see module docstring for layout."""
    state = dict(
        gen_params=gen_params, disc_params=disc_params,
        opt_gen_m=opt_gen_m, opt_gen_v=opt_gen_v,
        opt_disc_m=opt_disc_m, opt_disc_v=opt_disc_v,
    )
    arrays = _flatten_arrays(state)
    header = {
        "version": FORMAT_VERSION,
        "step": int(step),
        "config": dict(config_echo),
        "rng_state": rng_state,
        "best_val": None if best_val is None else [int(best_val[0]), float(best_val[1])],
        "arrays": [
            {"name": name, "shape": list(arr.shape), "dtype": arr.dtype.str}
            for name, arr in arrays
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _name, arr in arrays:
            fh.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())


def load_checkpoint(path):
    """Read a checkpoint back into (header, grouped array dicts)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise InvalidInputError(
                f"{path} is not a checkpoint (bad magic {magic!r})"
            )
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("version") != FORMAT_VERSION:
            raise InvalidInputError(
                f"{path}: unsupported checkpoint version {header.get('version')}"
            )
        groups = {
            "gen": {}, "disc": {},
            "opt.gen.m": {}, "opt.gen.v": {},
            "opt.disc.m": {}, "opt.disc.v": {},
        }
        for entry in header["arrays"]:
            dtype = np.dtype(entry["dtype"])
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            raw = fh.read(count * dtype.itemsize)
            if len(raw) != count * dtype.itemsize:
                raise InvalidInputError(f"{path}: truncated array {entry['name']}")
            arr = np.frombuffer(raw, dtype=dtype).reshape(entry["shape"]).copy()
            name = entry["name"]
            for prefix in sorted(groups, key=len, reverse=True):
                if name.startswith(prefix + "."):
                    groups[prefix][name[len(prefix) + 1:]] = arr
                    break
            else:
                raise InvalidInputError(f"{path}: unknown array group for {name}")
    return header, groups
