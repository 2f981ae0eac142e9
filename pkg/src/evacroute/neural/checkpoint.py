"""Versioned binary checkpoint for policy weights.

Layout: magic, u32 format version, u32 header length, JSON header with
the architecture hyperparameters and weight count, little-endian f32
weights, u32 CRC-32 of everything before it. The header makes a
checkpoint self-describing, so code can rebuild whatever architecture
was saved.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .model import NeuralSolverError, PolicyParams

MAGIC = b"EVRT"
VERSION = 1


class VersionMismatch(NeuralSolverError):
    pass


class CorruptCheckpoint(NeuralSolverError):
    pass


def save_checkpoint(params: PolicyParams) -> bytes:
    header = json.dumps({
        "embed_dim": params.embed_dim,
        "n_heads": params.n_heads,
        "n_encoder_layers": params.n_encoder_layers,
        "feedforward_dim": params.feedforward_dim,
        "seed": params.seed,
        "n_weights": int(params.weights.size),
    }, sort_keys=True).encode()
    weights = np.ascontiguousarray(params.weights, dtype="<f4").tobytes()
    body = MAGIC + struct.pack("<II", VERSION, len(header)) + header + weights
    return body + struct.pack("<I", zlib.crc32(body))


def load_checkpoint(data: bytes) -> PolicyParams:
    if len(data) < 16 or data[:4] != MAGIC:
        raise CorruptCheckpoint("not a policy checkpoint (bad magic or truncated)")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(data[:-4]) != stored_crc:
        raise CorruptCheckpoint("checksum mismatch; file is truncated or corrupted")
    version, header_len = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise VersionMismatch(f"checkpoint format v{version}, this code reads v{VERSION}")
    header = json.loads(data[12:12 + header_len].decode())
    weights = np.frombuffer(data[12 + header_len:-4], dtype="<f4")
    if weights.size != header["n_weights"]:
        raise CorruptCheckpoint(
            f"header promises {header['n_weights']} weights, payload has {weights.size}"
        )
    return PolicyParams(
        embed_dim=header["embed_dim"],
        n_heads=header["n_heads"],
        n_encoder_layers=header["n_encoder_layers"],
        feedforward_dim=header["feedforward_dim"],
        weights=weights.copy(),
        seed=header["seed"],
    )
