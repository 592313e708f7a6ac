"""Binary container for feature banks.

Header: magic b"CGCN" then version, d, w, b, s as little-endian int32.
Payload: filters then biases as little-endian float64, filters in
(feature, row, column, channel) order.
"""
import os
import struct

import numpy as np

from Models.models import ConvFeatureBank
from src import logger
from src.exceptions import DatasetError

MAGIC = b"CGCN"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4s5i")


def bank_to_bytes(bank: ConvFeatureBank) -> bytes:
    header = HEADER.pack(MAGIC, FORMAT_VERSION, bank.d, bank.w, bank.b, bank.stride)
    return (header
            + bank.filters.astype("<f8").tobytes(order="C")
            + bank.biases.astype("<f8").tobytes())


def bank_from_bytes(payload: bytes, source: str = "<bytes>") -> ConvFeatureBank:
    if len(payload) < HEADER.size:
        raise DatasetError(f"{source}: truncated bank header")
    magic, version, d, w, b, s = HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise DatasetError(f"{source}: not a bank file (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise DatasetError(f"{source}: unsupported bank format version {version}")
    n_filters = d * w * w * b
    expected = HEADER.size + 8 * (n_filters + d)
    if len(payload) != expected:
        raise DatasetError(f"{source}: expected {expected} bytes, found {len(payload)}")
    values = np.frombuffer(payload, dtype="<f8", offset=HEADER.size).astype(np.float64)
    return ConvFeatureBank(values[:n_filters].reshape(d, w, w, b), values[n_filters:], s)


def write_bank(bank: ConvFeatureBank, path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as handle:
        handle.write(bank_to_bytes(bank))
    logger.info(f"Wrote {bank!r} to {path}")
    return path


def read_bank(path: str) -> ConvFeatureBank:
    if not os.path.isfile(path):
        raise DatasetError(f"bank file not found: {path}")
    with open(path, "rb") as handle:
        return bank_from_bytes(handle.read(), source=path)
