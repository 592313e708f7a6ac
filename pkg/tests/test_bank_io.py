import numpy as np
import pytest

from Network.bank_io import HEADER, MAGIC, bank_from_bytes, bank_to_bytes, read_bank, write_bank
from src.exceptions import DatasetError, RejectedInputError


def test_bank_survives_a_file_round_trip(tmp_path, tiny_bank):
    path = write_bank(tiny_bank, str(tmp_path / "nested" / "bank.cgcn"))
    loaded = read_bank(path)
    assert loaded.checksum() == tiny_bank.checksum()
    assert (loaded.d, loaded.w, loaded.b, loaded.stride) == (4, 3, 3, 1)


def test_header_layout(tiny_bank):
    payload = bank_to_bytes(tiny_bank)
    assert payload[:4] == MAGIC
    assert len(payload) == HEADER.size + 8 * (4 * 3 * 3 * 3 + 4)


def test_corrupt_payloads_are_rejected(tiny_bank):
    payload = bank_to_bytes(tiny_bank)
    with pytest.raises(DatasetError, match="magic"):
        bank_from_bytes(b"XXXX" + payload[4:])
    with pytest.raises(DatasetError):
        bank_from_bytes(payload[:-8])
    with pytest.raises(DatasetError, match="truncated"):
        bank_from_bytes(payload[:10])


def test_missing_bank_file(tmp_path):
    with pytest.raises(DatasetError, match="not found"):
        read_bank(str(tmp_path / "absent.cgcn"))


def test_non_finite_bank_is_rejected(tiny_bank):
    payload = bytearray(bank_to_bytes(tiny_bank))
    payload[HEADER.size:HEADER.size + 8] = np.array([np.inf]).astype("<f8").tobytes()
    with pytest.raises(RejectedInputError):
        bank_from_bytes(bytes(payload))
