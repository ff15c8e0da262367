import struct

import numpy as np
import pytest

from rsvlbfgs import gen_eig_data, gen_spd_data
from rsvlbfgs.dataio import DatasetFormatError, from_bytes, header_text, load_dataset, save_dataset, to_bytes


@pytest.fixture(params=["karcher", "eig"])
def data(request):
    if request.param == "karcher":
        return gen_spd_data(3, 4, 10.0, seed=11)
    return gen_eig_data(5, 12, 0.1, seed=11)


def test_roundtrip_is_exact(data, tmp_path):
    fp = save_dataset(data, tmp_path / "d.rslb")
    back, fp2 = load_dataset(tmp_path / "d.rslb")
    assert fp == fp2
    assert back.kind == data.kind and back.seed == data.seed
    assert back.params() == data.params()
    payload = data.matrices if data.kind == "karcher" else data.D
    np.testing.assert_array_equal(back.matrices if back.kind == "karcher" else back.D, payload)


def test_header_layout(data):
    buf = to_bytes(data)
    magic, version, code, a, b = struct.unpack_from("<4sIBII", buf)
    assert magic == b"RSLB" and version == 1
    assert code == (1 if data.kind == "karcher" else 2)
    seed, param = struct.unpack_from("<Qd", buf, len(buf) - 16)
    assert seed == 11
    assert param == (data.cond if data.kind == "karcher" else data.gap)


def test_same_seed_same_fingerprint(tmp_path):
    a = save_dataset(gen_spd_data(3, 4, 10.0, 5), tmp_path / "a")
    b = save_dataset(gen_spd_data(3, 4, 10.0, 5), tmp_path / "b")
    c = save_dataset(gen_spd_data(3, 4, 10.0, 6), tmp_path / "c")
    assert a == b != c


@pytest.mark.parametrize(
    "mutate",
    [
        lambda b: b"XXXX" + b[4:],
        lambda b: b[:4] + struct.pack("<I", 2) + b[8:],
        lambda b: b[:8] + bytes([9]) + b[9:],
        lambda b: b[:-1],
        lambda b: b[:10],
    ],
)
def test_corrupt_inputs_rejected(data, mutate):
    with pytest.raises(DatasetFormatError):
        from_bytes(mutate(to_bytes(data)))


def test_header_text(data):
    text = header_text(data, "abc")
    assert text.startswith("magic=RSLB\nversion=1\n")
    assert f"kind={data.kind}" in text and "sha256=abc" in text
