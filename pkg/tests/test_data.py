import os
import struct

import numpy as np
import pytest

from lathadapter.data import (CKPT_HEADER, EMB_HEADER, Checkpoint, SynthSpec,
                              decode_checkpoint, decode_embeddings, encode_checkpoint,
                              encode_embeddings, generate_synthetic, load_checkpoint,
                              load_embeddings, save_checkpoint, save_embeddings,
                              split_indices)
from lathadapter.errors import IncompatibleVersionError, ParseError, UsageError, ValidationError


def test_embedding_round_trip(tmp_path, rng):
    X = rng.normal(size=(2, 3)).astype(np.float32).astype(np.float64)
    path = tmp_path / "x.lha1"
    save_embeddings(path, X)
    got = load_embeddings(path)
    assert np.array_equal(got.data, X) and got.labels is None
    save_embeddings(path, X, [4, -1])
    assert load_embeddings(path).labels.tolist() == [4, -1]
    assert os.listdir(tmp_path) == ["x.lha1"]


def test_header_layout():
    buf = encode_embeddings(np.ones((2, 3)), [0, 1])
    assert buf[:4] == b"LHA1"
    assert struct.unpack_from("<HHII", buf, 4) == (1, 1, 2, 3)
    assert len(buf) == 16 + 4 * 6 + 4 * 2


@pytest.mark.parametrize("cut", [3, 16, 20, 39])
def test_truncation_reports_offset(cut):
    buf = encode_embeddings(np.ones((2, 3)), [0, 1])
    with pytest.raises(ParseError) as err:
        decode_embeddings(buf[:cut])
    assert err.value.offset == cut


def test_trailing_bytes_rejected():
    buf = encode_embeddings(np.ones((1, 2)))
    with pytest.raises(ParseError) as err:
        decode_embeddings(buf + b"\0")
    assert err.value.offset == len(buf)


def test_nan_names_row_and_col():
    buf = bytearray(encode_embeddings(np.ones((3, 4))))
    struct.pack_into("<f", buf, EMB_HEADER.size + 4 * (2 * 4 + 1), float("nan"))
    with pytest.raises(ValidationError, match="row 2, col 1") as err:
        decode_embeddings(bytes(buf))
    assert err.value.offset == EMB_HEADER.size + 4 * 9


def test_bad_magic_version_and_flags():
    buf = encode_embeddings(np.ones((1, 2)))
    with pytest.raises(ParseError) as err:
        decode_embeddings(b"XXXX" + buf[4:])
    assert err.value.offset == 0
    with pytest.raises(IncompatibleVersionError):
        decode_embeddings(buf[:4] + struct.pack("<H", 2) + buf[6:])
    with pytest.raises(ParseError):
        decode_embeddings(buf[:6] + struct.pack("<H", 4) + buf[8:])


def test_encode_rejects_bad_input():
    with pytest.raises(UsageError):
        encode_embeddings(np.ones(3))
    with pytest.raises(ValidationError):
        encode_embeddings(np.array([[1e300]]))
    with pytest.raises(UsageError):
        encode_embeddings(np.ones((2, 2)), [1])


def test_checkpoint_round_trip_bit_exact(tmp_path, rng):
    ck = Checkpoint(rng.normal(size=(5, 7)), 0.1, 0.2, 0.3, 0.04, 0.5, {"seed": 3, "lr": 0.002})
    path = save_checkpoint(tmp_path / "a.lhck", ck)
    got = load_checkpoint(path)
    assert got.attributes.tobytes() == ck.attributes.tobytes()
    assert (got.c, got.beta, got.sigma, got.tau, got.lambda_h) == (0.1, 0.2, 0.3, 0.04, 0.5)
    assert got.config == {"lr": "0.002", "seed": "3"}
    assert encode_checkpoint(got) == encode_checkpoint(ck)


def test_checkpoint_errors(rng):
    buf = encode_checkpoint(Checkpoint(rng.normal(size=(2, 2)), config={"a": 1}))
    with pytest.raises(ParseError) as err:
        decode_checkpoint(b"LHA1" + buf[4:])
    assert err.value.offset == 0
    bumped = buf[:4] + struct.pack("<H", 9) + buf[6:]
    with pytest.raises(IncompatibleVersionError, match="incompatible"):
        decode_checkpoint(bumped)
    with pytest.raises(ParseError):
        decode_checkpoint(buf[:CKPT_HEADER.size + 8])
    with pytest.raises(ParseError):
        decode_checkpoint(buf + b"x")
    with pytest.raises(UsageError):
        encode_checkpoint(Checkpoint(np.ones((1, 1)), config={"a=b": 1}))


def test_synthetic_is_pure_function_of_spec():
    a, b = generate_synthetic(SynthSpec(seed=3)), generate_synthetic(SynthSpec(seed=3))
    for name in ("text", "images", "labels", "attr_centers", "attr_index"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    assert generate_synthetic(SynthSpec(seed=4)).images.tobytes() != a.images.tobytes()


def test_noise_free_images_equal_centers():
    d = generate_synthetic(SynthSpec(noise_sigma=0.0))
    np.testing.assert_allclose(d.images, d.attr_centers[d.attr_index], rtol=0, atol=1e-15)


def test_labels_match_generating_center():
    spec = SynthSpec(classes=5, attrs_per_class=3)
    d = generate_synthetic(spec)
    assert np.array_equal(d.labels, d.attr_index // spec.attrs_per_class)
    np.testing.assert_allclose(np.linalg.norm(d.images, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(d.text, axis=1), spec.text_radius, atol=1e-12)


def test_nearest_direction_classifier():
    spec = SynthSpec(classes=4, attrs_per_class=2, samples_per_class=25, dim=64, noise_sigma=0.05)
    d = generate_synthetic(spec)
    pred = np.argmax(d.images @ d.text.T, axis=1)
    assert np.mean(pred == d.labels) >= 0.99


@pytest.mark.parametrize("kwargs", [dict(classes=1), dict(attrs_per_class=0),
                                    dict(samples_per_class=1), dict(dim=1),
                                    dict(noise_sigma=-0.1), dict(classes=8, dim=4)])
def test_invalid_specs(kwargs):
    with pytest.raises(UsageError):
        generate_synthetic(SynthSpec(**kwargs))


def test_split_is_stratified_and_seeded():
    labels = np.repeat(np.arange(4), 50)
    tr, te = split_indices(labels, 0.8, 7)
    assert len(tr) == 160 and len(te) == 40
    assert np.all(np.bincount(labels[te]) == 10)
    assert not set(tr) & set(te)
    tr2, te2 = split_indices(labels, 0.8, 7)
    assert np.array_equal(tr, tr2) and np.array_equal(te, te2)
