import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stembed.archive import ArchiveError, config_hash, read_archive, write_archive


def test_roundtrip_byte_identical(tmp_path):
    rng = np.random.default_rng(0)
    entries = {
        "utt1": rng.normal(size=(3, 5)) * 100,
        "utt2": rng.normal(size=(1, 5)) * 1e-7,
        "spk~x": np.zeros((2, 5)),
    }
    p1, p2 = tmp_path / "a.ark", tmp_path / "b.ark"
    write_archive(p1, entries, "sbe", 5, "deadbeef0123")
    loaded, header = read_archive(p1)
    assert header == {"kind": "sbe", "dim": "5", "hash": "deadbeef0123"}
    assert list(loaded) == list(entries)
    write_archive(p2, loaded, header["kind"], int(header["dim"]), header["hash"])
    assert p1.read_bytes() == p2.read_bytes()


def test_vector_entries_become_rows(tmp_path):
    path = tmp_path / "v.ark"
    write_archive(path, {"u": np.arange(4.0)}, "embedding", 4, "0" * 12)
    loaded, _ = read_archive(path)
    assert loaded["u"].shape == (1, 4)
    assert np.array_equal(loaded["u"][0], np.arange(4.0))


def test_values_survive_at_nine_significant_digits(tmp_path):
    path = tmp_path / "p.ark"
    values = np.array([np.pi, 1e-30, -2.5e17, 0.1])
    write_archive(path, {"u": values}, "x", 4, "0" * 12)
    loaded, _ = read_archive(path)
    assert np.allclose(loaded["u"][0], values, rtol=1e-8)


def test_dim_mismatch_on_write(tmp_path):
    with pytest.raises(ArchiveError):
        write_archive(tmp_path / "x.ark", {"u": np.ones(3)}, "x", 4, "0" * 12)


def test_malformed_archives_rejected(tmp_path):
    bad1 = tmp_path / "bad1.ark"
    bad1.write_text("#!dim=2\nu1 [\n1 2\n]\nu1 [\n3 4\n]\n")
    with pytest.raises(ArchiveError):
        read_archive(bad1)
    bad2 = tmp_path / "bad2.ark"
    bad2.write_text("#!dim=2\nu1 [\n1 2\n")
    with pytest.raises(ArchiveError):
        read_archive(bad2)
    bad3 = tmp_path / "bad3.ark"
    bad3.write_text("#!dim=3\nu1 [\n1 2\n]\n")
    with pytest.raises(ArchiveError):
        read_archive(bad3)


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False,
                          min_value=-1e12, max_value=1e12),
                min_size=1, max_size=8))
@settings(max_examples=50, deadline=None)
def test_roundtrip_property(tmp_path_factory, row):
    tmp = tmp_path_factory.mktemp("ark")
    p1, p2 = tmp / "a.ark", tmp / "b.ark"
    write_archive(p1, {"u": np.array(row)}, "x", len(row), "f" * 12)
    loaded, header = read_archive(p1)
    write_archive(p2, loaded, "x", len(row), "f" * 12)
    assert p1.read_bytes() == p2.read_bytes()


def test_config_hash_sensitivity():
    base = {"d_s": 2, "d_t": 5, "seed": 0, "channels": 40}
    assert config_hash(base) == config_hash(dict(base))
    assert len(config_hash(base)) == 12
    for key in base:
        changed = dict(base)
        changed[key] = 99
        assert config_hash(changed) != config_hash(base)
