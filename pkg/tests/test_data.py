import numpy as np
import pytest

from adalign.data import (
    DatasetSpec,
    DomainDataset,
    ShiftSpec,
    batch_iterator,
    generate,
    load,
    save,
    steps_per_epoch,
)
from adalign.errors import ConfigError, ParseError


def moons_spec(**kw):
    defaults = dict(family="two-moons", classes=2, points_per_domain=60,
                    shift=ShiftSpec(rotation_degrees=30.0), seed=7)
    defaults.update(kw)
    return DatasetSpec(**defaults)


def test_generate_deterministic():
    a = generate(moons_spec())
    b = generate(moons_spec())
    assert np.array_equal(a.source_x, b.source_x)
    assert np.array_equal(a.target_x, b.target_x)
    assert np.array_equal(a.source_y, b.source_y)


def test_generate_seed_changes_data():
    a = generate(moons_spec(seed=7))
    b = generate(moons_spec(seed=8))
    assert not np.array_equal(a.source_x, b.source_x)


def test_blobs_label_histogram_balanced():
    spec = DatasetSpec(family="gaussian-blobs", classes=3,
                       points_per_domain=100,
                       shift=ShiftSpec(translation=(0.0, 0.0)), seed=3)
    ds = generate(spec)
    counts = np.bincount(ds.source_y, minlength=3)
    assert counts.max() - counts.min() <= 1
    tgt_counts = np.bincount(ds.target_labels_for_eval(), minlength=3)
    assert tgt_counts.max() - tgt_counts.min() <= 1


def test_rotation_preserves_centroid():
    plain = generate(moons_spec(shift=ShiftSpec()))
    rotated = generate(moons_spec(shift=ShiftSpec(rotation_degrees=90.0)))
    # same seed: the pre-shift target draw is identical, rotation is about
    # the cloud centroid, so the centroid must not move
    assert np.allclose(plain.target_x.mean(axis=0),
                       rotated.target_x.mean(axis=0))
    assert not np.allclose(plain.target_x, rotated.target_x)


def test_translation_applied():
    shifted = generate(moons_spec(shift=ShiftSpec(translation=(5.0, -1.0))))
    plain = generate(moons_spec(shift=ShiftSpec()))
    assert np.allclose(shifted.target_x, plain.target_x + np.array([5.0, -1.0]))


def test_null_shift_same_family_statistics():
    ds = generate(moons_spec(shift=ShiftSpec()))
    # independent draws from the same distribution: means agree loosely
    assert np.linalg.norm(ds.source_x.mean(0) - ds.target_x.mean(0)) < 0.5


def test_spec_validation():
    with pytest.raises(ConfigError, match="family"):
        DatasetSpec(family="spiral")
    with pytest.raises(ConfigError, match="points_per_domain"):
        DatasetSpec(points_per_domain=3)
    with pytest.raises(ConfigError, match="rotation"):
        DatasetSpec(shift=ShiftSpec(rotation_degrees=270.0))
    with pytest.raises(ConfigError, match="classes"):
        DatasetSpec(family="two-moons", classes=3, points_per_domain=10)
    with pytest.raises(ConfigError, match="translation"):
        DatasetSpec(family="gaussian-blobs", dim=3,
                    shift=ShiftSpec(translation=(0.0, 0.0)))


def test_spec_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="wobble"):
        DatasetSpec.from_dict({"family": "two-moons", "wobble": 1})
    with pytest.raises(ConfigError, match="slide"):
        DatasetSpec.from_dict({"shift": {"slide": 2}})


def test_spec_dict_roundtrip():
    spec = moons_spec()
    assert DatasetSpec.from_dict(spec.to_dict()) == spec


# -- CSV round trip ---------------------------------------------------------

def test_save_load_roundtrip_exact(tmp_path):
    ds = generate(moons_spec())
    path = tmp_path / "moons.csv"
    save(ds, path)
    loaded = load(path)
    assert np.array_equal(ds.source_x, loaded.source_x)
    assert np.array_equal(ds.target_x, loaded.target_x)
    assert np.array_equal(ds.source_y, loaded.source_y)
    assert np.array_equal(ds.target_labels_for_eval(),
                          loaded.target_labels_for_eval())


def test_load_truncated_row_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("domain,label,f0,f1\nsource,0,1.0,2.0\ntarget,1,3.0\n")
    with pytest.raises(ParseError, match="line 3"):
        load(path)


def test_load_malformed_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y,z\n")
    with pytest.raises(ParseError, match="line 1"):
        load(path)


def test_load_bad_domain_tag(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("domain,label,f0\nsource,0,1.0\nmiddle,0,2.0\n")
    with pytest.raises(ParseError, match="line 3"):
        load(path)


def test_loaded_target_labels_are_quarantined(tmp_path):
    ds = generate(moons_spec())
    path = tmp_path / "moons.csv"
    save(ds, path)
    loaded = load(path)
    assert loaded.label_reads == 0
    assert not hasattr(loaded, "target_y")
    labels = loaded.target_labels_for_eval()
    assert loaded.label_reads == 1
    assert labels.shape == (60,)


# -- batch iterator ---------------------------------------------------------

def test_batch_iterator_pair_regime():
    ds = generate(moons_spec())
    batches = list(batch_iterator(ds, batch_size=1, seed=0))
    assert len(batches) == 60
    assert batches[0].source_x.shape == (1, 2)
    assert batches[0].target_x.shape == (1, 2)


def test_batch_iterator_epoch_length():
    ds = generate(moons_spec(points_per_domain=67))
    assert steps_per_epoch(ds, 16) == 4
    assert len(list(batch_iterator(ds, 16, seed=1))) == 4


def test_batch_iterator_seed_determinism():
    ds = generate(moons_spec())
    a = list(batch_iterator(ds, 8, seed=5))
    b = list(batch_iterator(ds, 8, seed=5))
    c = list(batch_iterator(ds, 8, seed=6))
    for x, y in zip(a, b):
        assert np.array_equal(x.source_x.data, y.source_x.data)
        assert np.array_equal(x.target_x.data, y.target_x.data)
        assert np.array_equal(x.source_y, y.source_y)
    assert not np.array_equal(a[0].source_x.data, c[0].source_x.data)


def test_batch_iterator_independent_domain_shuffles():
    ds = generate(moons_spec(points_per_domain=200))
    batch = next(batch_iterator(ds, 200, seed=2))
    src_rows = [tuple(r) for r in batch.source_x.data]
    tgt_rows = [tuple(r) for r in batch.target_x.data]
    src_perm = [src_rows.index(tuple(r)) for r in ds.source_x[:10]]
    tgt_perm = [tgt_rows.index(tuple(r)) for r in ds.target_x[:10]]
    assert src_perm != tgt_perm


def test_batch_iterator_rejects_oversized_batch():
    ds = generate(moons_spec())
    with pytest.raises(ConfigError):
        next(batch_iterator(ds, 61, seed=0))


def test_batches_carry_no_target_labels():
    ds = generate(moons_spec())
    batch = next(batch_iterator(ds, 4, seed=0))
    assert not hasattr(batch, "target_y")
    assert ds.label_reads == 0
