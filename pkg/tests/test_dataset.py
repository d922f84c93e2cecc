import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import topogen as tg
from topogen import dataset
from topogen.errors import (
    BadMagic,
    ChecksumMismatch,
    ShapeMismatch,
    TruncatedFile,
    UnknownCombo,
    VersionMismatch,
)
from topogen.fem import FieldBundle

DOMAIN = tg.DesignDomain(nelx=6, nely=4)
CATALOG = tg.enumerate_bc_scenarios()


def make_record(seed=0, sample_id=0, domain=DOMAIN):
    """Fabricated but invariant-satisfying record on a tiny grid."""
    rng = np.random.default_rng(seed)
    sampler = tg.ProblemSampler(domain, CATALOG)
    spec = sampler.sample(rng)
    shape = (domain.nely, domain.nelx)
    mats = {n: rng.normal(size=shape) for n in
            ("ux", "uy", "s11", "s22", "s12", "e11", "e22", "e12")}
    fields = FieldBundle(
        **mats,
        svm=np.abs(rng.normal(size=shape)),
        w=np.abs(rng.normal(size=shape)),
    )
    target = rng.uniform(0.0, 1.0, size=shape)
    return tg.encode_sample(spec, fields, target, domain, sample_id)


class TestEncode:
    def test_vf_channel_constant(self):
        rec = make_record(1)
        vf32 = np.float32(rec.meta["spec"]["vf_target"])
        assert np.all(rec.channels["vf"] == vf32)

    def test_bc_codes(self):
        rec = make_record(2)
        assert set(np.unique(rec.channels["bc_code"])) <= {0.0, 1.0, 2.0, 3.0}

    def test_field_channels_pass_through_bitwise(self):
        rng = np.random.default_rng(3)
        sampler = tg.ProblemSampler(DOMAIN, CATALOG)
        spec = sampler.sample(rng)
        shape = (DOMAIN.nely, DOMAIN.nelx)
        solid = np.ones(shape)
        u = tg.assemble_and_solve(solid, spec, DOMAIN, 2.0)
        fields = tg.compute_fields(u, solid, DOMAIN)
        rec = tg.encode_sample(spec, fields, solid * 0.5, DOMAIN, 7)
        assert rec.channels["svm"].tobytes() == fields.svm.astype(np.float32).tobytes()
        assert rec.channels["w"].tobytes() == fields.w.astype(np.float32).tobytes()

    def test_channel_order_is_complete(self):
        rec = make_record(4)
        assert set(rec.channels) == set(tg.CHANNEL_ORDER)
        assert len(tg.CHANNEL_ORDER) == 14

    def test_shape_mismatch(self):
        rng = np.random.default_rng(5)
        spec = tg.ProblemSampler(DOMAIN, CATALOG).sample(rng)
        shape = (DOMAIN.nely, DOMAIN.nelx)
        zeros = {n: np.zeros(shape) for n in
                 ("ux", "uy", "s11", "s22", "s12", "e11", "e22", "e12", "svm", "w")}
        fields = FieldBundle(**zeros)
        with pytest.raises(ShapeMismatch):
            tg.encode_sample(spec, fields, np.zeros((2, 2)), DOMAIN, 0)


class TestRoundTrip:
    def test_bitwise_roundtrip(self, tmp_path):
        for seed in range(20):
            rec = make_record(seed, sample_id=seed)
            path = tmp_path / dataset.sample_filename(seed)
            tg.write_sample(rec, path)
            back = tg.read_sample(path)
            assert dataset.records_equal(rec, back)
            assert back.meta == rec.meta

    def test_spec_survives_roundtrip(self, tmp_path):
        rec = make_record(30, sample_id=3)
        path = tmp_path / "s.topo1"
        tg.write_sample(rec, path)
        assert tg.read_sample(path).spec() == rec.spec()

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_roundtrip_bytes_property(self, seed):
        rec = make_record(seed % 1000, sample_id=seed % 97)
        buf = dataset.record_to_bytes(rec)
        assert dataset.records_equal(dataset.record_from_bytes(buf), rec)


class TestCorruption:
    @pytest.fixture()
    def buf(self):
        return bytearray(dataset.record_to_bytes(make_record(8)))

    def test_bad_magic(self, buf):
        buf[:4] = b"XXXX"
        with pytest.raises(BadMagic):
            dataset.record_from_bytes(bytes(buf))

    def test_version_mismatch(self, buf):
        buf[5:7] = (99).to_bytes(2, "little")
        with pytest.raises(VersionMismatch):
            dataset.record_from_bytes(bytes(buf))

    def test_truncation_detected(self, buf):
        with pytest.raises((TruncatedFile, ChecksumMismatch)):
            dataset.record_from_bytes(bytes(buf[:-4]))
        with pytest.raises((TruncatedFile, ChecksumMismatch)):
            dataset.record_from_bytes(bytes(buf[: len(buf) // 2]))
        with pytest.raises(TruncatedFile):
            dataset.record_from_bytes(b"TO")

    def test_flipped_payload_byte(self, buf):
        buf[40] ^= 0xFF
        with pytest.raises(ChecksumMismatch):
            dataset.record_from_bytes(bytes(buf))


class TestCombos:
    def test_combo_four_channel_names(self):
        assert dataset.combo_channel_names(4) == (
            "vf", "bc_code", "load_x", "load_y", "svm", "w")

    def test_combo_zero_is_the_input_stack(self):
        rec = make_record(9)
        stack = tg.select_field_combo(rec, 0)
        assert stack.shape == (4, DOMAIN.nely, DOMAIN.nelx)

    def test_combo_stack_is_pure(self):
        rec = make_record(10)
        a = tg.select_field_combo(rec, 4)
        b = tg.select_field_combo(rec, 4)
        assert a.tobytes() == b.tobytes()
        assert a.shape[0] == 6

    @pytest.mark.parametrize("combo", [-1, 9, 10, 42])
    def test_unknown_combo(self, combo):
        rec = make_record(11)
        with pytest.raises(UnknownCombo):
            tg.select_field_combo(rec, combo)

    def test_all_combo_sizes(self):
        sizes = {i: len(dataset.combo_channel_names(i)) for i in range(9)}
        assert sizes == {0: 4, 1: 6, 2: 5, 3: 5, 4: 6, 5: 7, 6: 7, 7: 10, 8: 8}


class TestManifest:
    def test_write_read_atomic(self, tmp_path):
        manifest = {"format_version": 1, "samples": [], "sample_count": 0}
        dataset.write_manifest(manifest, tmp_path)
        assert not (tmp_path / "manifest.json.tmp").exists()
        assert dataset.read_manifest(tmp_path) == manifest

    def test_load_dataset_checks_ids(self, tmp_path):
        rec = make_record(12, sample_id=5)
        tg.write_sample(rec, tmp_path / "a.topo1")
        manifest = {"samples": [{"id": 6, "file": "a.topo1", "split": None}]}
        dataset.write_manifest(manifest, tmp_path)
        with pytest.raises(ValueError, match="carries id"):
            dataset.load_dataset(tmp_path)

    def test_load_dataset_by_split(self, tmp_path):
        for sid, split in ((0, "train"), (1, "val")):
            rec = make_record(sid, sample_id=sid)
            tg.write_sample(rec, tmp_path / dataset.sample_filename(sid))
        manifest = {"samples": [
            {"id": 0, "file": dataset.sample_filename(0), "split": "train"},
            {"id": 1, "file": dataset.sample_filename(1), "split": "val"},
        ]}
        dataset.write_manifest(manifest, tmp_path)
        assert set(dataset.load_dataset(tmp_path)) == {0, 1}
        assert set(dataset.load_dataset(tmp_path, split="train")) == {0}


def test_normalization_stats():
    recs = [make_record(s, sample_id=s) for s in (20, 21)]
    stats = dataset.compute_normalization(recs)
    assert set(stats) == set(tg.CHANNEL_ORDER)
    merged = np.concatenate([r.channels["svm"].ravel() for r in recs]).astype(np.float64)
    assert stats["svm"]["mean"] == pytest.approx(merged.mean(), rel=1e-12)
    assert stats["svm"]["std"] == pytest.approx(merged.std(), rel=1e-12)


def test_pgm_export(tmp_path):
    mat = np.linspace(0, 1, 24).reshape(4, 6)
    path = tmp_path / "m.pgm"
    dataset.write_pgm(mat, path)
    data = path.read_bytes()
    assert data.startswith(b"P5\n6 4\n255\n")
    pixels = data.split(b"255\n", 1)[1]
    assert len(pixels) == 24
    assert pixels[0] == 0 and pixels[-1] == 255


def test_canonical_json_is_stable():
    a = dataset.canonical_json({"b": 1.5, "a": [1, 2]})
    assert a == '{"a":[1,2],"b":1.5}'
    assert json.loads(a) == {"a": [1, 2], "b": 1.5}
