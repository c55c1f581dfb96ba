import numpy as np
import pytest

from setembed.data import (
    LabeledDataset,
    PairList,
    gen_blobs,
    gen_rings,
    load_dataset_csv,
    make_verification_pairs,
    save_dataset_csv,
)
from setembed.errors import DatasetParseError, InfeasibleError, InvalidArgumentError
from setembed.svm import fit_linear_svm


class TestGenBlobs:
    def test_zero_spread_puts_samples_on_distinct_means(self):
        ds = gen_blobs(3, 1, 2, spread=0.0, separation=4.0, seed=7)
        assert ds.sample_count == 3
        assert sorted(ds.labels.tolist()) == [0, 1, 2]
        for a in range(3):
            for b in range(a + 1, 3):
                assert np.linalg.norm(ds.features[a] - ds.features[b]) >= 4.0

    def test_zero_spread_has_zero_within_class_variance(self):
        ds = gen_blobs(2, 5, 3, spread=0.0, separation=4.0, seed=11)
        for j in range(2):
            rows = ds.features[ds.labels == j]
            assert np.all(rows.var(axis=0) == 0.0)

    def test_empirical_means_close_to_generated_means(self):
        # zero-spread twin with the same seed sits exactly on the class means
        ds = gen_blobs(2, 100, 2, spread=0.5, separation=6.0, seed=1)
        means = gen_blobs(2, 1, 2, spread=0.0, separation=6.0, seed=1)
        for j in range(2):
            empirical = ds.features[ds.labels == j].mean(axis=0)
            assert np.linalg.norm(empirical - means.features[j]) < 0.2

    def test_deterministic(self):
        a = gen_blobs(4, 10, 3, 0.7, 5.0, seed=42)
        b = gen_blobs(4, 10, 3, 0.7, 5.0, seed=42)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    @pytest.mark.parametrize("kwargs", [
        dict(class_count=1, per_class=2, dim=2),
        dict(class_count=2, per_class=0, dim=2),
        dict(class_count=2, per_class=2, dim=0),
    ])
    def test_invalid_arguments(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            gen_blobs(spread=1.0, separation=3.0, seed=0, **kwargs)


class TestGenRings:
    def test_radial_ordering_by_construction(self):
        ds = gen_rings(2, 4, seed=3)
        radii = np.linalg.norm(ds.features, axis=1)
        assert radii[ds.labels == 0].max() < radii[ds.labels == 1].min()

    def test_not_linearly_separable(self):
        ds = gen_rings(2, 200, seed=3)
        y = np.where(ds.labels == 0, -1.0, 1.0)
        plane = fit_linear_svm(ds.features, y, C=1.0, tol=1e-4, max_iter=500)
        accuracy = float(np.mean(np.sign(plane.decision(ds.features)) == y))
        assert accuracy < 0.75

    def test_minimal_instance(self):
        ds = gen_rings(3, 1, seed=0)
        assert ds.sample_count == 3
        assert sorted(ds.labels.tolist()) == [0, 1, 2]

    def test_deterministic(self):
        a = gen_rings(3, 7, seed=9)
        b = gen_rings(3, 7, seed=9)
        assert np.array_equal(a.features, b.features)


class TestCsv:
    def test_basic_load(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0,1.0,2.0\n1,3.0,4.0\n")
        ds = load_dataset_csv(path)
        assert ds.sample_count == 2 and ds.dim == 2 and ds.class_count == 2
        assert np.array_equal(ds.features, [[1.0, 2.0], [3.0, 4.0]])

    def test_dense_reindex_by_first_appearance(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("5,0.0\n9,1.0\n5,2.0\n")
        ds = load_dataset_csv(path)
        assert ds.labels.tolist() == [0, 1, 0]
        assert ds.class_count == 2

    def test_decimal_label_truncates(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("2.0,0.0\n3.9,1.0\n")
        ds = load_dataset_csv(path)
        assert ds.labels.tolist() == [0, 1]

    def test_ragged_row_names_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0,1.0\n1,2.0,3.0\n")
        with pytest.raises(DatasetParseError) as err:
            load_dataset_csv(path)
        assert err.value.line_number == 2

    def test_non_numeric_field(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0,1.0\n0,abc\n")
        with pytest.raises(DatasetParseError) as err:
            load_dataset_csv(path)
        assert err.value.line_number == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(DatasetParseError):
            load_dataset_csv(path)

    def test_roundtrip(self, tmp_path):
        ds = gen_blobs(3, 4, 3, 0.5, 4.0, seed=8)
        path = tmp_path / "d.csv"
        save_dataset_csv(ds, path)
        back = load_dataset_csv(path)
        assert np.array_equal(back.features, ds.features)
        assert np.array_equal(back.labels, ds.labels)


class TestVerificationPairs:
    def test_balanced_counts(self):
        ds = gen_blobs(2, 2, 2, 0.5, 4.0, seed=1)
        pairs = make_verification_pairs(ds, 4, seed=0)
        flags = [same for _, _, same in pairs.pairs]
        assert sum(flags) == 2 and len(flags) == 4

    def test_odd_count_differs_by_one(self):
        ds = gen_blobs(3, 4, 2, 0.5, 4.0, seed=1)
        pairs = make_verification_pairs(ds, 7, seed=0)
        positives = sum(1 for _, _, same in pairs.pairs if same)
        assert abs(positives - (7 - positives)) == 1

    def test_all_singletons_is_infeasible(self):
        ds = LabeledDataset(np.eye(3), np.array([0, 1, 2]), 3)
        with pytest.raises(InfeasibleError):
            make_verification_pairs(ds, 2, seed=0)

    def test_flags_match_labels_exhaustively(self):
        ds = gen_blobs(5, 20, 2, 0.5, 4.0, seed=2)
        pairs = make_verification_pairs(ds, 100, seed=3)
        assert len(pairs) == 100
        for a, b, same in pairs.pairs:
            assert a != b
            assert same == (ds.labels[a] == ds.labels[b])

    def test_deterministic(self):
        ds = gen_blobs(4, 6, 2, 0.5, 4.0, seed=2)
        assert (make_verification_pairs(ds, 30, seed=5).pairs
                == make_verification_pairs(ds, 30, seed=5).pairs)

    def test_pairlist_requires_both_kinds(self):
        with pytest.raises(InvalidArgumentError):
            PairList(((0, 1, True),))
