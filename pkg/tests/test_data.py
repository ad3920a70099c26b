import numpy as np
import pytest

from boundarynorm.data import (
    IdxCountMismatchError,
    IdxMagicError,
    IdxTruncatedError,
    SplitSpec,
    gaussian_blobs,
    load_csv,
    load_idx,
    parse_data_spec,
    ring_ood,
    save_csv,
    save_idx,
    split,
)


class TestBlobs:
    def test_zero_std_collapses_to_means(self):
        data = gaussian_blobs(c=4, d=3, n_per_class=5, radius=2.0, std=0.0, seed=0)
        for k in range(4):
            angle = 2 * np.pi * k / 4
            mean = np.array([2 * np.cos(angle), 2 * np.sin(angle), 0.0])
            rows = data.inputs[data.labels == k]
            assert np.max(np.abs(rows - mean)) < 1e-12

    def test_deterministic_per_seed(self):
        a = gaussian_blobs(c=3, d=2, n_per_class=10, radius=4.0, std=0.5, seed=9)
        b = gaussian_blobs(c=3, d=2, n_per_class=10, radius=4.0, std=0.5, seed=9)
        assert np.array_equal(a.inputs, b.inputs)
        assert np.array_equal(a.labels, b.labels)

    def test_two_class_blobs_linearly_separable(self):
        from boundarynorm.model import forward, init_model
        from boundarynorm.objectives import LossKind
        from boundarynorm.trainer import TrainConfig, train

        data = gaussian_blobs(c=2, d=2, n_per_class=150, radius=4.0, std=0.5, seed=10)
        model = init_model([2, 2], seed=10)
        cfg = TrainConfig(loss=LossKind("cross_entropy"), epochs=40, batch_size=32,
                          lr=0.1, momentum=0.9, weight_decay=0.0, schedule="cosine", seed=10)
        final, _ = train(model, data, cfg)
        logits = forward(final, data.inputs).logits
        assert float(np.mean(np.argmax(logits, axis=1) == data.labels)) >= 0.99

    def test_label_layout(self):
        data = gaussian_blobs(c=3, d=2, n_per_class=4, radius=1.0, std=0.1, seed=0)
        assert data.n_samples == 12
        assert np.array_equal(np.unique(data.labels), [0, 1, 2])


class TestRing:
    def test_norms_within_annulus(self):
        data = ring_ood(d=4, n=500, inner_radius=6.0, seed=1)
        norms = np.linalg.norm(data.inputs[:, :2], axis=1)
        assert np.all(norms >= 6.0 - 1e-12)
        assert np.all(norms <= 9.0 + 1e-12)
        assert np.all(data.inputs[:, 2:] == 0.0)

    def test_disjoint_from_blobs(self):
        # inner radius beyond blob radius + 4 std: no overlap in 10k draws
        blobs = gaussian_blobs(c=4, d=2, n_per_class=2500, radius=4.0, std=0.5, seed=2)
        ring = ring_ood(d=2, n=10000, inner_radius=6.5, seed=3)
        blob_max = np.max(np.linalg.norm(blobs.inputs, axis=1))
        ring_min = np.min(np.linalg.norm(ring.inputs, axis=1))
        assert blob_max < ring_min

    def test_deterministic(self):
        a = ring_ood(d=2, n=50, inner_radius=3.0, seed=4)
        b = ring_ood(d=2, n=50, inner_radius=3.0, seed=4)
        assert np.array_equal(a.inputs, b.inputs)


class TestIdx:
    def test_hand_built_fixture(self, tmp_path):
        # two 2x2 images, byte-by-byte
        images = tmp_path / "imgs.idx"
        labels = tmp_path / "lbls.idx"
        img_payload = bytes([0, 51, 102, 255, 10, 20, 30, 40])
        images.write_bytes(
            (0x803).to_bytes(4, "big")
            + (2).to_bytes(4, "big")
            + (2).to_bytes(4, "big")
            + (2).to_bytes(4, "big")
            + img_payload
        )
        labels.write_bytes((0x801).to_bytes(4, "big") + (2).to_bytes(4, "big") + bytes([7, 3]))
        data = load_idx(images, labels)
        assert data.inputs.shape == (2, 4)
        assert np.array_equal(data.labels, [7, 3])
        assert np.max(np.abs(data.inputs[0] - np.array([0, 51, 102, 255]) / 255.0)) < 1e-15

    def test_wrong_magic(self, tmp_path):
        images = tmp_path / "imgs.idx"
        labels = tmp_path / "lbls.idx"
        images.write_bytes((0x802).to_bytes(4, "big") + bytes(12))
        labels.write_bytes((0x801).to_bytes(4, "big") + (0).to_bytes(4, "big"))
        with pytest.raises(IdxMagicError):
            load_idx(images, labels)

    def test_count_mismatch(self, tmp_path):
        images = tmp_path / "imgs.idx"
        labels = tmp_path / "lbls.idx"
        images.write_bytes(
            (0x803).to_bytes(4, "big") + (3).to_bytes(4, "big")
            + (1).to_bytes(4, "big") + (1).to_bytes(4, "big") + bytes([1, 2, 3])
        )
        labels.write_bytes((0x801).to_bytes(4, "big") + (2).to_bytes(4, "big") + bytes([0, 1]))
        with pytest.raises(IdxCountMismatchError):
            load_idx(images, labels)

    def test_truncated(self, tmp_path):
        images = tmp_path / "imgs.idx"
        labels = tmp_path / "lbls.idx"
        images.write_bytes(
            (0x803).to_bytes(4, "big") + (2).to_bytes(4, "big")
            + (2).to_bytes(4, "big") + (2).to_bytes(4, "big") + bytes([1, 2, 3])
        )
        labels.write_bytes((0x801).to_bytes(4, "big") + (2).to_bytes(4, "big") + bytes([0, 1]))
        with pytest.raises(IdxTruncatedError):
            load_idx(images, labels)

    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        images = rng.integers(0, 256, size=(7, 3, 3)).astype(np.uint8)
        labels = rng.integers(0, 10, size=7).astype(np.uint8)
        ip1, lp1 = tmp_path / "a.idx", tmp_path / "b.idx"
        save_idx(images, labels, ip1, lp1)
        data = load_idx(ip1, lp1)
        ip2, lp2 = tmp_path / "c.idx", tmp_path / "d.idx"
        save_idx((data.inputs * 255.0).round().astype(np.uint8).reshape(7, 3, 3),
                 data.labels.astype(np.uint8), ip2, lp2)
        assert ip1.read_bytes() == ip2.read_bytes()
        assert lp1.read_bytes() == lp2.read_bytes()


class TestSplit:
    def test_even_split(self):
        data = gaussian_blobs(c=2, d=2, n_per_class=5, radius=1.0, std=0.1, seed=6)
        tr, te = split(data, SplitSpec(train_fraction=0.5, seed=0))
        assert tr.n_samples == 5
        assert te.n_samples == 5

    def test_union_is_permutation_of_input(self):
        data = gaussian_blobs(c=2, d=3, n_per_class=10, radius=1.0, std=0.3, seed=7)
        tr, te = split(data, SplitSpec(train_fraction=0.7, seed=1))
        merged = np.vstack([tr.inputs, te.inputs])
        assert merged.shape == data.inputs.shape
        order_a = np.lexsort(merged.T)
        order_b = np.lexsort(data.inputs.T)
        assert np.array_equal(merged[order_a], data.inputs[order_b])

    def test_same_seed_same_split(self):
        data = gaussian_blobs(c=2, d=2, n_per_class=10, radius=1.0, std=0.3, seed=8)
        a_tr, _ = split(data, SplitSpec(train_fraction=0.6, seed=2))
        b_tr, _ = split(data, SplitSpec(train_fraction=0.6, seed=2))
        assert np.array_equal(a_tr.inputs, b_tr.inputs)

    def test_empty_side_rejected(self):
        data = gaussian_blobs(c=2, d=2, n_per_class=1, radius=1.0, std=0.1, seed=9)
        with pytest.raises(ValueError, match="empty"):
            split(data, SplitSpec(train_fraction=0.01, seed=0))

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            SplitSpec(train_fraction=1.0, seed=0)


class TestCsv:
    def test_round_trip(self, tmp_path):
        data = gaussian_blobs(c=3, d=4, n_per_class=6, radius=2.0, std=0.5, seed=11)
        path = tmp_path / "data.csv"
        save_csv(data, path)
        head = path.read_text().split("\n")[0]
        assert head == "label,x0,x1,x2,x3"
        loaded = load_csv(path)
        assert np.array_equal(loaded.inputs, data.inputs)
        assert np.array_equal(loaded.labels, data.labels)


class TestSpecParsing:
    def test_blobs_spec(self):
        data = parse_data_spec("blobs:classes=3,dim=2,n=4,radius=1.0,std=0.1,seed=5")
        assert data.n_samples == 12

    def test_ring_spec(self):
        data = parse_data_spec("ring:dim=2,n=7,inner=3.0,seed=1")
        assert data.n_samples == 7

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown data kind"):
            parse_data_spec("cifar:whatever=1")
