import numpy as np
import numpy.testing as npt
import pytest

from gaitverify.augment import add_uniform_noise, augment_dataset, circular_shift
from gaitverify.errors import InvalidInputError
from gaitverify.signal import Frame


def random_frame(seed=0):
    rng = np.random.default_rng(seed)
    return Frame(rng.standard_normal((128, 3)), ("s01", "1", "r1", 0))


def zero_frame():
    return Frame(np.zeros((128, 3)), ("s01", "1", "r1", 0))


class TestAddUniformNoise:
    def test_small_amplitude_limit(self):
        f = random_frame()
        out = add_uniform_noise(f, amplitude=1e-12, rng=np.random.default_rng(1))
        npt.assert_allclose(out.values, f.values, atol=1e-11)

    def test_deterministic_under_fixed_seed(self):
        a = add_uniform_noise(zero_frame(), rng=np.random.default_rng(42))
        b = add_uniform_noise(zero_frame(), rng=np.random.default_rng(42))
        npt.assert_array_equal(a.values, b.values)
        assert np.any(a.values != 0)

    def test_law_of_large_numbers(self):
        # 10k+ draws from Uniform(-0.2, 0.2): max |delta| <= 0.2, mean |delta| ~ 0.1
        rng = np.random.default_rng(3)
        deltas = []
        for _ in range(30):  # 30 * 384 = 11520 draws
            f = zero_frame()
            deltas.append(add_uniform_noise(f, amplitude=0.2, rng=rng).values)
        deltas = np.abs(np.concatenate([d.ravel() for d in deltas]))
        assert deltas.max() <= 0.2
        assert abs(deltas.mean() - 0.1) <= 0.01

    def test_mean_shift_bounded_by_amplitude(self):
        f = random_frame(5)
        out = add_uniform_noise(f, amplitude=0.2, rng=np.random.default_rng(6))
        shift = np.abs(out.values.mean(axis=0) - f.values.mean(axis=0))
        assert np.all(shift <= 0.2)

    def test_non_positive_amplitude(self):
        with pytest.raises(InvalidInputError):
            add_uniform_noise(random_frame(), amplitude=0.0)


class TestCircularShift:
    def test_paper_formula_on_short_pattern(self):
        # channel [1,2,3,4,5] with k=3 -> [3,4,5,1,2]; embed in a 128 frame
        base = np.arange(1.0, 129.0)
        f = Frame(np.stack([base] * 3, axis=1), ("s", "1", "r", 0))
        out = circular_shift(f, 3)
        npt.assert_array_equal(out.values[:3, 0], [3.0, 4.0, 5.0])
        npt.assert_array_equal(out.values[-2:, 0], [1.0, 2.0])

    def test_shift_composition_adds_offsets(self):
        f = random_frame(1)
        # k=2 twice shifts by 1+1 positions, same as k=3 once
        twice = circular_shift(circular_shift(f, 2), 2)
        npt.assert_array_equal(twice.values, circular_shift(f, 3).values)

    def test_multiset_and_moments_preserved(self):
        f = random_frame(2)
        out = circular_shift(f, 57)
        for c in range(3):
            npt.assert_array_equal(np.sort(out.values[:, c]), np.sort(f.values[:, c]))
        npt.assert_allclose(out.values.mean(axis=0), f.values.mean(axis=0), rtol=1e-12)
        npt.assert_allclose(out.values.std(axis=0), f.values.std(axis=0), rtol=1e-12)

    def test_same_k_for_all_channels(self):
        f = random_frame(3)
        out = circular_shift(f, 10)
        npt.assert_array_equal(out.values, np.roll(f.values, -9, axis=0))

    @pytest.mark.parametrize("k", range(2, 128))
    def test_never_identity_for_valid_k(self, k):
        f = random_frame(4)
        assert np.any(circular_shift(f, k).values != f.values)

    @pytest.mark.parametrize("k", [0, 1, 128, 129, -3])
    def test_invalid_k(self, k):
        with pytest.raises(InvalidInputError):
            circular_shift(random_frame(), k)


class TestAugmentDataset:
    def test_doubles_and_keeps_originals_first(self):
        frames = [random_frame(i) for i in range(100)]
        out = augment_dataset(frames, "cshift", np.random.default_rng(0))
        assert len(out) == 200
        for orig, kept in zip(frames, out[:100]):
            npt.assert_array_equal(kept.values, orig.values)
        for orig, aug in zip(frames, out[100:]):
            assert np.any(aug.values != orig.values)
            assert aug.source == orig.source

    def test_empty_input(self):
        assert augment_dataset([], "rnd", np.random.default_rng(0)) == []

    def test_deterministic_under_seed(self):
        frames = [random_frame(i) for i in range(10)]
        a = augment_dataset(frames, "rnd", np.random.default_rng(5))
        b = augment_dataset(frames, "rnd", np.random.default_rng(5))
        for fa, fb in zip(a, b):
            npt.assert_array_equal(fa.values, fb.values)

    def test_noise_kind_draws_fresh_field_per_frame(self):
        frames = [zero_frame(), zero_frame()]
        out = augment_dataset(frames, "random_noise", np.random.default_rng(9))
        assert np.any(out[2].values != out[3].values)

    def test_kind_none_rejected(self):
        with pytest.raises(InvalidInputError):
            augment_dataset([random_frame()], "none", np.random.default_rng(0))
