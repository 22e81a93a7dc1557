import numpy as np
import numpy.testing as npt
import pytest

from gaitverify import models
from gaitverify.data.synthetic import SyntheticConfig, generate_synthetic
from gaitverify.errors import InvalidInputError
from gaitverify.evaluate import ProtocolSpec, run_protocol
from gaitverify.nn.training import TrainConfig, train
from gaitverify.pipeline import frames_from_recordings


def clustered_features(users, frames_per_user, separation, seed=0, session="1",
                       dim=8, recordings=1):
    """Per-user Gaussian clusters: separation 0 makes users indistinguishable."""
    rng = np.random.default_rng(seed)
    sources, rows = [], []
    for u in range(users):
        center = rng.standard_normal(dim) * separation
        per_rec = frames_per_user // recordings
        for r in range(recordings):
            for i in range(per_rec):
                sources.append((f"u{u}", session, f"r{r + 1}", i))
                rows.append(center + 0.3 * rng.standard_normal(dim))
    return sources, np.asarray(rows)


class TestSameDayProtocol:
    def test_separable_users_score_high(self):
        sources, vectors = clustered_features(4, 12, separation=4.0, seed=1)
        report = run_protocol(sources, vectors, ProtocolSpec("sd1"), feature_kind="test")
        assert report.mean_auc > 0.95
        assert report.mean_eer < 0.1
        assert len(report.users) == 4

    def test_indistinguishable_users_near_chance(self):
        sources, vectors = clustered_features(2, 60, separation=0.0, seed=2)
        report = run_protocol(sources, vectors, ProtocolSpec("sd1"))
        for user in report.users:
            assert abs(user.auc - 0.5) <= 0.1

    def test_split_counts_first_two_thirds_train(self):
        sources, vectors = clustered_features(3, 12, separation=2.0, seed=3)
        report = run_protocol(sources, vectors, ProtocolSpec("sd1"))
        for user in report.users:
            assert user.n_genuine == 4    # 12 - floor(12 * 2/3)
            assert user.n_impostor == 24  # both other users contribute all 12

    def test_aggregation_window_counts_per_recording(self):
        # 12 frames in 2 recordings of 6; train takes r1 fully + 2 of r2,
        # genuine = last 4 of r2 -> floor(4/3) = 1 score at window 3;
        # impostors contribute floor(6/3) * 2 recordings each
        sources, vectors = clustered_features(3, 12, separation=2.0, seed=4, recordings=2)
        report = run_protocol(sources, vectors, ProtocolSpec("sd1", aggregation_window=3))
        for user in report.users:
            assert user.n_genuine == 1
            assert user.n_impostor == 4

    def test_deterministic(self):
        sources, vectors = clustered_features(3, 9, separation=1.0, seed=5)
        a = run_protocol(sources, vectors, ProtocolSpec("sd1"))
        b = run_protocol(sources, vectors, ProtocolSpec("sd1"))
        assert [(u.user_id, u.auc, u.eer) for u in a.users] == \
               [(u.user_id, u.auc, u.eer) for u in b.users]

    def test_short_user_skipped_with_warning(self):
        sources, vectors = clustered_features(3, 9, separation=1.0, seed=6)
        sources += [("tiny", "1", "r1", 0), ("tiny", "1", "r1", 1)]
        vectors = np.vstack([vectors, np.zeros((2, vectors.shape[1]))])
        report = run_protocol(sources, vectors, ProtocolSpec("sd1"))
        assert len(report.users) == 3
        assert any("tiny" in w for w in report.warnings)

    def test_sd2_uses_session_two(self):
        s1 = clustered_features(3, 9, separation=2.0, seed=7, session="1")
        s2 = clustered_features(3, 9, separation=2.0, seed=8, session="2")
        sources = s1[0] + s2[0]
        vectors = np.vstack([s1[1], s2[1]])
        report = run_protocol(sources, vectors, ProtocolSpec("sd2"))
        assert report.protocol == "same_day_s2"
        assert len(report.users) == 3

    def test_no_session_data_rejected(self):
        sources, vectors = clustered_features(2, 6, separation=1.0, seed=9, session="1")
        with pytest.raises(InvalidInputError):
            run_protocol(sources, vectors, ProtocolSpec("sd2"))


class TestCrossDayProtocol:
    def build(self, drift, seed=10):
        rng = np.random.default_rng(seed)
        sources, rows = [], []
        for u in range(3):
            center = rng.standard_normal(6) * 3.0
            for session in ("1", "2"):
                shifted = center + (drift if session == "2" else 0.0)
                for i in range(9):
                    sources.append((f"u{u}", session, "r1", i))
                    rows.append(shifted + 0.3 * rng.standard_normal(6))
        return sources, np.asarray(rows)

    def test_trains_on_session_one_tests_on_two(self):
        sources, vectors = self.build(drift=0.0)
        report = run_protocol(sources, vectors, ProtocolSpec("cd"))
        assert report.protocol == "cross_day"
        for user in report.users:
            assert user.n_genuine == 9
            assert user.n_impostor == 18

    def test_drift_degrades_cross_day(self):
        sources, vectors = self.build(drift=0.0, seed=11)
        clean = run_protocol(sources, vectors, ProtocolSpec("cd"))
        sources, vectors = self.build(drift=4.0, seed=11)
        drifted = run_protocol(sources, vectors, ProtocolSpec("cd"))
        assert drifted.mean_auc < clean.mean_auc

    def test_user_missing_session_one_skipped(self):
        sources, vectors = self.build(drift=0.0, seed=12)
        sources += [("new", "2", "r1", i) for i in range(4)]
        vectors = np.vstack([vectors, np.zeros((4, vectors.shape[1]))])
        report = run_protocol(sources, vectors, ProtocolSpec("cd"))
        assert {u.user_id for u in report.users} == {"u0", "u1", "u2"}
        assert any("new" in w for w in report.warnings)

    def test_single_session_rejected(self):
        sources, vectors = clustered_features(2, 6, separation=1.0, session="1")
        with pytest.raises(InvalidInputError):
            run_protocol(sources, vectors, ProtocolSpec("cd"))


class TestLearnedVersusRawTrend:
    def test_learned_features_beat_raw_on_disjoint_frequencies(self):
        # three users with well-separated gaits; a small supervised extractor
        # must order them better than raw concatenated frames
        config = SyntheticConfig(num_subjects=3, recording_seconds=45.0,
                                 sessions=1, seed=21)
        frames = frames_from_recordings(generate_synthetic(config))
        sources = [f.source for f in frames]
        raw = np.stack([models.raw_features(f) for f in frames])

        x = models.frames_to_array(frames)
        labels = np.array([int(f.subject_id[1:]) - 1 for f in frames])
        rng = np.random.default_rng(0)
        perm = rng.permutation(len(frames))
        n_train = int(len(frames) * 0.6)
        fcn = models.build_fcn(3, seed=0, filters=(16, 24, 16), kernels=(8, 5, 3))
        fcn, _ = train(fcn, (x[perm[:n_train]], labels[perm[:n_train]]),
                       (x[perm[n_train:]], labels[perm[n_train:]]),
                       TrainConfig(epochs=20, batch_size=16, seed=0))
        learned = models.strip_classifier(fcn).transform(x)

        spec = ProtocolSpec("sd1")
        auc_raw = run_protocol(sources, raw, spec, feature_kind="raw").mean_auc
        auc_learned = run_protocol(sources, learned, spec, feature_kind="ee").mean_auc
        assert auc_learned > auc_raw
