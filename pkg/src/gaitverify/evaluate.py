"""Verification protocols, ROC-AUC / EER metrics, and score aggregation.

Scores follow the convention "higher = more genuine". AUC and EER are
returned as fractions; the CLI converts to percent for display.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import ocsvm
from .errors import InvalidInputError

PROTOCOL_KINDS = ("same_day_s1", "same_day_s2", "cross_day")
_PROTOCOL_ALIASES = {"sd1": "same_day_s1", "sd2": "same_day_s2", "cd": "cross_day"}

TRAIN_FRACTION = 2.0 / 3.0


def normalize_protocol(kind: str) -> str:
    kind = _PROTOCOL_ALIASES.get(kind, kind)
    if kind not in PROTOCOL_KINDS:
        raise InvalidInputError(f"unknown protocol {kind!r}")
    return kind


@dataclass(frozen=True)
class ProtocolSpec:
    kind: str
    aggregation_window: int = 1
    train_fraction: float = TRAIN_FRACTION

    def __post_init__(self):
        object.__setattr__(self, "kind", normalize_protocol(self.kind))
        if not 1 <= self.aggregation_window <= 5:
            raise InvalidInputError(
                f"aggregation_window must be in 1..5, got {self.aggregation_window}")


@dataclass
class Scorecard:
    user_id: str
    genuine_scores: list[float]
    impostor_scores: list[float]


@dataclass
class UserResult:
    user_id: str
    auc: float
    eer: float
    n_genuine: int
    n_impostor: int


@dataclass
class EvalReport:
    protocol: str
    feature_kind: str
    window: int
    users: list[UserResult]
    mean_auc: float
    stdev_auc: float
    mean_eer: float
    stdev_eer: float
    augmentation: str = "none"
    warnings: list[str] = field(default_factory=list)


def _validated(genuine, impostor):
    g = np.asarray(genuine, dtype=np.float64)
    i = np.asarray(impostor, dtype=np.float64)
    if g.size == 0 or i.size == 0:
        raise InvalidInputError("genuine and impostor score lists must be non-empty")
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(i))):
        raise InvalidInputError("scores must be finite")
    return g, i


def roc_auc(genuine, impostor) -> float:
    """P(random genuine > random impostor), ties counted 1/2 (Mann-Whitney)."""
    g, i = _validated(genuine, impostor)
    ranks = rankdata(np.concatenate([g, i]))
    u = ranks[:g.size].sum() - g.size * (g.size + 1) / 2.0
    return float(u / (g.size * i.size))


def _far_frr(genuine, impostor, thresholds):
    """FAR = fraction of impostor >= t, FRR = fraction of genuine < t."""
    gs = np.sort(genuine)
    im = np.sort(impostor)
    far = (im.size - np.searchsorted(im, thresholds, side="left")) / im.size
    frr = np.searchsorted(gs, thresholds, side="left") / gs.size
    return far, frr


def eer(genuine, impostor) -> float:
    """Equal error rate from a sweep over the union of observed scores.

    FAR - FRR is non-increasing in the threshold; the EER is read at the
    threshold minimizing |FAR - FRR|, linearly interpolating between the
    two bracketing thresholds when the difference changes sign strictly.
    """
    g, i = _validated(genuine, impostor)
    thresholds = np.unique(np.concatenate([g, i]))
    far, frr = _far_frr(g, i, thresholds)
    diff = far - frr
    cross = np.flatnonzero((diff[:-1] > 0) & (diff[1:] < 0))
    if cross.size:
        k = int(cross[0])
        lam = diff[k] / (diff[k] - diff[k + 1])
        lo = (far[k] + frr[k]) / 2.0
        hi = (far[k + 1] + frr[k + 1]) / 2.0
        return float((1.0 - lam) * lo + lam * hi)
    k = int(np.argmin(np.abs(diff)))
    return float((far[k] + frr[k]) / 2.0)


def aggregate_scores(scored, window: int) -> list[float]:
    """Means over consecutive non-overlapping windows; trailing partial dropped.

    The input must be the score stream of a single recording, ordered by
    frame index. window=1 is the identity.
    """
    if window < 1:
        raise InvalidInputError(f"window must be >= 1, got {window}")
    values = [s.value if isinstance(s, ocsvm.DecisionScore) else float(s) for s in scored]
    n_windows = len(values) // window
    return [float(np.mean(values[w * window:(w + 1) * window])) for w in range(n_windows)]


def summarize(per_user) -> dict[str, float]:
    """Arithmetic mean and population stdev of per-user AUC/EER."""
    if not per_user:
        raise InvalidInputError("cannot summarize an empty result list")
    aucs = np.asarray([u.auc if isinstance(u, UserResult) else u["auc"] for u in per_user])
    eers = np.asarray([u.eer if isinstance(u, UserResult) else u["eer"] for u in per_user])
    return {
        "mean_auc": float(aucs.mean()),
        "stdev_auc": float(aucs.std()),
        "mean_eer": float(eers.mean()),
        "stdev_eer": float(eers.std()),
    }


class FeatureTable:
    """Feature vectors indexed by (user, session, recording); deterministic order."""

    def __init__(self, sources, vectors: np.ndarray):
        if len(sources) != vectors.shape[0]:
            raise InvalidInputError("sources and vectors length mismatch")
        self.vectors = np.asarray(vectors, dtype=np.float64)
        # user -> session -> recording -> row indices ordered by frame index
        self.index: dict[str, dict[str, dict[str, list[int]]]] = {}
        order = sorted(range(len(sources)), key=lambda r: sources[r][3])
        for r in range(len(sources)):
            subject, session, recording, _ = sources[r]
            self.index.setdefault(subject, {}).setdefault(session, {}).setdefault(recording, [])
        for r in order:
            subject, session, recording, _ = sources[r]
            self.index[subject][session][recording].append(r)

    @property
    def users(self) -> list[str]:
        return list(self.index)

    def sessions_of(self, user: str) -> list[str]:
        return list(self.index[user])

    def recordings(self, user: str, session: str) -> dict[str, list[int]]:
        return self.index.get(user, {}).get(session, {})

    def session_rows(self, user: str, session: str) -> list[int]:
        return [r for rows in self.recordings(user, session).values() for r in rows]


def _worker_count() -> int:
    raw = os.environ.get("GAITVERIFY_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _score_streams(model, table: FeatureTable, user: str, session: str,
                   window: int, rows_override: dict[str, list[int]] | None = None):
    """Aggregated score list over one user-session, window applied per recording."""
    out = []
    recs = rows_override if rows_override is not None else table.recordings(user, session)
    for rows in recs.values():
        if not rows:
            continue
        stream = ocsvm.scores(model, table.vectors[rows])
        out.extend(aggregate_scores(stream, window))
    return out


def run_protocol(sources, vectors, spec: ProtocolSpec, nu: float = ocsvm.DEFAULT_NU,
                 gamma="auto", feature_kind: str = "unknown",
                 augmentation: str = "none") -> EvalReport:
    """Train per-user one-class models and score genuine/impostor streams.

    Same-day: the first 2/3 of the user's session frames (recording order)
    train the model, the rest are genuine; all frames of all other users
    in that session are impostor. Cross-day: all session-1 frames train,
    the user's session-2 frames are genuine, everyone else's session-2
    frames are impostor. Aggregation treats genuine and impostor streams
    identically, windowed within each recording.
    """
    table = FeatureTable(sources, vectors)
    warnings: list[str] = []

    if spec.kind == "cross_day":
        train_session, test_session = "1", "2"
        users = [u for u in table.users if table.session_rows(u, test_session)]
        if not any(table.session_rows(u, train_session) for u in table.users):
            raise InvalidInputError("cross-day protocol needs session 1 data")
        if not users:
            raise InvalidInputError("cross-day protocol needs session 2 data")
    else:
        session = "1" if spec.kind == "same_day_s1" else "2"
        train_session = test_session = session
        users = [u for u in table.users if table.session_rows(u, session)]
        if not users:
            raise InvalidInputError(f"no users have session {session} data")

    def evaluate_user(user: str):
        if spec.kind == "cross_day":
            train_rows = table.session_rows(user, train_session)
            if len(train_rows) < 2:
                return None, f"user {user}: fewer than 2 session-{train_session} frames, skipped"
            genuine_recs = table.recordings(user, test_session)
        else:
            recs = table.recordings(user, test_session)
            all_rows = [r for rows in recs.values() for r in rows]
            if len(all_rows) < 3:
                return None, f"user {user}: fewer than 3 session-{test_session} frames, skipped"
            n_train = int(len(all_rows) * spec.train_fraction)
            train_rows = all_rows[:n_train]
            test_set = set(all_rows[n_train:])
            genuine_recs = {rec: [r for r in rows if r in test_set]
                            for rec, rows in recs.items()}
        model = ocsvm.train_ocsvm(table.vectors[train_rows], nu=nu, gamma=gamma)
        genuine = _score_streams(model, table, user, test_session, spec.aggregation_window,
                                 rows_override=genuine_recs)
        impostor = []
        for other in users:
            if other == user:
                continue
            impostor.extend(_score_streams(model, table, other, test_session,
                                           spec.aggregation_window))
        if not genuine or not impostor:
            return None, (f"user {user}: empty genuine or impostor stream after "
                          f"aggregation window {spec.aggregation_window}, skipped")
        return UserResult(user, roc_auc(genuine, impostor), eer(genuine, impostor),
                          len(genuine), len(impostor)), None

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(evaluate_user, users))
    else:
        outcomes = [evaluate_user(u) for u in users]

    results = [r for r, _ in outcomes if r is not None]
    warnings.extend(w for _, w in outcomes if w is not None)
    if not results:
        raise InvalidInputError(
            "no user could be evaluated: " + "; ".join(warnings or ["no data"]))
    stats = summarize(results)
    return EvalReport(
        protocol=spec.kind, feature_kind=feature_kind, window=spec.aggregation_window,
        users=results, augmentation=augmentation, warnings=warnings, **stats)


# --- report output ------------------------------------------------------

def write_report_csv(report: EvalReport, path) -> None:
    """Per-user rows plus one __summary__ footer row with mean (stdev)."""
    with open(path, "w", newline="") as fh:
        fh.write("user_id,auc,eer\n")
        for u in report.users:
            fh.write(f"{u.user_id},{u.auc:.10g},{u.eer:.10g}\n")
        fh.write(f"__summary__,{report.mean_auc:.10g} ({report.stdev_auc:.10g}),"
                 f"{report.mean_eer:.10g} ({report.stdev_eer:.10g})\n")


def format_summary(reports: list[EvalReport]) -> str:
    """Table-style text summary, AUC/EER in percent: '95.27 (7.66)'."""
    rows = [("features", "augmentation", "protocol", "window",
             "avg_auc[%]", "avg_eer[%]", "users")]
    for r in reports:
        rows.append((
            r.feature_kind, r.augmentation, r.protocol, str(r.window),
            f"{100 * r.mean_auc:.2f} ({100 * r.stdev_auc:.2f})",
            f"{100 * r.mean_eer:.2f} ({100 * r.stdev_eer:.2f})",
            str(len(r.users)),
        ))
    widths = [max(len(row[c]) for row in rows) for c in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in rows]
    return "\n".join(lines) + "\n"
