"""Synthetic lifting-trial generator and the on-disk dataset format.

The original laboratory recordings are not public, so a controllable stand-in
with the same shape and class imbalance is generated instead: 10 subjects x
12 zones x 6 trials at 25 Hz.  Each trial is baseline Gaussian noise plus two windowed
sinusoid bursts (one near lift start, one near the return to upright) whose
amplitude, spacing, and back/wrist sensor emphasis all grow with risk class.
Burst frequencies stay inside the 2-12 Hz analysis band so bandpass filtering
keeps the discriminative signal.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ChannelCountMismatchError, DataError, MalformedRowError, MissingTrialFileError
from .signals import N_AXES, N_CHANNELS, N_SENSORS, TrialRecording

RISK_CLASSES = ("low", "medium", "high")

# ACGIH lifting zones grouped into relative risk levels.
ZONE_RISK = {
    4: "low", 5: "low",
    6: "medium", 7: "medium", 8: "medium", 9: "medium",
    1: "high", 2: "high", 3: "high", 10: "high", 11: "high", 12: "high",
}

SPLIT_VALUES = ("train", "test", "unassigned")


@dataclass(frozen=True)
class RiskLabel:
    value: str
    source_zone: int

    @property
    def index(self) -> int:
        return RISK_CLASSES.index(self.value)


def zone_to_risk(zone: int) -> RiskLabel:
    if zone not in ZONE_RISK:
        raise ValueError(f"zone must be in [1, 12], got {zone}")
    return RiskLabel(value=ZONE_RISK[zone], source_zone=zone)


@dataclass
class DatasetProfile:
    """Shape of the generated dataset; defaults mirror the original collection."""

    n_subjects: int = 10
    trials_per_zone_per_subject: int = 6
    zones: int = 12
    sample_rate_hz: float = 25.0
    max_seconds: float = 30.0
    duration_low_s: float = 10.0
    duration_high_s: float = 15.0
    seed: int = 42

    @property
    def n_trials(self) -> int:
        return self.n_subjects * self.zones * self.trials_per_zone_per_subject

    def class_counts(self) -> dict[str, int]:
        per_zone = self.n_subjects * self.trials_per_zone_per_subject
        counts = dict.fromkeys(RISK_CLASSES, 0)
        for zone in range(1, self.zones + 1):
            counts[ZONE_RISK[zone]] += per_zone
        return counts


def desk_profile(seed: int = 42) -> DatasetProfile:
    """Short-trial profile for fast runs: every lift fits in 250 frames."""
    return DatasetProfile(max_seconds=10.0, duration_low_s=8.0, duration_high_s=10.0, seed=seed)


@dataclass
class GeneratorParams:
    """Signal-shape knobs; class separation must stay strict with margin.

    Every sensor moves (base_activity), but the class-dependent amplitude
    ramp enters through the per-sensor emphasis, so back and wrist channels
    carry almost all of the class signal while side/arm/thigh channels stay
    active yet nearly uninformative.  Per-channel standardization preserves
    within-channel class contrast, so this structure survives preprocessing.
    """

    noise_sd: float = 0.25
    base_amplitude: float = 1.0
    base_activity: float = 0.6
    class_ramp: tuple[float, float, float] = (0.4, 1.7, 3.6)  # low, medium, high
    burst_freq_low_hz: float = 3.0
    burst_freq_high_hz: float = 9.0
    burst_seconds: float = 1.6
    back_emphasis: float = 1.2
    wrist_emphasis: float = 0.75
    other_emphasis: float = 0.05
    subject_gain_jitter: float = 0.18
    subject_offset_jitter_s: float = 0.4


# Sensor index groups (pairs of accel/gyro per placement).
BACK_SENSORS = (6, 7)
WRIST_SENSORS = (2, 3, 4, 5)


def _sensor_gains(g: GeneratorParams, class_idx: int) -> np.ndarray:
    emphasis = np.full(N_SENSORS, g.other_emphasis)
    emphasis[list(WRIST_SENSORS)] = g.wrist_emphasis
    emphasis[list(BACK_SENSORS)] = g.back_emphasis
    return g.base_activity + emphasis * g.class_ramp[class_idx]


@dataclass
class ManifestEntry:
    trial_file: str
    subject_id: int
    zone: int
    trial_index: int
    frame_count: int
    split: str = "unassigned"


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def __post_init__(self):
        paths = [e.trial_file for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest trial_file paths must be unique")
        for e in self.entries:
            if not 1 <= e.zone <= 12:
                raise ValueError(f"manifest zone out of range: {e.zone}")
            if e.split not in SPLIT_VALUES:
                raise ValueError(f"bad split value {e.split!r}")


def generate_dataset(p: DatasetProfile, g: GeneratorParams | None = None,
                     ) -> tuple[list[TrialRecording], Manifest]:
    """Deterministic synthetic dataset; one RNG stream seeded from the profile."""
    g = g or GeneratorParams()
    rng = np.random.default_rng(p.seed)
    fs = p.sample_rate_hz

    subject_gain = 1.0 + rng.uniform(-g.subject_gain_jitter, g.subject_gain_jitter, size=p.n_subjects)
    subject_offset = rng.uniform(-g.subject_offset_jitter_s, g.subject_offset_jitter_s, size=p.n_subjects)

    trials: list[TrialRecording] = []
    entries: list[ManifestEntry] = []
    for subject in range(p.n_subjects):
        for zone in range(1, p.zones + 1):
            label = zone_to_risk(zone)
            for idx in range(p.trials_per_zone_per_subject):
                duration = rng.uniform(p.duration_low_s, p.duration_high_s)
                n_frames = int(round(duration * fs))
                channels = rng.normal(0.0, g.noise_sd, size=(N_CHANNELS, n_frames))
                _add_lift_events(channels, rng, g, label.index, fs, duration,
                                 subject_gain[subject], subject_offset[subject])
                trials.append(TrialRecording(subject_id=subject, zone=zone, trial_index=idx,
                                             channels=channels, sample_rate_hz=fs))
                entries.append(ManifestEntry(
                    trial_file=f"trials/trial_{subject}_{zone}_{idx}.csv",
                    subject_id=subject, zone=zone, trial_index=idx, frame_count=n_frames))
    return trials, Manifest(entries=entries)


def _add_lift_events(channels: np.ndarray, rng: np.random.Generator, g: GeneratorParams,
                     class_idx: int, fs: float, duration: float,
                     subj_gain: float, subj_offset: float) -> None:
    """Two Hann-windowed sinusoid packets per trial.

    The first burst sits near lift start, the second near the return to
    upright; the gap between them widens (weakly) with risk class, and the
    burst positions jitter widely per trial.
    """
    amp = g.base_amplitude * subj_gain
    gains = _sensor_gains(g, class_idx)
    t_first = duration * rng.uniform(0.12, 0.30) + subj_offset * 0.3
    gap = duration * (0.33 + 0.03 * class_idx + rng.uniform(-0.03, 0.03))
    centers = (t_first, t_first + gap)
    half = g.burst_seconds / 2.0
    t = np.arange(channels.shape[1]) / fs
    for center in centers:
        center = float(np.clip(center, half, duration - half))
        window = np.clip((t - (center - half)) / g.burst_seconds, 0.0, 1.0)
        hann = 0.5 - 0.5 * np.cos(2.0 * np.pi * window)
        hann[(t < center - half) | (t > center + half)] = 0.0
        for sensor in range(N_SENSORS):
            for axis in range(N_AXES):
                freq = rng.uniform(g.burst_freq_low_hz, g.burst_freq_high_hz)
                phase = rng.uniform(0.0, 2.0 * np.pi)
                axis_gain = rng.uniform(0.6, 1.0)
                channels[3 * sensor + axis] += (
                    amp * gains[sensor] * axis_gain * hann * np.sin(2.0 * np.pi * freq * t + phase)
                )


def split_dataset(m: Manifest, train_fraction: float = 0.75, seed: int = 42) -> Manifest:
    """Random partition without replacement: round(n*fraction) train, rest test."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    n = len(m.entries)
    n_train = int(round(n * train_fraction))
    perm = np.random.default_rng(seed).permutation(n)
    train_ids = set(perm[:n_train].tolist())
    entries = [replace(e, split="train" if i in train_ids else "test")
               for i, e in enumerate(m.entries)]
    return Manifest(entries=entries)


TRIAL_HEADER = ["frame"] + [f"s{s}{a}" for s in range(N_SENSORS) for a in "xyz"]
MANIFEST_HEADER = ["trial_file", "subject_id", "zone", "trial_index", "frame_count", "split"]


def save_dataset(directory, trials: list[TrialRecording], manifest: Manifest) -> None:
    directory = Path(directory)
    (directory / "trials").mkdir(parents=True, exist_ok=True)
    if len(trials) != len(manifest.entries):
        raise ValueError("trial list and manifest lengths differ")
    with open(directory / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MANIFEST_HEADER)
        for e in manifest.entries:
            w.writerow([e.trial_file, e.subject_id, e.zone, e.trial_index, e.frame_count, e.split])
    for trial, entry in zip(trials, manifest.entries):
        path = directory / entry.trial_file
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRIAL_HEADER)
            for frame in range(trial.n_frames):
                w.writerow([frame] + [repr(float(v)) for v in trial.channels[:, frame]])


def _csv_rows(fh):
    """(lineno, row) pairs, skipping '#' comment lines."""
    for lineno, row in enumerate(csv.reader(fh), start=1):
        if row and row[0].lstrip().startswith("#"):
            continue
        yield lineno, row


def load_dataset(directory) -> tuple[list[TrialRecording], Manifest]:
    directory = Path(directory)
    manifest_path = directory / "manifest.csv"
    if not manifest_path.exists():
        raise DataError(f"manifest not found: {manifest_path}", path=str(manifest_path))
    entries: list[ManifestEntry] = []
    with open(manifest_path, newline="") as fh:
        rows = _csv_rows(fh)
        first = next(rows, None)
        if first is None or first[1] != MANIFEST_HEADER:
            raise DataError(f"bad manifest header in {manifest_path}",
                            path=str(manifest_path), line=1)
        for lineno, row in rows:
            if len(row) != len(MANIFEST_HEADER):
                raise MalformedRowError(
                    f"{manifest_path}:{lineno}: expected {len(MANIFEST_HEADER)} fields, "
                    f"got {len(row)}",
                    path=str(manifest_path), line=lineno)
            try:
                entries.append(ManifestEntry(
                    trial_file=row[0], subject_id=int(row[1]), zone=int(row[2]),
                    trial_index=int(row[3]), frame_count=int(row[4]), split=row[5]))
            except ValueError as exc:
                raise MalformedRowError(f"{manifest_path}:{lineno}: {exc}",
                                        path=str(manifest_path), line=lineno) from exc
    manifest = Manifest(entries=entries)
    trials = [_load_trial(directory / e.trial_file, e) for e in manifest.entries]
    return trials, manifest


def _load_trial(path: Path, entry: ManifestEntry) -> TrialRecording:
    if not path.exists():
        raise MissingTrialFileError(f"trial file missing: {path}", path=str(path))
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        data_rows = _csv_rows(fh)
        first = next(data_rows, None)
        if first is None or len(first[1]) != N_CHANNELS + 1:
            raise ChannelCountMismatchError(
                f"{path}:1: expected {N_CHANNELS + 1} columns in header, got "
                f"{0 if first is None else len(first[1])}",
                path=str(path), line=1)
        for lineno, row in data_rows:
            if len(row) != N_CHANNELS + 1:
                raise MalformedRowError(
                    f"{path}:{lineno}: expected {N_CHANNELS + 1} columns, got {len(row)}",
                    path=str(path), line=lineno)
            try:
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise MalformedRowError(f"{path}:{lineno}: {exc}", path=str(path), line=lineno) from exc
            if not all(map(math.isfinite, values)):
                raise MalformedRowError(f"{path}:{lineno}: non-finite sensor value",
                                        path=str(path), line=lineno)
            rows.append(values)
    if not rows:
        raise MalformedRowError(f"{path}: no data rows", path=str(path), line=2)
    channels = np.asarray(rows, dtype=np.float64).T
    return TrialRecording(subject_id=entry.subject_id, zone=entry.zone,
                          trial_index=entry.trial_index, channels=channels)
