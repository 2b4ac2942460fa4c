"""Trajectory data model: ingestion, normalization, windowing and a
synthetic quasi-periodic corpus generator.

A trajectory is a (frames, dims) float64 array with a fixed step time.
Windows are (dims, H) segments whose columns run oldest to newest, so the
last column is the frame the window is anchored at.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Default 27-dim state layout: index ranges per named group.
STATE_LAYOUT_27 = {
    "base_linear_velocity": (0, 3),
    "base_angular_velocity": (3, 6),
    "projected_gravity": (6, 9),
    "joint_positions": (9, 27),
}

# Coarser grouping used by evaluation reports.
EVAL_GROUPS_27 = {
    "velocities": (0, 6),
    "gravity": (6, 9),
    "joints": (9, 27),
}

DEFAULT_DT = 0.02


@dataclass
class Trajectory:
    frames: np.ndarray  # (n_frames, d)
    dt: float = DEFAULT_DT
    label: str | None = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise ValueError(f"frames must be (n, d), got shape {self.frames.shape}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("trajectory contains non-finite values")

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def dims(self) -> int:
        return self.frames.shape[1]


def load_csv(path: str | Path, d: int, dt: float = DEFAULT_DT,
             has_header: bool = False, label: str | None = None,
             min_frames: int | None = None) -> Trajectory:
    """Read one frame per row, ``d`` comma-separated columns.

    Rejects ragged rows and non-finite cells with the offending row index;
    warns (but still loads) when fewer than ``min_frames`` rows are present.
    """
    path = Path(path)
    rows: list[list[float]] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for idx, row in enumerate(reader):
            if has_header and idx == 0:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != d:
                raise ValueError(f"{path}: row {idx} has {len(row)} columns, expected {d}")
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise ValueError(f"{path}: row {idx} has a non-numeric cell") from exc
            if not all(np.isfinite(values)):
                raise ValueError(f"{path}: row {idx} contains a non-finite value")
            rows.append(values)
    if min_frames is not None and len(rows) < min_frames:
        warnings.warn(f"{path}: only {len(rows)} frames, shorter than a window "
                      f"of {min_frames}; trajectory is unwindowable")
    return Trajectory(np.array(rows, dtype=np.float64).reshape(len(rows), d), dt=dt, label=label)


def save_csv(path: str | Path, trajectory: Trajectory) -> None:
    np.savetxt(path, trajectory.frames, delimiter=",", fmt="%.17g")


@dataclass
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, frames: np.ndarray) -> np.ndarray:
        return (np.asarray(frames, dtype=np.float64) - self.mean) / self.std

    def invert(self, frames: np.ndarray) -> np.ndarray:
        return np.asarray(frames, dtype=np.float64) * self.std + self.mean

    def apply_segment(self, segment: np.ndarray) -> np.ndarray:
        # segment axes are (..., d, H); stats broadcast over the last axis
        return (segment - self.mean[:, None]) / self.std[:, None]

    def invert_segment(self, segment: np.ndarray) -> np.ndarray:
        return segment * self.std[:, None] + self.mean[:, None]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "NormalizationStats":
        return cls(np.asarray(data["mean"], dtype=np.float64),
                   np.asarray(data["std"], dtype=np.float64))


def fit_normalization(trajectories: list[Trajectory]) -> NormalizationStats:
    """Per-dimension z-score statistics pooled over all frames.

    Dimensions whose raw standard deviation is below 1e-6 get std = 1 so
    that constant channels normalize to zero instead of blowing up.
    """
    if not trajectories:
        raise ValueError("empty corpus")
    stacked = np.concatenate([t.frames for t in trajectories], axis=0)
    if stacked.shape[0] < 2:
        raise ValueError("need at least two frames to fit normalization")
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    std = np.where(std < 1e-6, 1.0, std)
    return NormalizationStats(mean, std)


def segment_view(frames: np.ndarray, window: int) -> np.ndarray:
    """All length-``window`` segments of ``frames`` as a zero-copy view.

    Shape (n_frames - window + 1, d, window); entry k covers frames
    [k, k + window) with columns ordered oldest to newest.
    """
    if frames.shape[0] < window:
        raise ValueError(f"trajectory of {frames.shape[0]} frames is shorter than "
                         f"window {window}")
    return np.lib.stride_tricks.sliding_window_view(frames, window, axis=0)


def window(trajectory: Trajectory, window_len: int, stride: int = 1
           ) -> tuple[np.ndarray, np.ndarray]:
    """Sliding segments and the frame index each one is anchored at.

    Returns (segments (n, d, H), anchor frame indices (n,)); segment k covers
    frames [k*stride, k*stride + H) and is anchored at its newest frame.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    view = segment_view(trajectory.frames, window_len)
    starts = np.arange(0, view.shape[0], stride)
    return view[starts].copy(), starts + window_len - 1


def window_with_future(trajectory: Trajectory, window_len: int, horizon: int
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Training items: each anchor segment with its ``horizon`` successors.

    Returns (items (n, horizon+1, d, H), anchor frame indices (n,)); item k,
    slot i is the segment ending at frame k + H - 1 + i.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if len(trajectory) < window_len + horizon:
        raise ValueError(f"trajectory of {len(trajectory)} frames cannot supply "
                         f"window {window_len} plus horizon {horizon}")
    view = segment_view(trajectory.frames, window_len)
    n = len(trajectory) - window_len - horizon + 1
    starts = np.arange(n)[:, None] + np.arange(horizon + 1)[None, :]
    return view[starts], np.arange(n) + window_len - 1


@dataclass
class SyntheticMotionSpec:
    """Parameter family for one synthetic quasi-periodic motion type."""

    base_frequency: float                 # Hz
    amplitudes: np.ndarray                # (d,) fundamental amplitude per dim
    phase_offsets: np.ndarray             # (d,) cycles
    means: np.ndarray                     # (d,)
    harmonics: list[float] = field(default_factory=lambda: [1.0])  # relative amps
    noise_std: float = 0.0
    frames: int = 1000
    dt: float = DEFAULT_DT
    seed: int = 0
    label: str | None = None

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.float64)
        self.phase_offsets = np.asarray(self.phase_offsets, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        if not 0.0 < self.base_frequency < 0.5 / self.dt:
            raise ValueError(f"base frequency {self.base_frequency} Hz outside "
                             f"(0, Nyquist={0.5 / self.dt} Hz)")
        if self.noise_std < 0:
            raise ValueError("noise std must be >= 0")

    @property
    def dims(self) -> int:
        return self.amplitudes.size

    def to_dict(self) -> dict:
        return {
            "base_frequency": self.base_frequency,
            "amplitudes": self.amplitudes.tolist(),
            "phase_offsets": self.phase_offsets.tolist(),
            "means": self.means.tolist(),
            "harmonics": list(self.harmonics),
            "noise_std": self.noise_std,
            "frames": self.frames,
            "dt": self.dt,
            "seed": self.seed,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticMotionSpec":
        return cls(**data)


def generate_synthetic(spec: SyntheticMotionSpec) -> Trajectory:
    """dim j, frame t: mean_j + sum_h amp_j*rel_h*sin(2*pi*(h*f*t*dt + off_j)) + noise."""
    t = np.arange(spec.frames)[:, None]  # (frames, 1)
    signal = np.broadcast_to(spec.means, (spec.frames, spec.dims)).copy()
    for h, rel in enumerate(spec.harmonics, start=1):
        phase = h * spec.base_frequency * t * spec.dt + spec.phase_offsets[None, :]
        signal += spec.amplitudes[None, :] * rel * np.sin(2.0 * np.pi * phase)
    if spec.noise_std > 0:
        rng = np.random.default_rng(spec.seed)
        signal = signal + rng.normal(scale=spec.noise_std, size=signal.shape)
    return Trajectory(signal, dt=spec.dt, label=spec.label)


def split_corpus(trajectories: list[Trajectory], train_fraction: float = 0.8,
                 seed: int = 0) -> tuple[list[Trajectory], list[Trajectory]]:
    """Split at trajectory granularity so validation windows never overlap
    training windows. Keeps at least one trajectory on the training side."""
    if not trajectories:
        raise ValueError("empty corpus")
    order = np.random.default_rng(seed).permutation(len(trajectories))
    n_train = max(1, int(round(train_fraction * len(trajectories))))
    train = [trajectories[i] for i in order[:n_train]]
    val = [trajectories[i] for i in order[n_train:]]
    return train, val


def load_corpus(path: str | Path, dt: float | None = None) -> list[Trajectory]:
    """Load a corpus from a JSON document.

    Two layouts are accepted: a manifest listing CSV trajectory files
    ({"d": ..., "dt": ..., "trajectories": [{"path": ..., "label": ...}]},
    paths relative to the manifest) and a synthetic corpus
    ({"families": [<motion spec>, ...]}) generated deterministically.
    """
    path = Path(path)
    with path.open() as fh:
        doc = json.load(fh)
    if "families" in doc:
        return [generate_synthetic(SyntheticMotionSpec.from_dict(f)) for f in doc["families"]]
    if "trajectories" in doc:
        d = int(doc["d"])
        corpus_dt = float(doc.get("dt", dt or DEFAULT_DT))
        out = []
        for entry in doc["trajectories"]:
            csv_path = path.parent / entry["path"]
            out.append(load_csv(csv_path, d=d, dt=corpus_dt,
                                has_header=bool(entry.get("header", False)),
                                label=entry.get("label")))
        return out
    raise ValueError(f"{path}: expected a corpus manifest with 'trajectories' "
                     f"or a synthetic spec with 'families'")
