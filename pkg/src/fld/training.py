"""Training loops for the representation models and the evaluation suite
(prediction-error curves, latent manifold export, quasi-constancy report).

One training iteration samples a pool of mini_batches * batch_size items
and runs ``epochs`` passes of ``mini_batches`` optimizer steps over it; the
loss history records the per-iteration mean. PAE is FLD with the horizon
forced to zero and shares the code and RNG stream, so the two are
bit-identical when FLD is configured with horizon 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .checkpoint import ModelCheckpoint, build_model, checkpoint_from_model
from .model import FFBaseline, FFConfig, FLDConfig, FLDModel, VAEBaseline, VAEConfig
from .numerics import Adam
from .signals import (
    EVAL_GROUPS_27,
    NormalizationStats,
    Trajectory,
    fit_normalization,
    segment_view,
)
from .stats import pca_project_2d


@dataclass
class TrainConfig:
    max_iterations: int = 5000
    lr: float = 1e-4
    weight_decay: float = 5e-4
    epochs: int = 5
    mini_batches: int = 10
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        for name in ("max_iterations", "lr", "weight_decay", "epochs",
                     "mini_batches", "batch_size"):
            if getattr(self, name) < 0 or (name != "weight_decay" and getattr(self, name) == 0):
                raise ValueError(f"{name} must be positive")


@dataclass
class TrainResult:
    checkpoint: ModelCheckpoint
    history: dict[str, np.ndarray]


class _ItemPool:
    """Anchor index over normalized trajectories; gathers (B, N+1, d, H)
    batches of anchor-plus-future segments without materializing them all."""

    def __init__(self, frames_list: list[np.ndarray], window: int, horizon: int):
        self.horizon = horizon
        self.views = []
        anchors = []
        for ti, frames in enumerate(frames_list):
            if frames.shape[0] < window + horizon:
                continue
            view = segment_view(frames, window)
            self.views.append(view)
            vi = len(self.views) - 1
            n = view.shape[0] - horizon
            anchors.extend((vi, wi) for wi in range(n))
        if not anchors:
            raise ValueError(f"corpus has no trajectory long enough for window "
                             f"{window} plus horizon {horizon}")
        self.anchors = np.array(anchors, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.anchors)

    def gather(self, ids: np.ndarray) -> np.ndarray:
        picked = self.anchors[ids]
        first = self.views[picked[0, 0]]
        out = np.empty((len(ids), self.horizon + 1) + first.shape[1:])
        for row, (vi, wi) in enumerate(picked):
            out[row] = self.views[vi][wi:wi + self.horizon + 1]
        return out


def _default_model_config(model_kind: str, dims: int, dt: float):
    if model_kind in ("fld", "pae"):
        return FLDConfig(dims=dims, dt=dt)
    if model_kind == "vae":
        return VAEConfig(dims=dims, dt=dt)
    if model_kind == "ff":
        return FFConfig(dims=dims, dt=dt)
    raise ValueError(f"unknown model kind {model_kind!r}")


def train(model_kind: str, corpus: list[Trajectory], train_config: TrainConfig,
          model_config=None, normalization: NormalizationStats | None = None
          ) -> TrainResult:
    """Train one model kind on a corpus; deterministic given the seed.

    Returns the checkpoint plus a loss history with one row per iteration
    ("loss" for every kind; additionally "per_horizon" (N+1 columns) for
    fld/pae and "mse"/"kl" for vae).
    """
    if not corpus:
        raise ValueError("empty corpus")
    dims = corpus[0].dims
    dt = corpus[0].dt
    if model_config is None:
        model_config = _default_model_config(model_kind, dims, dt)
    if model_config.dims != dims:
        raise ValueError(f"model config dims {model_config.dims} != corpus dims {dims}")

    if model_kind == "pae":
        model_config = replace(model_config, horizon=0)

    rng = np.random.default_rng(train_config.seed)
    stats = normalization if normalization is not None else fit_normalization(corpus)
    frames = [stats.apply(t.frames) for t in corpus]

    if model_kind in ("fld", "pae"):
        model = FLDModel(model_config, rng)
        pool = _ItemPool(frames, model_config.window, model_config.horizon)
    elif model_kind == "vae":
        model = VAEBaseline(model_config, rng)
        pool = _ItemPool(frames, model_config.window, 0)
    elif model_kind == "ff":
        model = FFBaseline(model_config, rng)
        pool = _ItemPool(frames, model_config.window, 1)
    else:
        raise ValueError(f"unknown model kind {model_kind!r}")

    opt = Adam(model.parameters(), lr=train_config.lr,
               weight_decay=train_config.weight_decay)
    pool_size = train_config.mini_batches * train_config.batch_size

    losses = []
    extras: dict[str, list] = {}
    for iteration in range(train_config.max_iterations):
        pool_ids = rng.choice(len(pool), size=pool_size, replace=len(pool) < pool_size)
        iter_losses = []
        iter_extras: dict[str, list] = {}
        for _ in range(train_config.epochs):
            order = rng.permutation(pool_size)
            for chunk in np.array_split(order, train_config.mini_batches):
                items = pool.gather(pool_ids[chunk])
                opt.zero_grad()
                try:
                    if model_kind in ("fld", "pae"):
                        total, per_h = model.loss_and_grads(items, mode="train")
                        iter_extras.setdefault("per_horizon", []).append(per_h)
                    elif model_kind == "vae":
                        total, mse, kl = model.loss_and_grads(items[:, 0], rng=rng)
                        iter_extras.setdefault("mse", []).append(mse)
                        iter_extras.setdefault("kl", []).append(kl)
                    else:
                        total = model.loss_and_grads(items[:, 0], items[:, 1])
                except FloatingPointError as exc:
                    raise RuntimeError(
                        f"{model_kind} training diverged at iteration {iteration}: "
                        f"{exc}; lower the learning rate") from exc
                if not np.isfinite(total):
                    raise RuntimeError(
                        f"{model_kind} training diverged at iteration {iteration} "
                        f"(loss {total}); lower the learning rate")
                opt.step()
                iter_losses.append(total)
        losses.append(float(np.mean(iter_losses)))
        for key, vals in iter_extras.items():
            extras.setdefault(key, []).append(np.mean(vals, axis=0))

    history = {"loss": np.array(losses)}
    for key, vals in extras.items():
        history[key] = np.array(vals)
    ckpt = checkpoint_from_model(model, model_kind, stats,
                                 seed=train_config.seed,
                                 iteration=train_config.max_iterations)
    return TrainResult(checkpoint=ckpt, history=history)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def relative_error(pred: np.ndarray, target: np.ndarray,
                   rows: slice | None = None) -> np.ndarray:
    """||pred - target||_F / (||target||_F + 1e-8) over the trailing two axes,
    optionally restricted to a row range (dimension group)."""
    if rows is not None:
        pred = pred[..., rows, :]
        target = target[..., rows, :]
    num = np.sqrt(np.sum((pred - target) ** 2, axis=(-2, -1)))
    den = np.sqrt(np.sum(target ** 2, axis=(-2, -1)))
    return num / (den + 1e-8)


@dataclass
class EvaluationReport:
    horizons: np.ndarray
    errors: dict[str, np.ndarray]                      # model -> (n_horizons,)
    group_errors: dict[str, dict[str, np.ndarray]]     # model -> group -> (n_horizons,)
    anchor_count: int = 0
    definition: str = ("relative error: Frobenius norm of (prediction - target) "
                       "over (target norm + 1e-8), segments in normalized space, "
                       "averaged over anchors")


def evaluate_prediction(checkpoints: dict[str, ModelCheckpoint],
                        trajectory: Trajectory, horizons,
                        anchor_stride: int = 5,
                        groups: dict[str, tuple[int, int]] | None = None,
                        chunk: int = 64) -> EvaluationReport:
    """Per-horizon relative prediction error for each checkpoint on one
    held-out trajectory. Anchors are subsampled every ``anchor_stride``
    frames; predictions and targets are compared in normalized space."""
    horizons = np.asarray(sorted(int(h) for h in horizons))
    if horizons.size == 0 or horizons[0] < 0:
        raise ValueError("need at least one non-negative horizon")
    max_h = int(horizons[-1])
    errors: dict[str, np.ndarray] = {}
    group_errors: dict[str, dict[str, np.ndarray]] = {}
    n_anchor_out = 0
    for name, ckpt in checkpoints.items():
        model = build_model(ckpt)
        cfg = model.config
        if len(trajectory) < cfg.window + max_h:
            raise ValueError(f"trajectory of {len(trajectory)} frames too short for "
                             f"window {cfg.window} plus horizon {max_h}")
        if groups is None:
            grp = EVAL_GROUPS_27 if cfg.dims == 27 else {}
        else:
            grp = groups
        frames = ckpt.normalization.apply(trajectory.frames)
        view = segment_view(frames, cfg.window)
        anchor_ids = np.arange(0, view.shape[0] - max_h, anchor_stride)
        n_anchor_out = len(anchor_ids)
        acc = np.zeros(horizons.size)
        acc_group = {g: np.zeros(horizons.size) for g in grp}
        for start in range(0, len(anchor_ids), chunk):
            ids = anchor_ids[start:start + chunk]
            targets = view[ids[:, None] + horizons[None, :]]  # (b, n_h, d, H)
            if ckpt.model_kind in ("fld", "pae"):
                preds = model.predict(view[ids], horizons, mode="eval")
            elif ckpt.model_kind == "ff":
                preds = np.empty_like(targets)
                current = view[ids].copy()
                step = 0
                for hi, h in enumerate(horizons):
                    while step < h:
                        current, _ = model.forward(current)
                        step += 1
                    preds[:, hi] = current
            else:
                raise ValueError(f"model kind {ckpt.model_kind!r} has no forward-"
                                 f"prediction path")
            acc += relative_error(preds, targets).sum(axis=0)
            for g, (lo, hi) in grp.items():
                acc_group[g] += relative_error(preds, targets, rows=slice(lo, hi)).sum(axis=0)
        errors[name] = acc / len(anchor_ids)
        group_errors[name] = {g: v / len(anchor_ids) for g, v in acc_group.items()}
    return EvaluationReport(horizons=horizons, errors=errors,
                            group_errors=group_errors, anchor_count=n_anchor_out)


def phase_features(model: FLDModel, frames_normed: np.ndarray,
                   anchor_stride: int = 1, chunk: int = 256
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame phase features concat_c (a_c sin(2 pi phi_c), a_c cos(2 pi phi_c)).

    Returns (features (n, 2c), anchor frame indices)."""
    cfg = model.config
    view = segment_view(frames_normed, cfg.window)
    ids = np.arange(0, view.shape[0], anchor_stride)
    feats = np.empty((len(ids), 2 * cfg.channels))
    for start in range(0, len(ids), chunk):
        sel = ids[start:start + chunk]
        z, _ = model.encode(view[sel], "eval")
        phi, _, amp, _, _ = model.parameterize(z, "eval")
        feats[start:start + len(sel), 0::2] = amp * np.sin(2 * np.pi * phi)
        feats[start:start + len(sel), 1::2] = amp * np.cos(2 * np.pi * phi)
    return feats, ids + cfg.window - 1


@dataclass
class ManifoldPoint:
    x: float
    y: float
    trajectory: int
    label: str
    frame: int


def export_latent_manifold(checkpoint: ModelCheckpoint, corpus: list[Trajectory],
                           anchor_stride: int = 1) -> list[ManifoldPoint]:
    """2D PCA of the phase features over every windowable frame of the corpus."""
    if checkpoint.model_kind not in ("fld", "pae"):
        raise ValueError("latent manifold export needs an fld or pae checkpoint")
    model = build_model(checkpoint)
    feats = []
    meta = []
    for ti, traj in enumerate(corpus):
        if len(traj) < model.config.window:
            continue
        f, frames_idx = phase_features(model, checkpoint.normalization.apply(traj.frames),
                                       anchor_stride)
        feats.append(f)
        meta.extend((ti, traj.label or f"trajectory-{ti}", int(fi)) for fi in frames_idx)
    if not feats or sum(f.shape[0] for f in feats) < 3:
        raise ValueError("need at least 3 windowable frames for a manifold export")
    projected, _ = pca_project_2d(np.concatenate(feats, axis=0))
    return [ManifoldPoint(float(p[0]), float(p[1]), ti, label, fi)
            for p, (ti, label, fi) in zip(projected, meta)]


@dataclass
class QuasiConstancyReport:
    # per (component, channel): mean over trajectories of within-trajectory std,
    # the across-corpus std, and their ratio
    within: dict[str, np.ndarray]
    across: dict[str, np.ndarray]
    ratio: dict[str, np.ndarray]
    mean_ratio: float
    skipped_channels: dict[str, list[int]] = field(default_factory=dict)


def quasi_constancy_report(checkpoint: ModelCheckpoint, corpus: list[Trajectory],
                           anchor_stride: int = 1) -> QuasiConstancyReport:
    """How constant the latent parameterization stays along trajectories,
    relative to its spread across the corpus. Lower is more constant."""
    if checkpoint.model_kind not in ("fld", "pae"):
        raise ValueError("quasi-constancy needs an fld or pae checkpoint")
    usable = [t for t in corpus if len(t) >= FLDConfig.from_dict(checkpoint.config).window]
    if len(usable) < 2:
        raise ValueError("need at least two windowable trajectories")
    model = build_model(checkpoint)
    cfg = model.config
    per_traj_std: dict[str, list[np.ndarray]] = {"f": [], "a": [], "b": []}
    per_traj_mean: dict[str, list[np.ndarray]] = {"f": [], "a": [], "b": []}
    for traj in usable:
        frames = checkpoint.normalization.apply(traj.frames)
        view = segment_view(frames, cfg.window)
        ids = np.arange(0, view.shape[0], anchor_stride)
        thetas = {"f": [], "a": [], "b": []}
        for start in range(0, len(ids), 256):
            sel = ids[start:start + 256]
            z, _ = model.encode(view[sel], "eval")
            _, f, a, b, _ = model.parameterize(z, "eval")
            thetas["f"].append(f)
            thetas["a"].append(a)
            thetas["b"].append(b)
        for key in thetas:
            stacked = np.concatenate(thetas[key], axis=0)
            per_traj_std[key].append(stacked.std(axis=0))
            per_traj_mean[key].append(stacked.mean(axis=0))
    within, across, ratio, skipped = {}, {}, {}, {}
    ratios_all = []
    for key in ("f", "a", "b"):
        within[key] = np.mean(per_traj_std[key], axis=0)
        # spread of the per-trajectory mean parameterizations across the corpus
        across[key] = np.std(per_traj_mean[key], axis=0)
        live = across[key] > 1e-12
        skipped[key] = list(np.flatnonzero(~live))
        ratio[key] = np.where(live, within[key] / np.where(live, across[key], 1.0), np.nan)
        ratios_all.append(ratio[key][live])
    kept = np.concatenate(ratios_all)
    if kept.size == 0:
        raise ValueError("across-corpus spread of the parameterization is zero "
                         "on every channel (identical trajectories?)")
    return QuasiConstancyReport(within=within, across=across, ratio=ratio,
                                mean_ratio=float(kept.mean()), skipped_channels=skipped)
