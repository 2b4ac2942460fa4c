"""The FLD model: a periodic convolutional autoencoder whose latent curves
are parameterized in the frequency domain, plus the propagation loss that
makes the parameterization quasi-constant, and the VAE / feed-forward
comparison baselines.

Conventions
-----------
* A segment is (d, H) with columns oldest to newest; batches are (B, d, H).
* The reconstruction time grid is T = (-(H-1)*dt, ..., -dt, 0): the phase
  indexes the newest frame, so advancing phase by f*dt moves the window
  exactly one frame.
* Phase is in cycles, wrapped to [-0.5, 0.5): only sin(2*pi*phi) ever
  consumes it.
* Frequency (Hz) is the power-weighted mean of non-DC bin frequencies,
  amplitude is (2/H)*sqrt(sum of non-DC power), offset is the DC bin over H.
  A pure sinusoid of amplitude A at a bin frequency yields exactly (f, A, b).
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .numerics import (
    Adam,
    BatchNorm1d,
    Conv1d,
    Linear,
    Parameter,
    PerChannelLinear,
    atan2_phase,
    atan2_phase_backward,
    elu,
    elu_backward,
    relu,
    relu_backward,
    rfft,
    rfft_backward,
    softplus,
    softplus_backward,
)

_POWER_FLOOR = 1e-12


def wrap_phase(phi: np.ndarray) -> np.ndarray:
    """Wrap phase (cycles) into [-0.5, 0.5)."""
    return np.mod(np.asarray(phi, dtype=np.float64) + 0.5, 1.0) - 0.5


@dataclass
class FLDConfig:
    dims: int = 27              # state dimensions d
    channels: int = 8           # latent channels c
    window: int = 51            # segment length H
    horizon: int = 50           # propagation horizon N
    alpha: float = 1.0          # propagation decay
    dt: float = 0.02
    hidden: int = 64
    final_activation: bool = False  # BN+ELU on the decoder output layer

    def __post_init__(self):
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def kernel(self) -> int:
        # convolution kernel spans the window; drop to the next odd size
        return self.window if self.window % 2 == 1 else self.window - 1

    @property
    def nyquist(self) -> float:
        return 0.5 / self.dt

    @property
    def time_grid(self) -> np.ndarray:
        h = self.window
        return (np.arange(h) - (h - 1)) * self.dt

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "FLDConfig":
        return cls(**data)


class FLDModel:
    """Encoder, FFT parameterization, sinusoidal latent reconstruction and
    decoder. PAE is this model trained with horizon 0."""

    def __init__(self, config: FLDConfig, rng: np.random.Generator):
        self.config = config
        c, d, h, hid, k = (config.channels, config.dims, config.window,
                           config.hidden, config.kernel)
        # layers feeding straight into batch norm carry no bias
        self.enc_convs = [Conv1d(d, hid, k, rng, "enc.conv0", bias=False),
                          Conv1d(hid, hid, k, rng, "enc.conv1", bias=False),
                          Conv1d(hid, c, k, rng, "enc.conv2", bias=False)]
        self.enc_bns = [BatchNorm1d(hid, "enc.bn0"), BatchNorm1d(hid, "enc.bn1"),
                        BatchNorm1d(c, "enc.bn2")]
        self.phase_linear = PerChannelLinear(c, h, 2, rng, "phase.linear", bias=False)
        self.phase_bn = BatchNorm1d(2 * c, "phase.bn")
        self.dec_convs = [Conv1d(c, hid, k, rng, "dec.conv0", bias=False),
                          Conv1d(hid, hid, k, rng, "dec.conv1", bias=False),
                          Conv1d(hid, d, k, rng, "dec.conv2",
                                 bias=not config.final_activation)]
        self.dec_bns = [BatchNorm1d(hid, "dec.bn0"), BatchNorm1d(hid, "dec.bn1")]
        if config.final_activation:
            self.dec_bns.append(BatchNorm1d(d, "dec.bn2"))

    # -- bookkeeping ---------------------------------------------------

    def parameters(self) -> list[Parameter]:
        params = []
        for conv, bn in zip(self.enc_convs, self.enc_bns):
            params += conv.parameters() + bn.parameters()
        params += self.phase_linear.parameters() + self.phase_bn.parameters()
        for i, conv in enumerate(self.dec_convs):
            params += conv.parameters()
            if i < len(self.dec_bns):
                params += self.dec_bns[i].parameters()
        return params

    def batchnorms(self) -> list[BatchNorm1d]:
        return self.enc_bns + [self.phase_bn] + self.dec_bns

    def state_arrays(self) -> dict[str, np.ndarray]:
        """All trainable values plus batch-norm running statistics by name."""
        arrays = {p.name: p.value for p in self.parameters()}
        for bn in self.batchnorms():
            arrays.update(bn.state_arrays())
        return arrays

    # -- encoder / decoder ----------------------------------------------

    def encode(self, segments: np.ndarray, mode: str = "eval") -> tuple[np.ndarray, list]:
        x = np.asarray(segments, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        if x.shape[1] != self.config.dims or x.shape[2] != self.config.window:
            raise ValueError(f"expected segments (batch, {self.config.dims}, "
                             f"{self.config.window}), got {x.shape}")
        caches = []
        for conv, bn in zip(self.enc_convs, self.enc_bns):
            x, c_conv = conv.forward(x)
            x, c_bn = bn.forward(x, mode)
            x, c_act = elu(x)
            caches.append((c_conv, c_bn, c_act))
        return x, caches

    def encode_backward(self, grad_z: np.ndarray, caches: list) -> np.ndarray:
        g = grad_z
        for conv, bn, (c_conv, c_bn, c_act) in zip(reversed(self.enc_convs),
                                                   reversed(self.enc_bns),
                                                   reversed(caches)):
            g = elu_backward(g, c_act)
            g = bn.backward(g, c_bn)
            g = conv.backward(g, c_conv)
        return g

    def decode(self, latent: np.ndarray, mode: str = "eval") -> tuple[np.ndarray, list]:
        x = np.asarray(latent, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        caches = []
        for i, conv in enumerate(self.dec_convs):
            x, c_conv = conv.forward(x)
            last = i == len(self.dec_convs) - 1
            if not last or self.config.final_activation:
                x, c_bn = self.dec_bns[i].forward(x, mode)
                x, c_act = elu(x)
                caches.append((c_conv, c_bn, c_act))
            else:
                caches.append((c_conv, None, None))
        return x, caches

    def decode_backward(self, grad_out: np.ndarray, caches: list) -> np.ndarray:
        g = grad_out
        for i in reversed(range(len(self.dec_convs))):
            c_conv, c_bn, c_act = caches[i]
            if c_bn is not None:
                g = elu_backward(g, c_act)
                g = self.dec_bns[i].backward(g, c_bn)
            g = self.dec_convs[i].backward(g, c_conv)
        return g

    # -- parameterization -------------------------------------------------

    def phase(self, z: np.ndarray, mode: str = "eval") -> tuple[np.ndarray, dict]:
        """Learned phase head: per-channel linear to a 2D shift, batch norm,
        then the two-argument phase in cycles."""
        out, c_lin = self.phase_linear.forward(z)
        batch, c, _ = out.shape
        normed, c_bn = self.phase_bn.forward(out.reshape(batch, 2 * c), mode)
        normed = normed.reshape(batch, c, 2)
        phi, c_at = atan2_phase(normed[..., 1], normed[..., 0])
        return phi, {"lin": c_lin, "bn": c_bn, "at": c_at, "shape": (batch, c)}

    def phase_backward(self, grad_phi: np.ndarray, cache: dict) -> np.ndarray:
        batch, c = cache["shape"]
        dsy, dsx = atan2_phase_backward(grad_phi, cache["at"])
        g = np.stack([dsx, dsy], axis=-1).reshape(batch, 2 * c)
        g = self.phase_bn.backward(g, cache["bn"]).reshape(batch, c, 2)
        return self.phase_linear.backward(g, cache["lin"])

    def spectrum_params(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
        """Frequency (Hz), amplitude and offset per latent channel.

        Zero-power channels (constant curves) get f = 0 by convention and
        carry no gradient through the frequency/amplitude path.
        """
        h, dt = self.config.window, self.config.dt
        spec = rfft(z)
        re, im = spec.real, spec.imag
        offset = re[..., 0] / h
        power = re[..., 1:] ** 2 + im[..., 1:] ** 2
        total = power.sum(axis=-1)
        live = total > _POWER_FLOOR
        amp = (2.0 / h) * np.sqrt(total)
        bin_freq = np.arange(1, h // 2 + 1) / (h * dt)
        with np.errstate(invalid="ignore", divide="ignore"):
            freq = np.where(live, power @ bin_freq / np.where(live, total, 1.0), 0.0)
        freq = np.clip(freq, 0.0, self.config.nyquist)
        cache = {"re": re, "im": im, "power": power, "total": total, "live": live,
                 "freq": freq, "bin_freq": bin_freq}
        return freq, amp, offset, cache

    def spectrum_params_backward(self, grad_f: np.ndarray, grad_a: np.ndarray,
                                 grad_b: np.ndarray, cache: dict) -> np.ndarray:
        h = self.config.window
        re, im = cache["re"], cache["im"]
        total, live = cache["total"], cache["live"]
        safe_total = np.where(live, total, 1.0)

        # d amp / d power_j = (1/h) / sqrt(total); d freq / d power_j = (nu_j - f) / total
        d_power = np.where(live, grad_a / (h * np.sqrt(safe_total)), 0.0)[..., None]
        d_power = d_power + np.where(live, grad_f / safe_total, 0.0)[..., None] * (
            cache["bin_freq"] - cache["freq"][..., None])

        d_re = np.zeros_like(re)
        d_im = np.zeros_like(im)
        d_re[..., 1:] = d_power * 2.0 * re[..., 1:]
        d_im[..., 1:] = d_power * 2.0 * im[..., 1:]
        d_re[..., 0] = grad_b / h
        return rfft_backward(d_re, d_im, h)

    def parameterize(self, z: np.ndarray, mode: str = "eval"
                     ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, dict]:
        """(phi, f, a, b) of a latent segment batch."""
        phi, phase_cache = self.phase(z, mode)
        freq, amp, offset, spec_cache = self.spectrum_params(z)
        return phi, freq, amp, offset, {"phase": phase_cache, "spec": spec_cache}

    def parameterize_backward(self, grad_phi, grad_f, grad_a, grad_b, cache) -> np.ndarray:
        dz = self.phase_backward(grad_phi, cache["phase"])
        dz += self.spectrum_params_backward(grad_f, grad_a, grad_b, cache["spec"])
        return dz

    # -- sinusoidal reconstruction ----------------------------------------

    def reconstruct_latent(self, phi: np.ndarray, freq: np.ndarray, amp: np.ndarray,
                           offset: np.ndarray, step_offsets: np.ndarray | None = None
                           ) -> tuple[np.ndarray, dict]:
        """Latent curves a*sin(2*pi*(f*(T + i*dt) + phi)) + b.

        ``step_offsets`` lists the propagation steps i (default just [0]);
        output is (B, n_steps, c, H).
        """
        phi = np.atleast_2d(np.asarray(phi, dtype=np.float64))
        freq = np.atleast_2d(np.asarray(freq, dtype=np.float64))
        amp = np.atleast_2d(np.asarray(amp, dtype=np.float64))
        offset = np.atleast_2d(np.asarray(offset, dtype=np.float64))
        if step_offsets is None:
            step_offsets = np.array([0])
        steps = np.asarray(step_offsets, dtype=np.float64)
        tg = self.config.time_grid  # (H,)
        times = tg[None, :] + steps[:, None] * self.config.dt  # (n_steps, H)
        # i-step propagation enters as a phase advance phi + i*(f*dt), so a
        # one-step prediction is bitwise the same as advancing phi manually
        advanced = phi[:, None, :] + steps[None, :, None] * (freq * self.config.dt)[:, None, :]
        angle = 2.0 * np.pi * (freq[:, None, :, None] * tg[None, None, None, :]
                               + advanced[..., None])
        sin_a = np.sin(angle)
        zhat = amp[:, None, :, None] * sin_a + offset[:, None, :, None]
        cache = {"sin": sin_a, "cos": np.cos(angle), "amp": amp, "times": times}
        return zhat, cache

    def reconstruct_latent_backward(self, grad_zhat: np.ndarray, cache: dict
                                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Returns (d_phi, d_freq, d_amp, d_offset), each (B, c)."""
        sin_a, cos_a, amp, times = cache["sin"], cache["cos"], cache["amp"], cache["times"]
        d_amp = np.einsum("bick,bick->bc", grad_zhat, sin_a)
        d_angle = grad_zhat * cos_a * amp[:, None, :, None]
        two_pi = 2.0 * np.pi
        d_phi = two_pi * d_angle.sum(axis=(1, 3))
        d_freq = two_pi * np.einsum("bick,ik->bc", d_angle, times)
        d_offset = grad_zhat.sum(axis=(1, 3))
        return d_phi, d_freq, d_amp, d_offset

    # -- prediction and loss ----------------------------------------------

    def predict(self, segments: np.ndarray, horizons: np.ndarray | list[int],
                mode: str = "eval") -> np.ndarray:
        """Decoded forward predictions for each step in ``horizons``.

        Returns (B, n_horizons, d, H); horizon 0 is the plain reconstruction.
        """
        horizons = np.asarray(horizons)
        if np.any(horizons < 0):
            raise ValueError("horizons must be >= 0")
        x = np.asarray(segments, dtype=np.float64)
        squeeze = x.ndim == 2
        z, _ = self.encode(x, mode)
        phi, f, a, b, _ = self.parameterize(z, mode)
        zhat, _ = self.reconstruct_latent(phi, f, a, b, horizons)
        batch, n_steps = zhat.shape[0], zhat.shape[1]
        shat, _ = self.decode(zhat.reshape(batch * n_steps, self.config.channels,
                                           self.config.window), mode)
        shat = shat.reshape(batch, n_steps, self.config.dims, self.config.window)
        return shat[0] if squeeze else shat

    def loss_and_grads(self, items: np.ndarray, mode: str = "train",
                       want_grads: bool = True, alpha: float | None = None,
                       horizon: int | None = None,
                       anchor: np.ndarray | None = None) -> tuple[float, np.ndarray]:
        """Propagation loss sum_i alpha^i * MSE(decoded i-step prediction,
        future segment i) over a batch of training items.

        ``items`` is (B, N+1, d, H): slot i is the i-step future segment of
        the anchor. The anchor defaults to slot 0 (the training layout); the
        gate passes the buffered targets with the earliest segment as the
        explicit anchor. Returns (total loss, per-horizon losses); parameter
        gradients are accumulated when ``want_grads``.
        """
        items = np.asarray(items, dtype=np.float64)
        if items.ndim != 4:
            raise ValueError(f"expected items (batch, horizon+1, d, H), got {items.shape}")
        n = items.shape[1] - 1 if horizon is None else horizon
        if n + 1 > items.shape[1]:
            raise ValueError(f"horizon {n} exceeds the {items.shape[1] - 1} futures provided")
        a_decay = self.config.alpha if alpha is None else alpha
        batch = items.shape[0]
        c, h, d = self.config.channels, self.config.window, self.config.dims

        z, enc_cache = self.encode(items[:, 0] if anchor is None else anchor, mode)
        phi, f, amp, off, par_cache = self.parameterize(z, mode)
        steps = np.arange(n + 1)
        zhat, rec_cache = self.reconstruct_latent(phi, f, amp, off, steps)
        shat, dec_cache = self.decode(zhat.reshape(batch * (n + 1), c, h), mode)
        shat = shat.reshape(batch, n + 1, d, h)

        targets = items[:, :n + 1]
        diff = shat - targets
        per_horizon = np.mean(diff ** 2, axis=(0, 2, 3))
        weights = a_decay ** np.arange(n + 1)
        total = float(weights @ per_horizon)

        if want_grads:
            grad_shat = (2.0 / (batch * d * h)) * diff * weights[None, :, None, None]
            grad_zhat = self.decode_backward(
                grad_shat.reshape(batch * (n + 1), d, h), dec_cache)
            grad_zhat = grad_zhat.reshape(batch, n + 1, c, h)
            d_phi, d_f, d_amp, d_off = self.reconstruct_latent_backward(grad_zhat, rec_cache)
            dz = self.parameterize_backward(d_phi, d_f, d_amp, d_off, par_cache)
            self.encode_backward(dz, enc_cache)
        return total, per_horizon


def representation_param_count(model_kind: str, d: int, c: int, h: int, traj_len: int) -> int:
    """Number of coefficients each representation needs for one trajectory."""
    if traj_len < h:
        raise ValueError(f"trajectory length {traj_len} is shorter than the window {h}")
    kind = model_kind.lower()
    if kind == "original":
        return d * traj_len
    if kind == "vae":
        return c * (traj_len - h + 1)
    if kind == "pae":
        return 4 * c * (traj_len - h + 1)
    if kind == "fld":
        return 4 * c
    raise ValueError(f"unknown model kind {model_kind!r}")


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


@dataclass
class VAEConfig:
    dims: int = 27
    window: int = 51
    latent: int = 8
    hidden: tuple[int, ...] = (512, 256, 128)
    beta: float = 1e-3
    dt: float = 0.02

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hidden"] = list(self.hidden)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "VAEConfig":
        data = dict(data)
        data["hidden"] = tuple(data["hidden"])
        return cls(**data)


class VAEBaseline:
    """Flat variational autoencoder over flattened segments; ReLU MLPs with a
    softplus standard-deviation head."""

    def __init__(self, config: VAEConfig, rng: np.random.Generator):
        self.config = config
        n_in = config.dims * config.window
        sizes = [n_in, *config.hidden]
        self.enc = [Linear(sizes[i], sizes[i + 1], rng, f"vae.enc{i}")
                    for i in range(len(sizes) - 1)]
        self.mean_head = Linear(sizes[-1], config.latent, rng, "vae.mean")
        self.std_head = Linear(sizes[-1], config.latent, rng, "vae.std")
        dec_sizes = [config.latent, *reversed(config.hidden), n_in]
        self.dec = [Linear(dec_sizes[i], dec_sizes[i + 1], rng, f"vae.dec{i}")
                    for i in range(len(dec_sizes) - 1)]

    def parameters(self) -> list[Parameter]:
        params = []
        for layer in [*self.enc, self.mean_head, self.std_head, *self.dec]:
            params += layer.parameters()
        return params

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {p.name: p.value for p in self.parameters()}

    def forward(self, segments: np.ndarray, rng: np.random.Generator | None = None
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
        """Returns (reconstruction, mean, std, cache). Sampling happens only
        when an rng is supplied (training); otherwise the mean is decoded."""
        x = np.asarray(segments, dtype=np.float64)
        batch = x.shape[0]
        flat = x.reshape(batch, -1)
        h = flat
        enc_caches = []
        for layer in self.enc:
            h, c_lin = layer.forward(h)
            h, c_act = relu(h)
            enc_caches.append((c_lin, c_act))
        mean, c_mean = self.mean_head.forward(h)
        pre_std, c_stdlin = self.std_head.forward(h)
        std, c_soft = softplus(pre_std)
        if rng is not None:
            noise = rng.standard_normal(mean.shape)
            latent = mean + std * noise
        else:
            noise = np.zeros_like(mean)
            latent = mean
        g = latent
        dec_caches = []
        for i, layer in enumerate(self.dec):
            g, c_lin = layer.forward(g)
            if i < len(self.dec) - 1:
                g, c_act = relu(g)
            else:
                c_act = None
            dec_caches.append((c_lin, c_act))
        recon = g.reshape(x.shape)
        cache = {"enc": enc_caches, "mean": c_mean, "stdlin": c_stdlin,
                 "soft": c_soft, "dec": dec_caches, "noise": noise,
                 "mean_val": mean, "std_val": std, "x": x}
        return recon, mean, std, cache

    def loss_and_grads(self, segments: np.ndarray, rng: np.random.Generator | None,
                       want_grads: bool = True) -> tuple[float, float, float]:
        """Returns (total, mse, kl); total = mse + beta * kl."""
        recon, mean, std, cache = self.forward(segments, rng)
        x = cache["x"]
        batch = x.shape[0]
        diff = recon - x
        mse = float(np.mean(diff ** 2))
        # KL(N(mu, sigma) || N(0, 1)) summed over latent dims, averaged over batch
        kl = float(np.mean(np.sum(0.5 * (mean ** 2 + std ** 2 - 1.0)
                                  - np.log(std), axis=1)))
        total = mse + self.config.beta * kl
        if want_grads:
            g = (2.0 / diff.size) * diff
            g = g.reshape(batch, -1)
            for i in reversed(range(len(self.dec))):
                c_lin, c_act = cache["dec"][i]
                if c_act is not None:
                    g = relu_backward(g, c_act)
                g = self.dec[i].backward(g, c_lin)
            d_mean = g + self.config.beta / batch * mean
            d_std = g * cache["noise"] + self.config.beta / batch * (std - 1.0 / std)
            d_pre = softplus_backward(d_std, cache["soft"])
            gh = self.mean_head.backward(d_mean, cache["mean"])
            gh += self.std_head.backward(d_pre, cache["stdlin"])
            for i in reversed(range(len(self.enc))):
                c_lin, c_act = cache["enc"][i]
                gh = relu_backward(gh, c_act)
                gh = self.enc[i].backward(gh, c_lin)
        return total, mse, kl


@dataclass
class FFConfig:
    dims: int = 27
    window: int = 51
    hidden: tuple[int, ...] = (512, 512)
    dt: float = 0.02

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hidden"] = list(self.hidden)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FFConfig":
        data = dict(data)
        data["hidden"] = tuple(data["hidden"])
        return cls(**data)


class FFBaseline:
    """One-step segment predictor: flattened segment in, next segment out,
    ELU MLP. Multi-step prediction is autoregressive composition."""

    def __init__(self, config: FFConfig, rng: np.random.Generator):
        self.config = config
        n = config.dims * config.window
        sizes = [n, *config.hidden, n]
        self.layers = [Linear(sizes[i], sizes[i + 1], rng, f"ff.lin{i}")
                       for i in range(len(sizes) - 1)]

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {p.name: p.value for p in self.parameters()}

    def forward(self, segments: np.ndarray) -> tuple[np.ndarray, list]:
        x = np.asarray(segments, dtype=np.float64)
        batch = x.shape[0]
        h = x.reshape(batch, -1)
        caches = []
        for i, layer in enumerate(self.layers):
            h, c_lin = layer.forward(h)
            if i < len(self.layers) - 1:
                h, c_act = elu(h)
            else:
                c_act = None
            caches.append((c_lin, c_act))
        return h.reshape(x.shape), caches

    def predict(self, segments: np.ndarray, steps: int) -> np.ndarray:
        """``steps``-fold composition of the one-step predictor."""
        out = np.asarray(segments, dtype=np.float64)
        for _ in range(steps):
            out, _ = self.forward(out)
        return out

    def loss_and_grads(self, segments: np.ndarray, targets: np.ndarray,
                       want_grads: bool = True) -> float:
        pred, caches = self.forward(segments)
        diff = pred - np.asarray(targets, dtype=np.float64)
        loss = float(np.mean(diff ** 2))
        if want_grads:
            g = (2.0 / diff.size) * diff.reshape(diff.shape[0], -1)
            for i in reversed(range(len(self.layers))):
                c_lin, c_act = caches[i]
                if c_act is not None:
                    g = elu_backward(g, c_act)
                g = self.layers[i].backward(g, c_lin)
        return loss
