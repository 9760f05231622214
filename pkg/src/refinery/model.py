"""The prior-guided refinement network.

Given a degraded image, a baseline restoration of it, and a 1D prior vector
describing the degraded image, the network predicts a correction mask and a
residual image, then composes

    refined = degraded * (1 - mask) + restored * mask + residual

so that a fresh network starts as a near-identity on the baseline output.
Internally it encodes the (restored, degraded) pair to a latent grid, fuses
short-range (convolutional) and long-range (attention) processing under a
learned per-location weight map, applies prior-conditioned channel and
spatial attention, and decodes back to image resolution.

All masks and gates are sigmoid outputs, so they live strictly inside (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, InputError, ShapeError
from .layers import Conv, Dense, Layer, PositionEmbedding, ResidualBlock, SelfAttentionBlock, VecDense
from .params import check_tree, param_count

PARAM_BUDGET = 1_000_000

ABLATION_TOGGLES = frozenset({"no_sve", "no_ca", "no_sa", "no_pos_embed", "snr_mask", "concat_prior"})


def validate_ablation(toggles) -> frozenset:
    toggles = frozenset(toggles)
    unknown = toggles - ABLATION_TOGGLES
    if unknown:
        raise ConfigError(f"unknown ablation toggles: {sorted(unknown)}")
    if "snr_mask" in toggles and "no_sve" in toggles:
        raise ConfigError("snr_mask replaces the learned fusion map; it conflicts with no_sve")
    return toggles


@dataclass
class RefinementConfig:
    channels: int = 16            # latent width
    prior_dim: int = 512          # length of the prior vector
    kernel_size: int = 3          # per-location kernel size, odd
    downsample_levels: int = 2    # stride-2 stages in the encoder
    attn_downsample: int = 4      # extra shrink factor before attention
    mask_bias_init: float = 4.0   # keeps the fresh network near-identity
    gate_bias_init: float = 4.0   # attention gates open (~0.98) at init

    def validate(self) -> None:
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd and positive, got {self.kernel_size}")
        if self.channels < 4:
            raise ConfigError(f"channels must be >= 4, got {self.channels}")
        if self.prior_dim < 1:
            raise ConfigError(f"prior_dim must be >= 1, got {self.prior_dim}")
        if self.downsample_levels < 1:
            raise ConfigError(f"downsample_levels must be >= 1, got {self.downsample_levels}")
        if self.attn_downsample < 1:
            raise ConfigError(f"attn_downsample must be >= 1, got {self.attn_downsample}")


@dataclass
class RefinementOutput:
    """Decoder products plus the composed image and per-stage gate maps."""
    mask: Tensor          # (H, W, 1), entries in (0, 1)
    residual: Tensor      # (H, W, 3), unbounded
    composed: Tensor      # (H, W, 3), not clamped
    diagnostics: dict = field(default_factory=dict)


def _box_blur3(img: np.ndarray) -> np.ndarray:
    padded = np.pad(img, ((1, 1), (1, 1), (0, 0)), mode="edge")
    out = np.zeros_like(img)
    for dy in range(3):
        for dx in range(3):
            out += padded[dy:dy + img.shape[0], dx:dx + img.shape[1], :]
    return out / 9.0


def snr_fusion_map(i_hat: np.ndarray, i_d: np.ndarray, h: int, w: int) -> np.ndarray:
    """Fixed signal-to-noise proxy used by the snr_mask ablation.

    Signal is the blurred restored image, noise the high-frequency content of
    the degraded input; the ratio is reduced to one channel and resized to
    the latent grid. Not learned and not differentiated.
    """
    signal = _box_blur3(i_hat)
    noise = np.abs(i_d - _box_blur3(i_d))
    ratio = signal / (signal + noise + 1e-6)
    gray = ratio.mean(axis=2, keepdims=True)
    from .autodiff import _interp_matrix  # reuse the resize weights

    ry = _interp_matrix(gray.shape[0], h, gray.dtype)
    rx = _interp_matrix(gray.shape[1], w, gray.dtype)
    small = np.tensordot(ry, gray, axes=(1, 0))
    small = np.tensordot(rx, small, axes=(1, 1)).transpose(1, 0, 2)
    return np.clip(small, 0.0, 1.0)


class RefinerNetwork(Layer):
    """Encoder, range-fused enhancement, channel/spatial attention, decoder."""

    def __init__(self, config: RefinementConfig, rng: np.random.Generator,
                 dtype=np.float32, ablation=frozenset()):
        config.validate()
        self.config = config
        self.dtype = dtype
        self.ablation = validate_ablation(ablation)

        c = config.channels
        k = config.kernel_size
        concat_prior = "concat_prior" in self.ablation
        use_pos = "no_pos_embed" not in self.ablation
        use_range = "no_sve" not in self.ablation and "snr_mask" not in self.ablation
        use_ca = "no_ca" not in self.ablation
        use_sa = "no_sa" not in self.ablation

        # one init stream per module: toggling a component off must not
        # reshuffle anyone else's draws, or an ablation comparison measures
        # the init lottery instead of the component
        (enc_rng, rproj_rng, rpos_rng, rc0_rng, rc1_rng, short_rng, attn_rng,
         aproj_rng, chan_rng, spos_rng, sc0_rng, sc1_rng, sout_rng, fus_rng,
         dec_rng) = rng.spawn(15)

        enc_in = 6 + (config.prior_dim if concat_prior else 0)
        self.encoder = [Conv(enc_rng, 3, enc_in if i == 0 else c, c, stride=2, dtype=dtype)
                        for i in range(config.downsample_levels)]

        if use_range:
            if not concat_prior:
                self.prior_to_range = VecDense(rproj_rng, config.prior_dim, c, dtype)
            if use_pos:
                self.pos_range = PositionEmbedding(rpos_rng, c, dtype)
            range_in = (2 if concat_prior else 3) * c
            self.range_conv0 = Conv(rc0_rng, 3, range_in, c, dtype=dtype)
            # zero head -> fusion weight starts at exactly 0.5, the same
            # even split the no_sve variant is pinned to
            self.range_conv1 = Conv(rc1_rng, 3, c, 1, dtype=dtype, zero_init=True)

        self.short_blocks = [ResidualBlock(short_rng, c, dtype), ResidualBlock(short_rng, c, dtype)]
        self.attention = SelfAttentionBlock(attn_rng, c, dtype)

        if (use_ca or use_sa) and not concat_prior:
            self.prior_to_attn = VecDense(aproj_rng, config.prior_dim, c, dtype)
        if use_ca:
            chan_in = c if concat_prior else 2 * c
            self.chan_lin0 = VecDense(chan_rng, chan_in, c, dtype)
            self.chan_lin1 = VecDense(chan_rng, c, c, dtype, zero_init=True,
                                      bias_init=config.gate_bias_init)
        if use_sa:
            if use_pos:
                self.pos_kernels = PositionEmbedding(spos_rng, c, dtype)
            kpred_in = (2 if concat_prior else 3) * c
            self.kernel_conv0 = Conv(sc0_rng, 3, kpred_in, c, dtype=dtype)
            self.kernel_conv1 = Conv(sc1_rng, 3, c, k * k * c, dtype=dtype)
            self.spatial_out = Conv(sout_rng, 1, c, 1, dtype=dtype, zero_init=True,
                                    bias_init=config.gate_bias_init)

        self.fusion = Conv(fus_rng, 1, 2 * c, c, dtype=dtype)
        self.decoder = [Conv(dec_rng, 3, c, c, dtype=dtype) for _ in range(config.downsample_levels)]
        self.mask_head = Conv(dec_rng, 3, c, 1, dtype=dtype, zero_init=True,
                              bias_init=config.mask_bias_init)
        self.residual_head = Conv(dec_rng, 3, c, 3, dtype=dtype, zero_init=True)

        tree = self.named_params()
        check_tree(tree)
        total = param_count(tree)
        if total >= PARAM_BUDGET:
            raise ConfigError(f"parameter budget exceeded: {total} >= {PARAM_BUDGET}")

    # -- component passes ---------------------------------------------------

    def _check_prior(self, g: Tensor) -> None:
        if g.data.ndim != 1 or g.shape[0] != self.config.prior_dim:
            raise InputError(f"prior vector has shape {g.shape}, expected ({self.config.prior_dim},)")

    def _pos_map(self, module_name: str, h: int, w: int) -> Tensor:
        if "no_pos_embed" in self.ablation:
            return Tensor(np.zeros((h, w, self.config.channels), dtype=self.dtype))
        return getattr(self, module_name)(h, w)

    def encode(self, i_hat: Tensor, i_d: Tensor, g: Optional[Tensor] = None) -> Tensor:
        if i_hat.shape != i_d.shape:
            raise ShapeError(f"encode: restored {i_hat.shape} and degraded {i_d.shape} differ")
        if i_d.data.ndim != 3 or i_d.shape[2] != 3:
            raise ShapeError(f"encode: expected (H, W, 3) images, got {i_d.shape}")
        height, width = i_d.shape[:2]
        factor = 2 ** self.config.downsample_levels
        if height % factor or width % factor:
            raise ConfigError(f"image size {height}x{width} not divisible by 2^levels = {factor}")
        if np.min(i_d.data) < 0.0 or np.max(i_d.data) > 1.0:
            raise InputError("degraded image has pixel values outside [0, 1]")
        if not np.isfinite(i_hat.data).all():
            raise InputError("restored image contains non-finite values")

        parts = [i_hat, i_d]
        if "concat_prior" in self.ablation:
            self._check_prior(g)
            parts.append(ad.tile_spatial(g, height, width))
        x = ad.concat_channels(parts)
        for conv in self.encoder:
            x = ad.relu(conv(x))
        return x

    def range_score(self, f: Tensor, g: Tensor) -> Tensor:
        """Per-location weight in (0, 1) for the short/long fusion."""
        h, w, _ = f.shape
        parts = [f]
        if "concat_prior" not in self.ablation:
            self._check_prior(g)
            parts.append(ad.tile_spatial(self.prior_to_range(g), h, w))
        parts.append(self._pos_map("pos_range", h, w))
        x = ad.relu(self.range_conv0(ad.concat_channels(parts)))
        return ad.sigmoid(self.range_conv1(x))

    def short_range(self, f: Tensor) -> Tensor:
        for block in self.short_blocks:
            f = block(f)
        return f

    def long_range(self, f: Tensor) -> Tensor:
        h, w, _ = f.shape
        th = max(1, h // self.config.attn_downsample)
        tw = max(1, w // self.config.attn_downsample)
        x = ad.bilinear_resize(f, th, tw)
        tokens = ad.flatten_spatial(x)
        tokens = self.attention(tokens)
        x = ad.unflatten_spatial(tokens, th, tw)
        return ad.bilinear_resize(x, h, w)

    def sve(self, f: Tensor, g: Tensor, snr_map: Optional[np.ndarray] = None):
        """Convex per-location fusion of short- and long-range features."""
        f_s = self.short_range(f)
        f_l = self.long_range(f)
        h, w, c = f.shape
        if "no_sve" in self.ablation:
            fused = ad.add(ad.scalar_mul(f_s, 0.5), ad.scalar_mul(f_l, 0.5))
            weight = Tensor(np.full((h, w, 1), 0.5, dtype=self.dtype))
            return fused, weight
        if "snr_mask" in self.ablation:
            if snr_map is None:
                raise InputError("snr_mask ablation needs the image-derived fusion map")
            weight = Tensor(snr_map.astype(self.dtype))
        else:
            weight = self.range_score(f, g)
        wc = ad.tile_channels(weight, c)
        one_minus = ad.scalar_add(ad.scalar_mul(wc, -1.0), 1.0)
        return ad.add(ad.mul(wc, f_s), ad.mul(one_minus, f_l)), weight

    def channel_attention(self, f_hat: Tensor, g: Tensor):
        h, w, c = f_hat.shape
        pooled = ad.global_avg_pool(f_hat)
        if "concat_prior" in self.ablation:
            x = pooled
        else:
            self._check_prior(g)
            x = ad.concat_channels([pooled, self.prior_to_attn(g)])
        gates = ad.sigmoid(self.chan_lin1(ad.relu(self.chan_lin0(x))))
        scaled = ad.mul(f_hat, ad.tile_spatial(gates, h, w))
        return scaled, gates

    def predict_kernels(self, f_hat: Tensor, g: Tensor) -> Tensor:
        """One depthwise k x k filter per location, tanh-bounded and 1/k^2 scaled."""
        h, w, _ = f_hat.shape
        parts = [f_hat]
        if "concat_prior" not in self.ablation:
            self._check_prior(g)
            parts.append(ad.tile_spatial(self.prior_to_attn(g), h, w))
        parts.append(self._pos_map("pos_kernels", h, w))
        x = ad.relu(self.kernel_conv0(ad.concat_channels(parts)))
        k = self.config.kernel_size
        return ad.scalar_mul(ad.tanh(self.kernel_conv1(x)), 1.0 / (k * k))

    def spatial_attention(self, f_hat: Tensor, kernels: Tensor):
        h, w, c = f_hat.shape
        raw = ad.per_location_conv(f_hat, kernels)
        weight = ad.sigmoid(self.spatial_out(raw))
        return ad.mul(f_hat, ad.tile_channels(weight, c)), weight

    def fuse(self, f_chan: Tensor, f_spat: Tensor) -> Tensor:
        if f_chan.shape != f_spat.shape:
            raise ShapeError(f"fuse: operand shapes differ ({f_chan.shape} vs {f_spat.shape})")
        return self.fusion(ad.concat_channels([f_chan, f_spat]))

    def decode(self, f_bar: Tensor):
        x = f_bar
        for conv in self.decoder:
            h, w, _ = x.shape
            x = ad.relu(conv(ad.bilinear_resize(x, 2 * h, 2 * w)))
        mask = ad.sigmoid(self.mask_head(x))
        residual = self.residual_head(x)
        return mask, residual

    # -- full pass -----------------------------------------------------------

    def refine(self, i_d: Tensor, i_hat: Tensor, g: Tensor,
               force_mask: Optional[float] = None,
               force_residual: Optional[float] = None) -> RefinementOutput:
        """Full chain from image pair + prior to the composed refinement."""
        if "concat_prior" not in self.ablation:
            self._check_prior(g)
        f = self.encode(i_hat, i_d, g)

        snr_map = None
        if "snr_mask" in self.ablation:
            snr_map = snr_fusion_map(i_hat.data.astype(np.float64),
                                     i_d.data.astype(np.float64),
                                     f.shape[0], f.shape[1])
        f_hat, range_map = self.sve(f, g, snr_map)

        c = self.config.channels
        if "no_ca" in self.ablation:
            f_chan = f_hat
            gates = Tensor(np.ones(c, dtype=self.dtype))
        else:
            f_chan, gates = self.channel_attention(f_hat, g)
        if "no_sa" in self.ablation:
            f_spat = f_hat
            spat_map = Tensor(np.ones(f_hat.shape[:2] + (1,), dtype=self.dtype))
        else:
            kernels = self.predict_kernels(f_hat, g)
            f_spat, spat_map = self.spatial_attention(f_hat, kernels)

        f_bar = self.fuse(f_chan, f_spat)
        mask, residual = self.decode(f_bar)

        height, width = i_d.shape[:2]
        if force_mask is not None:
            mask = Tensor(np.full((height, width, 1), force_mask, dtype=self.dtype))
        if force_residual is not None:
            residual = Tensor(np.full((height, width, 3), force_residual, dtype=self.dtype))

        mask3 = ad.tile_channels(mask, 3)
        keep = ad.scalar_add(ad.scalar_mul(mask3, -1.0), 1.0)
        composed = ad.add(ad.add(ad.mul(i_d, keep), ad.mul(i_hat, mask3)), residual)
        return RefinementOutput(
            mask=mask, residual=residual, composed=composed,
            diagnostics={"range_map": range_map.data, "channel_gates": gates.data,
                         "spatial_map": spat_map.data},
        )

    def param_count(self) -> int:
        return param_count(self.named_params())
