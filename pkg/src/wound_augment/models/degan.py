"""Decoder-encoder output-noise GAN (DE-GAN) for single-class image synthesis.

Instead of feeding Gaussian noise straight into the generator, noise ``z``
goes through a VAE decoder and back through its encoder; the reparameterized
encoding ``h`` is the generator input. The VAE is trained jointly through the
hidden term of the generator objective::

    L_gen = lambda_adv * L_adv + lambda_hid * L_hid
    L_adv = BCE(D(G(h)), real)                       # non-saturating
    L_hid = MSE(Dec(E(x)), x) + KL(E(x) || N(0, I)) / pixels

The noise code is detached before it reaches the generator, so the
adversarial term trains only the generator and the encoder/decoder pair moves
only under ``L_hid``. The discriminator appends a minibatch standard
deviation channel before its linear head unless ``minibatch_std`` is off.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, NamedTuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from wound_augment.core.config import ClassLabel, GanConfig, Origin
from wound_augment.core.exceptions import (
    EmptyDatasetError,
    GanDivergedError,
    GanError,
    ShapeMismatchError,
)
from wound_augment.core.seeding import derive_seed, torch_generator
from wound_augment.data.dataset import ImageSample, LabeledDataset

if TYPE_CHECKING:
    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

GAN_WEIGHTS_FILE = "gan.pt"
GAN_INFO_FILE = "gan.json"
ADAM_BETAS: tuple[float, float] = (0.5, 0.999)
LEAKY_SLOPE: float = 0.2


# =============================================================================
# Networks
# =============================================================================


def _reduced(cfg: GanConfig) -> tuple[int, int, int]:
    height, width, _ = cfg.image_shape
    return 2 * cfg.base_channels, height // 4, width // 4


class VaeEncoder(nn.Module):
    """Image -> (mu, logvar)."""

    def __init__(self, cfg: GanConfig) -> None:
        super().__init__()
        channels = cfg.image_shape[2]
        depth, h4, w4 = _reduced(cfg)
        self.conv = nn.Sequential(
            nn.Conv2d(channels, cfg.base_channels, 4, stride=2, padding=1),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(cfg.base_channels, depth, 4, stride=2, padding=1),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Flatten(),
        )
        self.head = nn.Linear(depth * h4 * w4, 2 * cfg.latent_dim)
        self.latent_dim = cfg.latent_dim

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        out = self.head(self.conv(x))
        return out[:, : self.latent_dim], out[:, self.latent_dim :]


class ImageDecoder(nn.Module):
    """Latent vector -> image in [0, 1]. Used for both the VAE decoder and G."""

    def __init__(self, cfg: GanConfig) -> None:
        super().__init__()
        channels = cfg.image_shape[2]
        depth, h4, w4 = _reduced(cfg)
        self.shape = (depth, h4, w4)
        self.project = nn.Sequential(nn.Linear(cfg.latent_dim, depth * h4 * w4), nn.ReLU())
        self.deconv = nn.Sequential(
            nn.ConvTranspose2d(depth, cfg.base_channels, 4, stride=2, padding=1),
            nn.ReLU(),
            nn.ConvTranspose2d(cfg.base_channels, channels, 4, stride=2, padding=1),
            nn.Sigmoid(),
        )

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.deconv(self.project(z).view(-1, *self.shape))


class MinibatchStdDev(nn.Module):
    """Appends the batch-mean feature standard deviation as one extra channel."""

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        std = torch.sqrt(x.var(dim=0, unbiased=False) + 1e-8).mean()
        return torch.cat([x, std.expand(x.shape[0], 1, *x.shape[2:])], dim=1)


class Discriminator(nn.Module):
    """Image -> real/fake logit."""

    def __init__(self, cfg: GanConfig) -> None:
        super().__init__()
        channels = cfg.image_shape[2]
        depth, h4, w4 = _reduced(cfg)
        layers: list[nn.Module] = [
            nn.Conv2d(channels, cfg.base_channels, 4, stride=2, padding=1),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(cfg.base_channels, depth, 4, stride=2, padding=1),
            nn.LeakyReLU(LEAKY_SLOPE),
        ]
        for _ in range(cfg.disc_extra_layers):
            layers += [nn.Conv2d(depth, depth, 3, padding=1), nn.LeakyReLU(LEAKY_SLOPE)]
        head_depth = depth
        if cfg.minibatch_std:
            layers.append(MinibatchStdDev())
            head_depth += 1
        layers += [nn.Flatten(), nn.Linear(head_depth * h4 * w4, 1)]
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x).squeeze(1)


class EpochLosses(NamedTuple):
    gen: float
    disc: float
    hid: float
    adv: float


@dataclass
class GanModel:
    """A (possibly partially) trained DE-GAN for one class."""

    config: GanConfig
    label: ClassLabel
    catalog: tuple[ClassLabel, ...]
    encoder: VaeEncoder
    decoder: ImageDecoder
    generator: ImageDecoder
    discriminator: Discriminator
    loss_history: list[EpochLosses] = field(default_factory=list)

    def modules(self) -> dict[str, nn.Module]:
        return {
            "encoder": self.encoder,
            "decoder": self.decoder,
            "generator": self.generator,
            "discriminator": self.discriminator,
        }

    def generator_parameters(self) -> list[nn.Parameter]:
        return [
            *self.generator.parameters(),
            *self.encoder.parameters(),
            *self.decoder.parameters(),
        ]

    def noise_code(self, z: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
        """Decoder-encoder output noise: ``z`` -> Dec -> E -> reparameterize."""
        mu, logvar = self.encoder(self.decoder(z))
        return mu + torch.exp(0.5 * logvar) * eps

    def sample_images(self, z: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
        """Generator output (N, C, H, W) for given latent and noise draws."""
        return self.render(self.noise_code(z, eps))

    def render(self, code: torch.Tensor) -> torch.Tensor:
        images = self.generator(code)
        if self.config.grayscale:
            images = to_grayscale(images)
        return images

    def discriminate(self, images: torch.Tensor) -> torch.Tensor:
        """Real-probability per image, in [0, 1]."""
        return torch.sigmoid(self.discriminator(images))

    def eval(self) -> GanModel:
        for module in self.modules().values():
            module.eval()
        return self


def to_grayscale(images: torch.Tensor) -> torch.Tensor:
    """Luminance replicated across the channel axis of an NCHW batch."""
    return images.mean(dim=1, keepdim=True).expand_as(images)


def build_gan(
    cfg: GanConfig,
    label: ClassLabel,
    catalog: tuple[ClassLabel, ...] | None = None,
) -> GanModel:
    """Construct untrained networks with seeded default initialization."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(derive_seed(cfg.seed, "gan-init"))
        model = GanModel(
            config=cfg,
            label=label,
            catalog=catalog or (label,),
            encoder=VaeEncoder(cfg),
            decoder=ImageDecoder(cfg),
            generator=ImageDecoder(cfg),
            discriminator=Discriminator(cfg),
        )
    return model


# =============================================================================
# Losses
# =============================================================================


def hid_loss(model: GanModel, real: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    """VAE objective on real images: reconstruction MSE plus per-pixel KL."""
    mu, logvar = model.encoder(real)
    recon = model.decoder(mu + torch.exp(0.5 * logvar) * eps)
    mse = F.mse_loss(recon, real)
    kl = -0.5 * torch.mean(torch.sum(1 + logvar - mu.pow(2) - logvar.exp(), dim=1))
    return mse + kl / real[0].numel()


def generator_loss_terms(
    model: GanModel,
    real: torch.Tensor,
    z: torch.Tensor,
    eps_noise: torch.Tensor,
    eps_recon: torch.Tensor,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Return ``(total, adversarial, hidden)`` generator loss tensors."""
    cfg = model.config
    fake = model.render(model.noise_code(z, eps_noise).detach())
    logits = model.discriminator(fake)
    adv = F.binary_cross_entropy_with_logits(logits, torch.ones_like(logits))
    if cfg.lambda_hid > 0:
        hid = hid_loss(model, real, eps_recon)
    else:
        hid = torch.zeros((), dtype=adv.dtype)
    return cfg.lambda_adv * adv + cfg.lambda_hid * hid, adv, hid


def discriminator_loss(model: GanModel, real: torch.Tensor, fake: torch.Tensor) -> torch.Tensor:
    real_logits = model.discriminator(real)
    fake_logits = model.discriminator(fake)
    real_term = F.binary_cross_entropy_with_logits(real_logits, torch.ones_like(real_logits))
    fake_term = F.binary_cross_entropy_with_logits(fake_logits, torch.zeros_like(fake_logits))
    return 0.5 * (real_term + fake_term)


# =============================================================================
# Training
# =============================================================================


def _class_tensor(class_ds: LabeledDataset, cfg: GanConfig) -> tuple[torch.Tensor, ClassLabel]:
    if len(class_ds) == 0:
        raise EmptyDatasetError("GAN training set is empty")
    labels = {s.label for s in class_ds}
    if len(labels) != 1:
        raise GanError(
            "DE-GAN trains on a single class",
            f"got {sorted(label.value for label in labels)}",
        )
    if class_ds.shape != tuple(cfg.image_shape):
        raise ShapeMismatchError(tuple(cfg.image_shape), class_ds.shape, "GAN training set")
    real = torch.from_numpy(class_ds.images()).permute(0, 3, 1, 2).contiguous()
    if cfg.grayscale:
        real = to_grayscale(real).contiguous()
    return real, labels.pop()


def train_gan(
    class_ds: LabeledDataset,
    cfg: GanConfig,
    run_dir: Path | str | None = None,
) -> GanModel:
    """Train a DE-GAN on the images of one class.

    Args:
        class_ds: Single-class training images.
        cfg: GAN configuration.
        run_dir: Where periodic checkpoints and sample sheets go (if enabled).

    Returns:
        The trained model with one ``EpochLosses`` entry per adversarial epoch.

    Raises:
        GanError: If ``class_ds`` holds more than one class.
        GanDivergedError: If any loss becomes non-finite.
    """
    real_all, label = _class_tensor(class_ds, cfg)
    model = build_gan(cfg, label, class_ds.catalog)
    gen = torch_generator(derive_seed(cfg.seed, "gan-train"))
    out_dir = Path(run_dir) if run_dir is not None else None
    last_checkpoint: str | None = None

    opt_g = torch.optim.Adam(model.generator_parameters(), lr=cfg.learning_rate, betas=ADAM_BETAS)
    opt_d = torch.optim.Adam(
        model.discriminator.parameters(), lr=cfg.learning_rate, betas=ADAM_BETAS
    )
    opt_vae = torch.optim.Adam(
        [*model.encoder.parameters(), *model.decoder.parameters()],
        lr=cfg.learning_rate,
        betas=ADAM_BETAS,
    )
    n = real_all.shape[0]
    for module in model.modules().values():
        module.train()

    for epoch in range(1, cfg.vae_pretrain_epochs + 1):
        order = torch.randperm(n, generator=gen)
        for start in range(0, n, cfg.batch_size):
            real = real_all[order[start : start + cfg.batch_size]]
            loss = hid_loss(model, real, torch.randn(len(real), cfg.latent_dim, generator=gen))
            if not torch.isfinite(loss):
                raise GanDivergedError(0, last_checkpoint)
            opt_vae.zero_grad()
            loss.backward()
            opt_vae.step()
    if cfg.vae_pretrain_epochs:
        logger.info("Pretrained decoder-encoder for %d epochs", cfg.vae_pretrain_epochs)

    for epoch in range(1, cfg.epochs + 1):
        order = torch.randperm(n, generator=gen)
        sums = {"adv": 0.0, "hid": 0.0, "disc": 0.0}
        for start in range(0, n, cfg.batch_size):
            real = real_all[order[start : start + cfg.batch_size]]
            b = len(real)

            z = torch.randn(b, cfg.latent_dim, generator=gen)
            eps = torch.randn(b, cfg.latent_dim, generator=gen)
            with torch.no_grad():
                fake = model.sample_images(z, eps)
            d_loss = discriminator_loss(model, real, fake)
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()

            z = torch.randn(b, cfg.latent_dim, generator=gen)
            eps = torch.randn(b, cfg.latent_dim, generator=gen)
            eps_recon = torch.randn(b, cfg.latent_dim, generator=gen)
            total, adv, hid = generator_loss_terms(model, real, z, eps, eps_recon)
            if not (torch.isfinite(total) and torch.isfinite(d_loss)):
                raise GanDivergedError(epoch, last_checkpoint)
            opt_g.zero_grad()
            total.backward()
            opt_g.step()

            sums["adv"] += float(adv.item()) * b
            sums["hid"] += float(hid.item()) * b
            sums["disc"] += float(d_loss.item()) * b

        adv_mean = sums["adv"] / n
        hid_mean = sums["hid"] / n
        losses = EpochLosses(
            gen=cfg.lambda_adv * adv_mean + cfg.lambda_hid * hid_mean,
            disc=sums["disc"] / n,
            hid=hid_mean,
            adv=adv_mean,
        )
        if not all(math.isfinite(v) for v in losses):
            raise GanDivergedError(epoch, last_checkpoint)
        model.loss_history.append(losses)
        logger.debug(
            "gan epoch %d: gen=%.4f disc=%.4f hid=%.4f", epoch, losses.gen, losses.disc, losses.hid
        )

        if out_dir is not None and cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            path = out_dir / "checkpoints" / f"epoch_{epoch:05d}"
            save_gan(model, path)
            last_checkpoint = str(path)
        if out_dir is not None and cfg.sample_every and epoch % cfg.sample_every == 0:
            from wound_augment.io.plots import plot_sample_sheet

            sheet = generate(model, 16, seed=derive_seed(cfg.seed, "sheet"))
            plot_sample_sheet(sheet.images(), out_dir / "samples" / f"epoch_{epoch:05d}.png")
            for module in model.modules().values():
                module.train()

    model.eval()
    final = model.loss_history[-1]
    logger.info(
        "Trained DE-GAN on %d %s images for %d epochs (gen=%.4f, disc=%.4f)",
        n,
        label.value,
        cfg.epochs,
        final.gen,
        final.disc,
    )
    return model


# =============================================================================
# Sampling and diagnostics
# =============================================================================


def _draw(model: GanModel, n: int, seed: int) -> tuple[torch.Tensor, torch.Tensor]:
    gen = torch_generator(seed)
    z = torch.randn(n, model.config.latent_dim, generator=gen)
    eps = torch.randn(n, model.config.latent_dim, generator=gen)
    return z, eps


def generate_pixels(model: GanModel, n: int, seed: int) -> NDArray[np.float32]:
    """``n`` generated images as an (N, H, W, C) array."""
    if n < 1:
        raise GanError(f"n must be >= 1, got {n}")
    model.eval()
    z, eps = _draw(model, n, seed)
    with torch.no_grad():
        images = model.sample_images(z, eps).clamp(0.0, 1.0)
    return images.permute(0, 2, 3, 1).numpy().astype(np.float32)


def generate(model: GanModel, n: int, seed: int) -> LabeledDataset:
    """``n`` synthetic samples of the model's class, deterministic in ``seed``."""
    pixels = generate_pixels(model, n, seed)
    samples = [
        ImageSample(
            pixels=pixels[i],
            label=model.label,
            source_id=f"gan/{model.label.value}/{seed}/{i:04d}",
            origin=Origin.GAN_SYNTHETIC,
        )
        for i in range(n)
    ]
    return LabeledDataset(tuple(samples), tuple(model.config.image_shape), model.catalog)


@dataclass(frozen=True)
class DiversityReport:
    mean_pairwise_distance: float
    min_pairwise_distance: float
    collapse_flag: bool


def pairwise_diversity(images: NDArray[np.float32], threshold: float) -> DiversityReport:
    """Mean and min of per-pixel mean absolute distance over all image pairs."""
    flat = np.asarray(images, dtype=np.float64).reshape(len(images), -1)
    if len(flat) < 2:
        raise GanError("Diversity needs at least two images")
    i, j = np.triu_indices(len(flat), k=1)
    distances = np.abs(flat[i] - flat[j]).mean(axis=1)
    mean = float(distances.mean())
    return DiversityReport(
        mean_pairwise_distance=mean,
        min_pairwise_distance=float(distances.min()),
        collapse_flag=mean < threshold,
    )


def diversity(model: GanModel, n: int, threshold: float, seed: int = 0) -> DiversityReport:
    """Mode-collapse check over ``n`` generated images."""
    if n < 2:
        raise GanError(f"n must be >= 2, got {n}")
    report = pairwise_diversity(generate_pixels(model, n, seed), threshold)
    if report.collapse_flag:
        logger.warning(
            "Possible mode collapse: mean pairwise distance %.4f < %.4f",
            report.mean_pairwise_distance,
            threshold,
        )
    return report


def _check_batch(model: GanModel, batch: NDArray[np.float32]) -> torch.Tensor:
    array = np.asarray(batch, dtype=np.float32)
    expected = tuple(model.config.image_shape)
    if array.ndim != 4 or tuple(array.shape[1:]) != expected:
        raise ShapeMismatchError(expected, tuple(array.shape[1:]), "DE-GAN input")
    x = torch.from_numpy(array).permute(0, 3, 1, 2).contiguous()
    return to_grayscale(x) if model.config.grayscale else x


def reconstruct(model: GanModel, batch: NDArray[np.float32], seed: int = 0) -> NDArray[np.float32]:
    """Encoder -> sampled latent -> decoder round trip of an (N, H, W, C) batch."""
    x = _check_batch(model, batch)
    model.eval()
    eps = torch.randn(len(x), model.config.latent_dim, generator=torch_generator(seed))
    with torch.no_grad():
        mu, logvar = model.encoder(x)
        out = model.decoder(mu + torch.exp(0.5 * logvar) * eps).clamp(0.0, 1.0)
    return out.permute(0, 2, 3, 1).numpy().astype(np.float32)


def decode(model: GanModel, n: int, seed: int = 0) -> NDArray[np.float32]:
    """VAE decoder output for ``n`` standard-normal latents."""
    model.eval()
    z = torch.randn(n, model.config.latent_dim, generator=torch_generator(seed))
    with torch.no_grad():
        out = model.decoder(z).clamp(0.0, 1.0)
    return out.permute(0, 2, 3, 1).numpy().astype(np.float32)


def discriminator_accuracy(
    model: GanModel,
    real: NDArray[np.float32],
    n_fake: int,
    seed: int = 0,
) -> float:
    """Fraction of real (p > 0.5) and generated (p <= 0.5) images classified correctly."""
    x_real = _check_batch(model, real)
    model.eval()
    z, eps = _draw(model, n_fake, seed)
    with torch.no_grad():
        fake = model.sample_images(z, eps)
        real_ok = int((model.discriminate(x_real) > 0.5).sum().item())
        fake_ok = int((model.discriminate(fake) <= 0.5).sum().item())
    return (real_ok + fake_ok) / (len(x_real) + n_fake)


# =============================================================================
# Persistence
# =============================================================================


def save_gan(model: GanModel, out_dir: Path | str) -> Path:
    """Write ``gan.pt`` (state dicts) and ``gan.json`` (config, loss history)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    states = {name: m.state_dict() for name, m in model.modules().items()}
    torch.save(states, out / GAN_WEIGHTS_FILE)
    info: dict[str, Any] = {
        "config": model.config.model_dump(mode="json"),
        "label": model.label.value,
        "catalog": [label.value for label in model.catalog],
        "loss_history": [loss._asdict() for loss in model.loss_history],
    }
    (out / GAN_INFO_FILE).write_text(json.dumps(info, indent=2, sort_keys=True))
    return out


def load_gan(model_dir: Path | str) -> GanModel:
    """Rebuild a model written by ``save_gan``."""
    src = Path(model_dir)
    if not (src / GAN_INFO_FILE).is_file() or not (src / GAN_WEIGHTS_FILE).is_file():
        raise GanError(f"No saved DE-GAN in {src}")
    info = json.loads((src / GAN_INFO_FILE).read_text())
    cfg = GanConfig.model_validate(info["config"])
    catalog = tuple(ClassLabel(code) for code in info["catalog"])
    model = build_gan(cfg, ClassLabel(info["label"]), catalog)
    states = torch.load(src / GAN_WEIGHTS_FILE, map_location="cpu", weights_only=True)
    for name, module in model.modules().items():
        module.load_state_dict(states[name])
    model.loss_history = [EpochLosses(**entry) for entry in info["loss_history"]]
    return model.eval()
