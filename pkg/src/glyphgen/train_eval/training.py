"""Training loop binding data, encoder, denoiser, and the glyph losses.

Runs are deterministic per (config, seed): data order, timestep draws, and
noise draws all come from explicitly seeded generators, and every learnable
module is initialized under a fixed torch seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch

from glyphgen.dataforge.compose import DataSample
from glyphgen.dataforge.dataset import DatasetManifest, load_dataset
from glyphgen.diffusion.codec import IdentityCodec, TinyAutoencoder, CodecTrainConfig, train_codec
from glyphgen.diffusion.ops import estimate_x0, mse_loss
from glyphgen.diffusion.schedule import NoiseSchedule, make_schedule, q_sample
from glyphgen.diffusion.unet import DenoiserModel
from glyphgen.errors import Diverged, MissingOCR
from glyphgen.glyph_losses import (
    LossWeights,
    _local_mse_terms,
    attention_alignment_loss,
    total_loss,
    word_crops,
)
from glyphgen.ocr.ctc import ctc_loss_batch
from glyphgen.ocr.model import OCRModel, load_ocr
from glyphgen.text_encoder.bpe import Vocabulary, train_bpe
from glyphgen.text_encoder.encoder import GlyphProjector, TextEncoderModel, encode_batch, glyph_feature
from glyphgen.text_encoder.prompts import PromptSpec, parse_prompt
from glyphgen.text_encoder.tokenizer import WHOLE_WORD, TokenSequence, tokenize
from glyphgen.train_eval.config import TrainConfig, config_to_dict

CKPT_VERSION = 1


@dataclass
class TrainingData:
    samples: list[DataSample]
    images: torch.Tensor  # (N, 3, H, W) in [0, 1]
    prompts: list[PromptSpec]
    image_size: int


def load_training_data(dataset_dir: str | Path) -> TrainingData:
    manifest = DatasetManifest.load(Path(dataset_dir) / "manifest.json")
    samples = load_dataset(manifest.path)
    images = torch.stack(
        [torch.from_numpy(s.image).permute(2, 0, 1).contiguous() for s in samples]
    )
    prompts = [parse_prompt(s.caption) for s in samples]
    return TrainingData(
        samples=samples, images=images, prompts=prompts, image_size=images.shape[-1]
    )


def build_vocab(prompts: list[PromptSpec], merges: int) -> Vocabulary:
    corpus = [p.caption_without_quotes() for p in prompts]
    return train_bpe(corpus, num_merges=merges)


@dataclass
class TrainedBundle:
    """Everything a checkpoint stores, live."""

    config: TrainConfig
    schedule: NoiseSchedule
    unet: DenoiserModel
    text_encoder: TextEncoderModel
    projector: GlyphProjector | None
    codec: IdentityCodec | TinyAutoencoder
    vocab: Vocabulary
    ocr: OCRModel | None
    image_size: int


def _needs_ocr(cfg: TrainConfig) -> bool:
    return cfg.losses.enable_ocr or cfg.strategy == WHOLE_WORD


def build_models(cfg: TrainConfig, vocab: Vocabulary, image_size: int) -> TrainedBundle:
    torch.manual_seed(cfg.seed)
    ocr = None
    if _needs_ocr(cfg):
        if not cfg.ocr_checkpoint or not Path(cfg.ocr_checkpoint).exists():
            raise MissingOCR(
                "config enables the OCR loss or whole-word strategy but "
                f"ocr_checkpoint {cfg.ocr_checkpoint!r} does not exist"
            )
        ocr = load_ocr(cfg.ocr_checkpoint)
        for p in ocr.parameters():  # frozen: recognition gradients stop at x0'
            p.requires_grad_(False)

    mc = cfg.model
    text_encoder = TextEncoderModel(
        vocab_size=len(vocab),
        embed_dim=mc.embed_dim,
        depth=mc.encoder_depth,
        heads=mc.encoder_heads,
        max_seq_len=mc.max_seq_len,
    )
    projector = None
    if cfg.strategy == WHOLE_WORD:
        if ocr is None:
            raise MissingOCR("whole-word strategy needs a trained recognizer")
        projector = GlyphProjector(ocr.feature_dim, mc.embed_dim)

    codec: IdentityCodec | TinyAutoencoder
    latent_channels = 3
    if mc.codec == "tiny-autoencoder":
        codec = TinyAutoencoder()
        latent_channels = codec.latent_channels
    else:
        codec = IdentityCodec()

    unet = DenoiserModel(
        in_channels=latent_channels,
        base_channels=mc.base_channels,
        channel_mults=mc.channel_mults,
        context_dim=mc.embed_dim,
        heads=mc.heads,
    )
    schedule = make_schedule(
        cfg.schedule.T, cfg.schedule.kind, cfg.schedule.beta_start, cfg.schedule.beta_end
    )
    return TrainedBundle(
        config=cfg,
        schedule=schedule,
        unet=unet,
        text_encoder=text_encoder,
        projector=projector,
        codec=codec,
        vocab=vocab,
        ocr=ocr,
        image_size=image_size,
    )


def save_checkpoint(bundle: TrainedBundle, path: str | Path, step: int) -> None:
    payload = {
        "format_version": CKPT_VERSION,
        "step": step,
        "config": config_to_dict(bundle.config),
        "schedule": {
            "T": bundle.schedule.T,
            "kind": bundle.schedule.kind,
            "beta_start": bundle.config.schedule.beta_start,
            "beta_end": bundle.config.schedule.beta_end,
        },
        "image_size": bundle.image_size,
        "vocab_lines": bundle.vocab.to_lines(),
        "unet": bundle.unet.state_dict(),
        "text_encoder": bundle.text_encoder.state_dict(),
        "projector": bundle.projector.state_dict() if bundle.projector else None,
        "codec_mode": bundle.codec.mode,
        "codec": bundle.codec.state_dict() if isinstance(bundle.codec, TinyAutoencoder) else None,
        "ocr_checkpoint": bundle.config.ocr_checkpoint,
    }
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> TrainedBundle:
    from glyphgen.train_eval.config import dataclass_from_dict

    ckpt = torch.load(path, map_location="cpu", weights_only=False)
    if ckpt.get("format_version") != CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {ckpt.get('format_version')}")
    cfg = dataclass_from_dict(TrainConfig, ckpt["config"])
    vocab = Vocabulary.from_lines(ckpt["vocab_lines"])
    bundle = build_models(cfg, vocab, ckpt["image_size"])
    bundle.unet.load_state_dict(ckpt["unet"])
    bundle.text_encoder.load_state_dict(ckpt["text_encoder"])
    if ckpt["projector"] is not None and bundle.projector is not None:
        bundle.projector.load_state_dict(ckpt["projector"])
    if ckpt["codec"] is not None and isinstance(bundle.codec, TinyAutoencoder):
        bundle.codec.load_state_dict(ckpt["codec"])
    bundle.unet.eval()
    bundle.text_encoder.eval()
    return bundle


def train(cfg: TrainConfig) -> tuple[Path, list[dict]]:
    """Optimize the denoiser (+ text encoder + projector) under the configured
    objective. Returns (checkpoint path, training log entries).
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = load_training_data(cfg.dataset_dir)
    vocab = build_vocab(data.prompts, cfg.bpe_merges)
    bundle = build_models(cfg, vocab, data.image_size)
    s = bundle.schedule
    weights = LossWeights(cfg.losses.lambda1, cfg.losses.lambda2)

    if isinstance(bundle.codec, TinyAutoencoder):
        codec, _ = train_codec(data.images, CodecTrainConfig(seed=cfg.seed))
        bundle.codec = codec
        for p in codec.parameters():
            p.requires_grad_(False)

    token_seqs: list[TokenSequence] = [
        tokenize(p, cfg.strategy, vocab, cfg.model.max_seq_len) for p in data.prompts
    ]
    feature_cache: dict[str, torch.Tensor] = {}
    if cfg.strategy == WHOLE_WORD:
        for p in data.prompts:
            for word in p.glyph_words:
                glyph_feature(bundle.ocr, word, feature_cache)

    params = list(bundle.unet.parameters()) + list(bundle.text_encoder.parameters())
    if bundle.projector is not None:
        params += list(bundle.projector.parameters())
    opt = torch.optim.Adam(params, lr=cfg.lr)

    with torch.no_grad():
        latents = bundle.codec.encode(data.images)
    n = latents.shape[0]
    g_data = torch.Generator().manual_seed(cfg.seed * 7919 + 1)
    g_noise = torch.Generator().manual_seed(cfg.seed * 7919 + 2)
    g_time = torch.Generator().manual_seed(cfg.seed * 7919 + 3)

    capture = cfg.losses.enable_attn
    log: list[dict] = []
    log_path = out_dir / "train_log.jsonl"
    log_file = log_path.open("w")
    order = torch.randperm(n, generator=g_data)
    cursor = 0

    bundle.unet.train()
    bundle.text_encoder.train()
    for step in range(cfg.steps):
        if cursor + cfg.batch_size > n:
            order = torch.randperm(n, generator=g_data)
            cursor = 0
        idx = order[cursor : cursor + cfg.batch_size]
        cursor += cfg.batch_size

        batch_prompts = [data.prompts[i] for i in idx.tolist()]
        batch_seqs = [token_seqs[i] for i in idx.tolist()]
        batch_samples = [data.samples[i] for i in idx.tolist()]
        z0 = latents[idx]
        t = torch.randint(1, s.T + 1, (len(idx),), generator=g_time)
        eps = torch.randn(z0.shape, generator=g_noise)
        z_t = q_sample(z0, t, eps, s)

        ctx, pad_mask, glyph_rows = encode_batch(
            batch_prompts,
            batch_seqs,
            bundle.ocr,
            bundle.projector,
            bundle.text_encoder,
            vocab,
            feature_cache,
        )
        eps_hat, maps = bundle.unet(z_t, t, ctx, ctx_pad=pad_mask, capture=capture)

        mse = mse_loss(eps_hat, eps)
        B = len(batch_samples)
        per_word: list[tuple] = []

        attn_terms, loc_terms = [], []
        for b, sample in enumerate(batch_samples):
            if not sample.glyph_words:
                continue
            if cfg.losses.enable_attn:
                attn_terms.append(
                    attention_alignment_loss(
                        maps,
                        sample.masks,
                        glyph_rows[b],
                        layers=cfg.losses.attn_layers,
                        normalization=cfg.losses.ca_normalization,
                        batch_index=b,
                    )
                )
            if cfg.losses.enable_loc:
                loc_b, loc_detail = _local_mse_terms(eps_hat[b], eps[b], sample.masks)
                loc_terms.append(loc_b)
                for k, w_k, term in loc_detail:
                    per_word.append([sample.glyph_words[k], w_k, float(term.detach()), None])

        ocr = torch.zeros(())
        if cfg.losses.enable_ocr:
            x0p = estimate_x0(z_t, t, eps_hat, s, bundle.codec)
            crops, crop_words, crop_owner = [], [], []
            ab = [float(s.alpha_bar_at(int(tb))) for tb in t]
            n_words = [0] * B
            for b, sample in enumerate(batch_samples):
                if not sample.glyph_words or ab[b] == 0.0:
                    continue
                for k, c in word_crops(x0p[b], sample.masks, sample.glyph_words, cfg.losses.ocr_crop):
                    crops.append(c)
                    crop_words.append(sample.glyph_words[k])
                    crop_owner.append(b)
                    n_words[b] += 1
            if crops:
                log_probs = bundle.ocr(torch.cat(crops))
                ctcs = ctc_loss_batch(log_probs, crop_words, bundle.ocr.alphabet)
                item_terms = []
                for i, b in enumerate(crop_owner):
                    item_terms.append(ab[b] / n_words[b] * ctcs[i])
                    per_word.append([crop_words[i], None, None, float(ctcs[i].detach())])
                ocr = torch.stack(item_terms).sum() / B

        attn = torch.stack(attn_terms).sum() / B if attn_terms else torch.zeros(())
        loc = torch.stack(loc_terms).sum() / B if loc_terms else torch.zeros(())
        report = total_loss(mse, attn, loc, ocr, weights, per_word)

        if not torch.isfinite(report.total):
            dump = out_dir / f"diverged_step{step}.pt"
            save_checkpoint(bundle, dump, step)
            log_file.close()
            raise Diverged(f"non-finite loss at step {step}; state dumped to {dump}")

        lr_scale = min(1.0, (step + 1) / max(cfg.warmup_steps, 1))
        for group in opt.param_groups:
            group["lr"] = cfg.lr * lr_scale
        opt.zero_grad()
        report.total.backward()
        opt.step()

        if step % cfg.log_every == 0 or step == cfg.steps - 1:
            entry = {"step": step, "lr": cfg.lr * lr_scale, **report.as_floats()}
            log.append(entry)
            log_file.write(json.dumps(entry, sort_keys=True) + "\n")
            log_file.flush()
        if cfg.checkpoint_every and step and step % cfg.checkpoint_every == 0:
            save_checkpoint(bundle, out_dir / f"ckpt_step{step:06d}.pt", step)

    log_file.close()
    ckpt_path = out_dir / "ckpt.pt"
    bundle.unet.eval()
    bundle.text_encoder.eval()
    save_checkpoint(bundle, ckpt_path, cfg.steps)
    return ckpt_path, log
