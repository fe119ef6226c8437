"""Attention heatmap overlays for sampled images.

For each glyph token the final-step cross-attention map is upsampled over
the generated image with value annotations; the raw per-site grids are also
written. Deterministic per (prompt, seed).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import torch
from PIL import Image

from glyphgen.diffusion.sampler import sample
from glyphgen.train_eval.evaluation import encode_prompt
from glyphgen.train_eval.training import TrainedBundle, load_checkpoint


def _save_png(array: np.ndarray, path: Path, upscale: int = 8) -> None:
    img = Image.fromarray((np.clip(array, 0, 1) * 255).round().astype(np.uint8))
    img = img.resize((img.width * upscale, img.height * upscale), Image.NEAREST)
    img.save(path, format="PNG")


def viz_attention(
    ckpt: str | Path | TrainedBundle,
    prompt: str,
    seed: int,
    out_dir: str | Path,
    sample_steps: int | None = None,
) -> list[str]:
    """Write the sampled image plus per-glyph-token heatmap overlays.

    Returns the written paths. A prompt without glyph words produces only
    the sampled image.
    """
    bundle = ckpt if isinstance(ckpt, TrainedBundle) else load_checkpoint(ckpt)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec, _, emb = encode_prompt(bundle, prompt)

    with torch.no_grad():
        images, maps = sample(
            bundle.unet,
            emb.rows,
            bundle.schedule,
            steps=sample_steps,
            seed=seed,
            image_size=bundle.image_size,
            batch=1,
            codec=bundle.codec,
            capture_last=True,
        )
    image = images[0].permute(1, 2, 0).numpy()
    written: list[str] = []
    img_path = out_dir / "sample.png"
    _save_png(image, img_path)
    written.append(str(img_path))

    if not spec.glyph_words or maps is None:
        return written

    for k, word in enumerate(spec.glyph_words):
        positions = emb.glyph_rows[k]
        if not positions:
            continue
        for site in maps.sites():
            res = maps.resolutions[site]
            grid = maps.at(site, 0)[:, :, positions].mean(dim=(0, 2)).view(res).numpy()
            raw_path = out_dir / f"map_{k}_{word}_{site}.png"
            peak = grid.max()
            _save_png(grid / peak if peak > 0 else grid, raw_path)
            written.append(str(raw_path))

            fig, ax = plt.subplots(figsize=(4, 4))
            ax.imshow(image, extent=(0, res[1], res[0], 0))
            hm = ax.imshow(
                grid, cmap="inferno", alpha=0.55, extent=(0, res[1], res[0], 0),
                vmin=0.0, vmax=max(peak, 1e-8),
            )
            fig.colorbar(hm, ax=ax, fraction=0.046)
            ax.set_title(f'"{word}" @ {site}  max={peak:.3f} mean={grid.mean():.3f}')
            ax.set_xticks([])
            ax.set_yticks([])
            overlay_path = out_dir / f"overlay_{k}_{word}_{site}.png"
            fig.savefig(overlay_path, dpi=100, metadata={"Software": None})
            plt.close(fig)
            written.append(str(overlay_path))
    return written
