"""Synthetic dataset builder: renders, composes, filters, and writes to disk.

Layout under the output directory:

    manifest.json            paths, filter statistics, config echo
    data/sample_00000.png    lossless image
    data/sample_00000.json   caption, glyph words, bbox + RLE mask per word,
                             provenance, candidate seed

Candidate i draws all of its randomness from (master_seed, i), so builds are
reproducible and embarrassingly parallel in principle; this implementation
generates sequentially and the manifest is the single serialization point.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from glyphgen.dataforge.compose import (
    BACKGROUND_KINDS,
    CAPTION_TEMPLATES,
    TEXT_FREE_TEMPLATES,
    DataSample,
    FilterRules,
    compose_scene,
    filter_sample,
    make_background,
)
from glyphgen.dataforge.render import SegMask, available_fonts, fit_point_size, render_word
from glyphgen.errors import ConfigError, EmptyMask, ExhaustedRetries, OutOfBounds, OverlapError

MANIFEST_VERSION = 1


@dataclass
class DatasetConfig:
    vocabulary: list[str]
    count: int
    image_size: int = 64
    fonts: list[str] = field(default_factory=lambda: ["sans", "sans-bold", "serif"])
    point_size_range: tuple[int, int] = (14, 20)
    words_per_sample: tuple[int, int] = (1, 1)
    text_free_fraction: float = 0.0
    backgrounds: list[str] = field(default_factory=lambda: list(BACKGROUND_KINDS))
    rules: FilterRules = field(default_factory=FilterRules)
    retry_factor: int = 20
    mask_threshold: float = 0.5

    def __post_init__(self):
        if not self.vocabulary:
            raise ConfigError("vocabulary must be non-empty")
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        unknown = set(self.fonts) - set(available_fonts())
        if unknown:
            raise ConfigError(f"unknown fonts: {sorted(unknown)}")
        if self.words_per_sample[0] < 0 or self.words_per_sample[0] > self.words_per_sample[1]:
            raise ConfigError("words_per_sample must be a (lo, hi) pair with 0 <= lo <= hi")


def rle_encode(mask: np.ndarray) -> list[int]:
    """Row-major run lengths, starting with the leading zero-run (may be 0)."""
    flat = mask.reshape(-1).astype(np.int8)
    changes = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return [int(r) for r in runs]


def rle_decode(runs: list[int], shape: tuple[int, int]) -> np.ndarray:
    total = shape[0] * shape[1]
    flat = np.zeros(total, dtype=bool)
    pos, value = 0, False
    for run in runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    if pos != total:
        raise ValueError(f"RLE covers {pos} pixels, expected {total}")
    return flat.reshape(shape)


def _place_words(
    cfg: DatasetConfig, words: list[str], rng: np.random.Generator
) -> list[tuple]:
    """Choose fonts, sizes and non-overlapping in-margin positions for words."""
    size = cfg.image_size
    margin = int(np.ceil(cfg.rules.min_border_margin_fraction * size)) + 1
    free = (size - 2 * margin, size - 2 * margin)
    placements = []
    taken: list[tuple[int, int, int, int]] = []
    for word in words:
        font_id = str(rng.choice(cfg.fonts))
        lo, hi = cfg.point_size_range
        hi = min(hi, fit_point_size(word, font_id, free, margin=0))
        if hi < lo:
            raise OutOfBounds(f"{word!r} does not fit inside margins at {lo}pt")
        point = int(rng.integers(lo, hi + 1))
        glyph = render_word(word, font_id, point, canvas=_tight_canvas(word, font_id, point))
        gh, gw = glyph.pixels.shape
        lo_x, hi_x = margin, size - margin - gw
        lo_y, hi_y = margin, size - margin - gh
        if hi_x < lo_x or hi_y < lo_y:
            raise OutOfBounds(f"{word!r} at {point}pt does not fit inside margins")
        pos = None
        for _ in range(20):
            x = int(rng.integers(lo_x, hi_x + 1))
            y = int(rng.integers(lo_y, hi_y + 1))
            box = (x, y, gw, gh)
            if all(not _boxes_overlap(box, t) for t in taken):
                pos = (x, y)
                taken.append(box)
                break
        if pos is None:
            raise OverlapError(f"could not place {word!r} without overlap")
        placements.append((glyph, pos, 1.0))
    return placements


def _tight_canvas(word: str, font_id: str, point: int) -> tuple[int, int]:
    from glyphgen.dataforge.render import _load_font  # registry helper

    left, top, right, bottom = _load_font(font_id, point).getbbox(word)
    return (bottom - top + 2, right - left + 2)


def _boxes_overlap(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return ax < bx + bw and bx < ax + aw and ay < by + bh and by < ay + ah


def generate_candidate(cfg: DatasetConfig, master_seed: int, index: int) -> DataSample:
    """Deterministically build candidate `index` from (master_seed, index)."""
    rng = np.random.default_rng(np.random.SeedSequence([master_seed, index]))
    size = (cfg.image_size, cfg.image_size)
    bg_kind = str(rng.choice(cfg.backgrounds))
    background = make_background(bg_kind, size, rng)
    compose_seed = int(rng.integers(0, 2**31))

    text_free = rng.random() < cfg.text_free_fraction
    if text_free:
        template_id = int(rng.integers(len(TEXT_FREE_TEMPLATES)))
        template = TEXT_FREE_TEMPLATES[template_id]
        placements = []
    else:
        template_id = int(rng.integers(len(CAPTION_TEMPLATES)))
        template = CAPTION_TEMPLATES[template_id]
        lo, hi = cfg.words_per_sample
        n_words = int(rng.integers(max(lo, 1), hi + 1))
        n_words = min(n_words, len(cfg.vocabulary))
        words = [str(w) for w in rng.choice(cfg.vocabulary, size=n_words, replace=False)]
        placements = _place_words(cfg, words, rng)

    provenance = {
        "template_id": template_id,
        "text_free": bool(text_free),
        "background_id": bg_kind,
        "seed": index,
    }
    return compose_scene(
        background,
        placements,
        template,
        rng_seed=compose_seed,
        mask_threshold=cfg.mask_threshold,
        provenance=provenance,
    )


def _sample_record(sample: DataSample, index: int) -> dict:
    h, w, _ = sample.image.shape
    return {
        "caption": sample.caption,
        "glyph_words": sample.glyph_words,
        "image_size": [h, w],
        "masks": [
            {
                "bbox": list(m.bbox),
                "rle": rle_encode(m.mask),
                "area_fraction": m.area_fraction,
            }
            for m in sample.masks
        ],
        "provenance": sample.provenance,
        "seed": index,
    }


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


@dataclass
class DatasetManifest:
    path: Path
    master_seed: int
    samples: list[dict]
    stats: dict

    @classmethod
    def load(cls, manifest_path: str | Path) -> "DatasetManifest":
        manifest_path = Path(manifest_path)
        raw = json.loads(manifest_path.read_text())
        if raw.get("format_version") != MANIFEST_VERSION:
            raise ConfigError(f"unsupported manifest version {raw.get('format_version')}")
        return cls(
            path=manifest_path,
            master_seed=raw["master_seed"],
            samples=raw["samples"],
            stats=raw["stats"],
        )


def build_dataset(cfg: DatasetConfig, out_dir: str | Path, master_seed: int = 0) -> DatasetManifest:
    """Generate `cfg.count` accepted samples under `out_dir`.

    Candidates are attempted in index order until enough pass the filter;
    raises ExhaustedRetries past count * retry_factor attempts.
    """
    out_dir = Path(out_dir)
    data_dir = out_dir / "data"
    data_dir.mkdir(parents=True, exist_ok=True)

    accepted: list[dict] = []
    reject_reasons: dict[str, int] = {}
    attempted = 0
    rejected = 0
    max_attempts = cfg.count * cfg.retry_factor

    while len(accepted) < cfg.count:
        if attempted >= max_attempts:
            raise ExhaustedRetries(
                f"{attempted} candidates produced only {len(accepted)}/{cfg.count} accepted samples"
            )
        index = attempted
        attempted += 1
        try:
            sample = generate_candidate(cfg, master_seed, index)
        except (OutOfBounds, OverlapError, EmptyMask) as exc:
            rejected += 1
            key = f"compose:{type(exc).__name__}"
            reject_reasons[key] = reject_reasons.get(key, 0) + 1
            continue

        ok, reasons = filter_sample(sample, cfg.rules)
        if not ok:
            rejected += 1
            for reason in reasons:
                key = reason.split(":")[0]
                reject_reasons[key] = reject_reasons.get(key, 0) + 1
            continue

        n = len(accepted)
        image_rel = f"data/sample_{n:05d}.png"
        meta_rel = f"data/sample_{n:05d}.json"
        img = Image.fromarray((sample.image * 255.0).round().astype(np.uint8), mode="RGB")
        img.save(out_dir / image_rel, format="PNG")
        _write_json(out_dir / meta_rel, _sample_record(sample, index))
        accepted.append({"image": image_rel, "meta": meta_rel, "candidate": index})

    stats = {
        "attempted": attempted,
        "accepted": len(accepted),
        "rejected": rejected,
        "reject_reasons": reject_reasons,
    }
    manifest = {
        "format_version": MANIFEST_VERSION,
        "master_seed": master_seed,
        "config": _config_dict(cfg),
        "samples": accepted,
        "stats": stats,
    }
    manifest_path = out_dir / "manifest.json"
    _write_json(manifest_path, manifest)
    return DatasetManifest(
        path=manifest_path, master_seed=master_seed, samples=accepted, stats=stats
    )


def _config_dict(cfg: DatasetConfig) -> dict:
    d = asdict(cfg)
    d["point_size_range"] = list(d["point_size_range"])
    d["words_per_sample"] = list(d["words_per_sample"])
    return d


def load_sample(out_dir: str | Path, record: dict) -> DataSample:
    """Rehydrate one sample (image from PNG, masks from RLE) from its record."""
    out_dir = Path(out_dir)
    image = np.asarray(Image.open(out_dir / record["image"]).convert("RGB"), dtype=np.float32) / 255.0
    meta = json.loads((out_dir / record["meta"]).read_text())
    shape = tuple(meta["image_size"])
    masks = []
    for m in meta["masks"]:
        mask = rle_decode(m["rle"], shape)  # type: ignore[arg-type]
        masks.append(SegMask(mask=mask, bbox=tuple(m["bbox"])))
    return DataSample(
        image=image,
        caption=meta["caption"],
        glyph_words=list(meta["glyph_words"]),
        masks=masks,
        provenance=meta.get("provenance", {}),
    )


def load_dataset(manifest_path: str | Path) -> list[DataSample]:
    manifest = DatasetManifest.load(manifest_path)
    root = manifest.path.parent
    return [load_sample(root, rec) for rec in manifest.samples]
