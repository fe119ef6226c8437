"""Rendering, composition, filtering, and dataset building."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glyphgen.dataforge import (
    CAPTION_TEMPLATES,
    TEXT_FREE_TEMPLATES,
    DataSample,
    DatasetConfig,
    FilterRules,
    SegMask,
    build_dataset,
    compose_scene,
    filter_sample,
    generate_candidate,
    load_dataset,
    make_background,
    mask_from_render,
    render_word,
    rle_decode,
    rle_encode,
    splice_words,
)
from glyphgen.errors import (
    CanvasOverflow,
    ConfigError,
    EmptyMask,
    NonEmptyWordRequired,
    OutOfBounds,
    OverlapError,
    UnsupportedGlyph,
)


class TestRenderWord:
    def test_deterministic(self):
        a = render_word("cat", "sans", 24, (48, 192))
        b = render_word("cat", "sans", 24, (48, 192))
        assert (a.pixels == b.pixels).all()

    def test_empty_word_rejected(self):
        with pytest.raises(NonEmptyWordRequired):
            render_word("", "sans", 24, (48, 192))

    def test_unsupported_codepoint(self):
        with pytest.raises(UnsupportedGlyph):
            render_word("日本", "sans", 24, (48, 192))

    def test_canvas_overflow(self):
        with pytest.raises(CanvasOverflow):
            render_word("diffusion", "sans", 48, (16, 32))

    def test_values_in_unit_interval(self):
        g = render_word("diffusion", "sans", 24, (48, 192))
        assert g.pixels.min() >= 0.0 and g.pixels.max() <= 1.0
        assert g.pixels.max() > 0.9  # ink approaches 1

    def test_ink_fraction_matches_recount(self):
        # independent brute-force pixel count at the 0.5 threshold
        g = render_word("diffusion", "sans", 24, (48, 192))
        mask = mask_from_render(g, 0.5)
        recount = sum(
            1 for r in range(48) for c in range(192) if g.pixels[r, c] >= 0.5
        )
        assert mask.mask.sum() == recount
        assert abs(mask.area_fraction - recount / (48 * 192)) < 1e-9


class TestMaskFromRender:
    def test_empty_raises(self):
        from glyphgen.dataforge.render import GlyphImage

        g = GlyphImage(np.zeros((8, 8), np.float32), "x", "sans", 8)
        with pytest.raises(EmptyMask):
            mask_from_render(g, 0.5)

    def test_single_pixel(self):
        from glyphgen.dataforge.render import GlyphImage

        px = np.zeros((8, 8), np.float32)
        px[3, 5] = 1.0
        m = mask_from_render(GlyphImage(px, "x", "sans", 8), 0.5)
        assert m.bbox == (5, 3, 1, 1)
        assert abs(m.area_fraction - 1 / 64) < 1e-12

    def test_bbox_matches_coordinate_scan(self):
        g = render_word("cat", "sans", 20, (32, 96))
        m = mask_from_render(g, 0.5)
        ys, xs = np.nonzero(g.pixels >= 0.5)
        assert m.bbox == (xs.min(), ys.min(), xs.max() - xs.min() + 1, ys.max() - ys.min() + 1)

    def test_threshold_range_validated(self):
        g = render_word("cat", "sans", 20, (32, 96))
        with pytest.raises(ValueError):
            mask_from_render(g, 1.5)


class TestComposeScene:
    def _bg(self, size=64):
        rng = np.random.default_rng(0)
        return make_background("flat", (size, size), rng)

    def test_zero_placements(self):
        s = compose_scene(self._bg(), [], TEXT_FREE_TEMPLATES[0], rng_seed=1)
        assert s.glyph_words == [] and s.masks == []

    def test_disjoint_masks(self):
        a = render_word("on", "sans", 12, (16, 24))
        b = render_word("off", "sans", 12, (16, 28))
        s = compose_scene(self._bg(), [(a, (4, 4), 1.0), (b, (32, 40), 1.0)],
                          CAPTION_TEMPLATES[0], rng_seed=2)
        assert not (s.masks[0].mask & s.masks[1].mask).any()

    def test_overlap_rejected(self):
        a = render_word("on", "sans", 12, (16, 24))
        with pytest.raises(OverlapError):
            compose_scene(self._bg(), [(a, (4, 4), 1.0), (a, (5, 5), 1.0)],
                          CAPTION_TEMPLATES[0], rng_seed=2)

    def test_out_of_bounds(self):
        a = render_word("on", "sans", 12, (16, 24))
        with pytest.raises(OutOfBounds):
            compose_scene(self._bg(), [(a, (60, 60), 1.0)], CAPTION_TEMPLATES[0], rng_seed=2)

    def test_mask_area_fraction_matches_pixel_count(self):
        g = render_word("box", "sans-bold", 14, (16, 32))
        s = compose_scene(self._bg(), [(g, (20, 20), 1.0)], CAPTION_TEMPLATES[1], rng_seed=3)
        m = s.masks[0]
        assert abs(m.area_fraction - m.mask.sum() / 4096) < 1e-12

    def test_caption_quotes_words(self):
        g = render_word("cat", "sans", 12, (16, 24))
        s = compose_scene(self._bg(), [(g, (10, 10), 1.0)], CAPTION_TEMPLATES[0], rng_seed=4)
        assert '"cat"' in s.caption

    def test_deterministic_per_seed(self):
        g = render_word("cat", "sans", 12, (16, 24))
        s1 = compose_scene(self._bg(), [(g, (10, 10), 1.0)], CAPTION_TEMPLATES[0], rng_seed=5)
        s2 = compose_scene(self._bg(), [(g, (10, 10), 1.0)], CAPTION_TEMPLATES[0], rng_seed=5)
        assert (s1.image == s2.image).all()


class TestSpliceWords:
    def test_single(self):
        assert splice_words(["cat"]) == '"cat"'

    def test_three(self):
        assert splice_words(["a", "b", "c"]) == '"a", "b" and "c"'


def _sample_with(n_words: int, area: float = 0.2, caption: str | None = None) -> DataSample:
    size = 64
    image = np.full((size, size, 3), 0.5, np.float32)
    masks, words = [], []
    side = max(2, int((area * size * size) ** 0.5))
    for i in range(n_words):
        m = np.zeros((size, size), bool)
        x = 8 + (i % 3) * 18
        y = 8 + (i // 3) * 18
        m[y : y + side, x : x + side] = True
        masks.append(SegMask(mask=m, bbox=(x, y, side, side)))
        words.append(f"w{i}")
    if caption is None:
        caption = "a sign with " + " ".join(f'"{w}"' for w in words)
    return DataSample(image=image, caption=caption, glyph_words=words, masks=masks)


class TestFilterSample:
    def test_all_rules_pass(self):
        s = _sample_with(1, area=0.04)
        ok, reasons = filter_sample(s, FilterRules(min_side=64, min_text_area_fraction=0.03))
        assert ok and reasons == []

    def test_too_many_words(self):
        s = _sample_with(6, area=0.01)
        ok, reasons = filter_sample(
            s, FilterRules(min_side=64, min_text_area_fraction=0.001, max_text_count=5)
        )
        assert not ok
        assert any("text_count" in r for r in reasons)

    def test_small_area_rejected(self):
        s = _sample_with(1, area=0.05)
        ok, reasons = filter_sample(s, FilterRules(min_side=64, min_text_area_fraction=0.10))
        assert not ok
        assert any("text_area" in r for r in reasons)

    def test_border_margin(self):
        size = 64
        image = np.full((size, size, 3), 0.5, np.float32)
        m = np.zeros((size, size), bool)
        m[0:10, 0:10] = True
        s = DataSample(image=image, caption='a "w0"', glyph_words=["w0"],
                       masks=[SegMask(mask=m, bbox=(0, 0, 10, 10))])
        ok, reasons = filter_sample(s, FilterRules(min_side=64, min_text_area_fraction=0.01))
        assert not ok and any("border_margin" in r for r in reasons)

    def test_caption_match(self):
        s = _sample_with(1, area=0.04, caption="no words here")
        ok, reasons = filter_sample(s, FilterRules(min_side=64, min_text_area_fraction=0.03))
        assert not ok and any("caption_match" in r for r in reasons)

    def test_min_side(self):
        s = _sample_with(1, area=0.04)
        ok, reasons = filter_sample(s, FilterRules(min_side=128, min_text_area_fraction=0.03))
        assert not ok and any("min_side" in r for r in reasons)

    @given(
        n=st.integers(0, 6),
        area=st.floats(0.01, 0.08),
        max_count=st.integers(1, 6),
        min_area=st.floats(0.001, 0.2),
    )
    @settings(max_examples=40, deadline=None)
    def test_soundness(self, n, area, max_count, min_area):
        # accepted iff reasons is empty, for any rule combination
        s = _sample_with(n, area=area)
        ok, reasons = filter_sample(
            s,
            FilterRules(min_side=64, min_text_area_fraction=min_area, max_text_count=max_count),
        )
        assert ok == (reasons == [])


class TestRle:
    @given(st.integers(0, 2**20 - 1))
    @settings(max_examples=50, deadline=None)
    def test_roundtrip(self, bits):
        mask = np.array([(bits >> i) & 1 for i in range(20)], bool).reshape(4, 5)
        assert (rle_decode(rle_encode(mask), (4, 5)) == mask).all()


class TestBuildDataset:
    CFG = dict(
        vocabulary=["cat", "dog", "sun"],
        count=10,
        image_size=32,
        fonts=["sans-bold"],
        point_size_range=(10, 12),
        rules=FilterRules(min_side=32, min_text_area_fraction=0.03, min_border_margin_fraction=0.08),
    )

    def test_count_zero_rejected(self):
        with pytest.raises(ConfigError):
            DatasetConfig(**{**self.CFG, "count": 0})

    def test_empty_vocabulary_rejected(self):
        with pytest.raises(ConfigError):
            DatasetConfig(**{**self.CFG, "vocabulary": []})

    def test_deterministic_manifests(self, tmp_path):
        cfg = DatasetConfig(**self.CFG)
        build_dataset(cfg, tmp_path / "a", master_seed=7)
        build_dataset(cfg, tmp_path / "b", master_seed=7)
        assert (tmp_path / "a" / "manifest.json").read_bytes() == (
            tmp_path / "b" / "manifest.json"
        ).read_bytes()
        img = "data/sample_00000.png"
        assert (tmp_path / "a" / img).read_bytes() == (tmp_path / "b" / img).read_bytes()

    def test_bookkeeping(self, tmp_path):
        cfg = DatasetConfig(**self.CFG)
        manifest = build_dataset(cfg, tmp_path, master_seed=1)
        stats = manifest.stats
        assert stats["accepted"] + stats["rejected"] == stats["attempted"]
        assert stats["accepted"] == 10

    def test_candidates_accepted_pass_filter(self, tmp_path):
        cfg = DatasetConfig(**self.CFG)
        manifest = build_dataset(cfg, tmp_path, master_seed=1)
        for sample in load_dataset(manifest.path):
            ok, reasons = filter_sample(sample, cfg.rules)
            assert ok, reasons

    def test_roundtrip_masks(self, tmp_path):
        cfg = DatasetConfig(**self.CFG)
        manifest = build_dataset(cfg, tmp_path, master_seed=2)
        samples = load_dataset(manifest.path)
        for s in samples:
            assert len(s.glyph_words) == len(s.masks)
            for m in s.masks:
                assert m.mask.any()
                assert abs(m.area_fraction - m.mask.mean()) < 1e-9

    def test_candidate_rng_isolated(self):
        cfg = DatasetConfig(**self.CFG)
        a = generate_candidate(cfg, 7, 3)
        b = generate_candidate(cfg, 7, 3)
        assert (a.image == b.image).all() and a.caption == b.caption
