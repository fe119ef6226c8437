"""Shared fixtures: a small trained recognizer and a tiny dataset.

Session-scoped because training even a toy recognizer takes tens of seconds;
everything derived from fixed seeds so runs are reproducible.
"""

from __future__ import annotations

import pathlib

import pytest

from glyphgen.dataforge import DatasetConfig, FilterRules, build_dataset
from glyphgen.ocr import OcrTrainConfig, save_ocr, train_ocr

TINY_VOCAB = ["cat", "dog", "sun"]


@pytest.fixture(scope="session")
def tiny_ocr():
    cfg = OcrTrainConfig(
        vocabulary=TINY_VOCAB,
        fonts=["sans-bold", "mono-bold"],
        point_sizes=(9, 24),
        renders_per_word=40,
        epochs=120,
        batch_size=16,
        lr=3e-3,
        seed=1,
        target_accuracy=0.95,
    )
    model, log = train_ocr(cfg)
    assert log["final_val_accuracy"] >= 0.9, "tiny recognizer failed to converge"
    return model


@pytest.fixture(scope="session")
def tiny_ocr_ckpt(tiny_ocr, tmp_path_factory) -> pathlib.Path:
    path = tmp_path_factory.mktemp("ocr") / "ocr.pt"
    save_ocr(tiny_ocr, path)
    return path


@pytest.fixture(scope="session")
def tiny_dataset_dir(tmp_path_factory) -> pathlib.Path:
    out = tmp_path_factory.mktemp("dataset")
    cfg = DatasetConfig(
        vocabulary=TINY_VOCAB,
        count=48,
        image_size=32,
        fonts=["sans-bold", "mono-bold"],
        point_size_range=(10, 13),
        text_free_fraction=0.1,
        rules=FilterRules(
            min_side=32, min_text_area_fraction=0.03, min_border_margin_fraction=0.08
        ),
    )
    build_dataset(cfg, out, master_seed=3)
    return out
