"""CTC text recognizer: glyph features, recognition, training, metrics."""

from glyphgen.ocr.alphabet import Alphabet
from glyphgen.ocr.ctc import ctc_loss, ctc_loss_batch, greedy_decode, min_frames
from glyphgen.ocr.metrics import OcrMetrics, eval_ocr_metrics, match_count
from glyphgen.ocr.model import (
    OCRModel,
    extract_features,
    load_ocr,
    prepare_image,
    recognize,
    resize_to_input,
    save_ocr,
)
from glyphgen.ocr.train import (
    OcrTrainConfig,
    build_render_set,
    exact_word_accuracy,
    train_ocr,
)

__all__ = [
    "Alphabet",
    "OCRModel",
    "OcrMetrics",
    "OcrTrainConfig",
    "build_render_set",
    "ctc_loss",
    "ctc_loss_batch",
    "eval_ocr_metrics",
    "exact_word_accuracy",
    "extract_features",
    "greedy_decode",
    "load_ocr",
    "match_count",
    "min_frames",
    "prepare_image",
    "recognize",
    "resize_to_input",
    "save_ocr",
    "train_ocr",
]
