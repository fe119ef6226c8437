"""Glyph-aware diffusion training at desk scale.

Subpackages:
    dataforge     synthetic text-in-scene samples with exact masks
    ocr           CTC text recognizer: features, recognition, metrics
    text_encoder  prompt parsing, tokenization strategies, conditioning
    diffusion     schedule, denoiser with attention capture, sampler
    glyph_losses  attention alignment, local MSE, OCR recognition losses
    train_eval    training loop, evaluation, ablations, visualization
"""

__version__ = "0.1.0"
