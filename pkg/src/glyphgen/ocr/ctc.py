"""CTC loss and greedy decoding.

The loss is the forward algorithm over the blank-extended label sequence,
written in log space with plain tensor ops so gradients flow to the input
log-probability grid. A large negative constant stands in for log(0); true
-inf would poison gradients through logsumexp.
"""

from __future__ import annotations

import torch

from glyphgen.errors import InfeasibleTarget, ShapeMismatch
from glyphgen.ocr.alphabet import Alphabet


def _neg(dtype: torch.dtype) -> float:
    return float(torch.finfo(dtype).min / 4)


def min_frames(target: str) -> int:
    """Shortest frame count that admits an alignment: repeats need a blank."""
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def ctc_loss(log_probs: torch.Tensor, target: str, alphabet: Alphabet) -> torch.Tensor:
    """-log P(target | log_probs) summed over all monotone alignments.

    `log_probs` is a (T, num_classes) grid with rows normalized in log space.
    Differentiable with respect to `log_probs`.
    """
    if log_probs.dim() != 2 or log_probs.shape[1] != alphabet.num_classes:
        raise ShapeMismatch(
            f"expected (T, {alphabet.num_classes}) grid, got {tuple(log_probs.shape)}"
        )
    return ctc_loss_batch(log_probs.unsqueeze(0), [target], alphabet)[0]


def ctc_loss_batch(
    log_probs: torch.Tensor, targets: list[str], alphabet: Alphabet
) -> torch.Tensor:
    """Per-item CTC losses for a (B, T, num_classes) grid batch."""
    if log_probs.dim() != 3 or log_probs.shape[2] != alphabet.num_classes:
        raise ShapeMismatch(
            f"expected (B, T, {alphabet.num_classes}) grid, got {tuple(log_probs.shape)}"
        )
    B, T, _ = log_probs.shape
    if len(targets) != B:
        raise ShapeMismatch(f"{len(targets)} targets for batch of {B}")
    for tgt in targets:
        need = min_frames(tgt)
        if need > T:
            raise InfeasibleTarget(f"{tgt!r} needs >= {need} frames, grid has {T}")

    dtype = log_probs.dtype
    neg = _neg(dtype)
    blank = alphabet.blank_index
    encoded = [alphabet.encode(t) for t in targets]
    lengths = [len(e) for e in encoded]
    s_max = 2 * max(lengths, default=0) + 1

    # blank-extended labels, padded with blanks past each item's length
    ext = torch.full((B, s_max), blank, dtype=torch.long)
    for b, classes in enumerate(encoded):
        for i, c in enumerate(classes):
            ext[b, 2 * i + 1] = c
    # the s-2 skip is legal only onto a non-blank that differs from ext[s-2]
    allow_skip = torch.zeros((B, s_max), dtype=torch.bool)
    for b, classes in enumerate(encoded):
        for i, c in enumerate(classes):
            s = 2 * i + 1
            if s >= 2 and ext[b, s - 2] != c:
                allow_skip[b, s] = True

    emit = log_probs.gather(2, ext.unsqueeze(1).expand(B, T, s_max))  # (B, T, S)

    alpha = torch.full((B, s_max), neg, dtype=dtype)
    alpha[:, 0] = 0.0
    if s_max > 1:
        has_label = torch.tensor([n >= 1 for n in lengths])
        alpha[:, 1] = torch.where(has_label, torch.zeros(B, dtype=dtype), alpha[:, 1])
    alpha = alpha + emit[:, 0, :]

    pad = torch.full((B, 1), neg, dtype=dtype)
    for t in range(1, T):
        paths = [alpha, torch.cat([pad, alpha[:, :-1]], dim=1)]
        if s_max >= 3:
            skip = torch.cat([pad, pad, alpha[:, :-2]], dim=1)
            paths.append(torch.where(allow_skip, skip, torch.full_like(skip, neg)))
        alpha = torch.logsumexp(torch.stack(paths), dim=0) + emit[:, t, :]

    # a valid path ends on the final blank or the final label
    finals = []
    for b, n in enumerate(lengths):
        last = 2 * n
        if n >= 1:
            tail = torch.logsumexp(torch.stack([alpha[b, last], alpha[b, last - 1]]), dim=0)
        else:
            tail = alpha[b, 0]
        finals.append(-tail)
    return torch.stack(finals)


def greedy_decode(log_probs: torch.Tensor, alphabet: Alphabet) -> tuple[str, float]:
    """Collapse per-frame argmaxes: merge repeats, drop blanks.

    Confidence is the mean per-frame max probability.
    """
    if log_probs.dim() != 2 or log_probs.shape[1] != alphabet.num_classes:
        raise ShapeMismatch(f"expected (T, C) grid, got {tuple(log_probs.shape)}")
    with torch.no_grad():
        best = log_probs.argmax(dim=1)
        conf = float(log_probs.max(dim=1).values.exp().mean())
    chars = []
    prev = -1
    for cls in best.tolist():
        if cls != prev and cls != alphabet.blank_index:
            chars.append(alphabet.symbols[cls])
        prev = cls
    return "".join(chars), conf
