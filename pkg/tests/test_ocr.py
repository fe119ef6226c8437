"""Recognizer: CTC loss against a brute-force oracle, decoding, features,
training quality, and evaluation metrics."""

import itertools
import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from glyphgen.dataforge import render_word
from glyphgen.errors import (
    CoverageError,
    InfeasibleTarget,
    UnknownSymbol,
    UntrainedModel,
)
from glyphgen.ocr import (
    Alphabet,
    OCRModel,
    OcrTrainConfig,
    ctc_loss,
    ctc_loss_batch,
    eval_ocr_metrics,
    extract_features,
    greedy_decode,
    load_ocr,
    min_frames,
    recognize,
    save_ocr,
    train_ocr,
)


def brute_force_ctc(log_probs: torch.Tensor, target: str, alphabet: Alphabet) -> float:
    """Enumerate every length-T class path, collapse, and sum probabilities."""
    T, C = log_probs.shape
    probs = log_probs.double().exp()
    total = 0.0
    for path in itertools.product(range(C), repeat=T):
        out, prev = [], -1
        for c in path:
            if c != prev and c != alphabet.blank_index:
                out.append(alphabet.symbols[c])
            prev = c
        if "".join(out) == target:
            p = 1.0
            for t, c in enumerate(path):
                p *= float(probs[t, c])
            total += p
    return -math.log(total) if total > 0 else math.inf


class TestAlphabet:
    def test_blank_is_last_class(self):
        ab = Alphabet("abc")
        assert ab.blank_index == 3 and ab.num_classes == 4

    def test_unique_symbols(self):
        with pytest.raises(ValueError):
            Alphabet("aab")

    def test_encode_unknown(self):
        with pytest.raises(UnknownSymbol):
            Alphabet("abc").encode("abz")

    def test_from_vocabulary(self):
        ab = Alphabet.from_vocabulary(["cat", "dog"])
        assert ab.symbols == "acdgot"


class TestCtcLoss:
    def test_uniform_single_frame(self):
        # one frame, 5 classes: the only alignment is (a); P = 1/5
        ab = Alphabet("abcd")
        lp = torch.full((1, 5), math.log(1 / 5))
        assert math.isclose(float(ctc_loss(lp, "a", ab)), math.log(5), rel_tol=1e-6)

    def test_uniform_two_frames(self):
        # alignments {(a,a), (a,-), (-,a)}: P = 3/9
        ab = Alphabet("ab")
        lp = torch.full((2, 3), math.log(1 / 3))
        assert math.isclose(float(ctc_loss(lp, "a", ab)), math.log(3), rel_tol=1e-6)

    def test_certain_alignment_is_free(self):
        ab = Alphabet("ab")
        lp = torch.full((3, 3), -40.0)
        lp[0, 0] = lp[1, 2] = lp[2, 1] = 0.0  # a, blank, b
        assert float(ctc_loss(lp, "ab", ab)) == pytest.approx(0.0, abs=1e-6)

    def test_infeasible_target(self):
        ab = Alphabet("ab")
        lp = torch.full((1, 3), math.log(1 / 3))
        with pytest.raises(InfeasibleTarget):
            ctc_loss(lp, "ab", ab)
        with pytest.raises(InfeasibleTarget):
            ctc_loss(torch.full((2, 3), math.log(1 / 3)), "aa", ab)  # repeat needs a blank

    def test_unknown_symbol(self):
        ab = Alphabet("ab")
        with pytest.raises(UnknownSymbol):
            ctc_loss(torch.full((2, 3), math.log(1 / 3)), "z", ab)

    def test_min_frames(self):
        assert min_frames("ab") == 2
        assert min_frames("aa") == 3
        assert min_frames("") == 0

    @given(st.data())
    @settings(max_examples=120, deadline=None)
    def test_oracle_equivalence(self, data):
        # all instances with T <= 5, |alphabet| <= 4 classes, |target| <= 3
        T = data.draw(st.integers(1, 5))
        n_sym = data.draw(st.integers(1, 3))
        ab = Alphabet("abc"[:n_sym])
        seed = data.draw(st.integers(0, 2**31 - 1))
        g = torch.Generator().manual_seed(seed)
        lp = torch.log_softmax(
            torch.randn(T, ab.num_classes, generator=g, dtype=torch.float64) * 2.0, dim=1
        )
        L = data.draw(st.integers(0, min(3, T)))
        target = "".join(
            ab.symbols[data.draw(st.integers(0, n_sym - 1))] for _ in range(L)
        )
        if min_frames(target) > T:
            return
        mine = float(ctc_loss(lp, target, ab))
        ref = brute_force_ctc(lp, target, ab)
        assert math.isclose(mine, ref, rel_tol=0, abs_tol=1e-8)

    def test_batch_matches_singles(self):
        ab = Alphabet("ab")
        g = torch.Generator().manual_seed(5)
        lp = torch.log_softmax(torch.randn(4, 6, 3, generator=g), dim=2)
        targets = ["a", "ab", "", "ba"]
        batch = ctc_loss_batch(lp, targets, ab)
        singles = torch.stack([ctc_loss(lp[i], targets[i], ab) for i in range(4)])
        assert torch.allclose(batch, singles, atol=1e-6)

    def test_gradient_matches_finite_differences(self):
        ab = Alphabet("abc")
        g = torch.Generator().manual_seed(11)
        for target in ("ab", "a", "cba"):
            x = torch.randn(4, 4, dtype=torch.float64, generator=g, requires_grad=True)
            loss = ctc_loss(torch.log_softmax(x, dim=1), target, ab)
            (grad,) = torch.autograd.grad(loss, x)
            eps = 1e-6
            for i in (0, 2):
                for j in (0, 3):
                    xp = x.detach().clone()
                    xp[i, j] += eps
                    xm = x.detach().clone()
                    xm[i, j] -= eps
                    fd = (
                        float(ctc_loss(torch.log_softmax(xp, 1), target, ab))
                        - float(ctc_loss(torch.log_softmax(xm, 1), target, ab))
                    ) / (2 * eps)
                    denom = max(abs(fd), abs(float(grad[i, j])), 1e-8)
                    assert abs(fd - float(grad[i, j])) / denom < 1e-4

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_monotone_certainty(self, seed):
        # shifting mass toward a valid alignment never increases the loss
        ab = Alphabet("ab")
        g = torch.Generator().manual_seed(seed)
        logits = torch.randn(3, 3, generator=g, dtype=torch.float64)
        target = "a"
        base = float(ctc_loss(torch.log_softmax(logits, 1), target, ab))
        boosted = logits.clone()
        boosted[1, 0] += 0.5  # more mass on 'a' at frame 1
        new = float(ctc_loss(torch.log_softmax(boosted, 1), target, ab))
        assert new <= base + 1e-9


class TestGreedyDecode:
    def test_blank_collapse(self):
        ab = Alphabet("ac t".replace(" ", ""))  # "act"
        lp = torch.full((4, 4), -9.0)
        lp[:, 3] = 0.0  # all blanks
        text, conf = greedy_decode(torch.log_softmax(lp, 1), ab)
        assert text == "" and 0 <= conf <= 1

    def test_repeat_collapse(self):
        ab = Alphabet("act")
        lp = torch.full((5, 4), -9.0)
        for i, c in enumerate([1, 1, 3, 0, 2]):  # c c - a t
            lp[i, c] = 0.0
        text, _ = greedy_decode(torch.log_softmax(lp, 1), ab)
        assert text == "cat"


class TestOcrModel:
    def test_log_prob_rows_normalized(self, tiny_ocr):
        x = torch.rand(2, 1, OCRModel.height, OCRModel.width)
        lp = tiny_ocr(x)
        assert lp.shape == (2, tiny_ocr.frames, tiny_ocr.alphabet.num_classes)
        rowsums = lp.logsumexp(dim=2)
        assert rowsums.abs().max() < 1e-5

    def test_extract_features_deterministic_unit_norm(self, tiny_ocr):
        g = render_word("cat", "sans-bold", 18, (28, 90))
        f1 = extract_features(tiny_ocr, g)
        f2 = extract_features(tiny_ocr, g)
        assert torch.equal(f1, f2)
        assert abs(float(f1.norm()) - 1.0) < 1e-6

    def test_untrained_features_rejected(self):
        m = OCRModel(Alphabet("abc"))
        with pytest.raises(UntrainedModel):
            extract_features(m, render_word("a", "sans", 18, (28, 90)))

    def test_feature_separation(self, tiny_ocr):
        # same word across sizes should be closer than different words
        words = ["cat", "dog", "sun"]
        same, diff = [], []
        for w in words:
            a = extract_features(tiny_ocr, render_word(w, "sans-bold", 14, (24, 70)))
            b = extract_features(tiny_ocr, render_word(w, "mono-bold", 22, (34, 110)))
            same.append(float(a @ b))
            for v in words:
                if v != w:
                    c = extract_features(tiny_ocr, render_word(v, "sans-bold", 14, (24, 70)))
                    diff.append(float(a @ c))
        assert sum(same) / len(same) > sum(diff) / len(diff)

    def test_recognize_roundtrip(self, tiny_ocr):
        hits = 0
        cases = [(w, f, p) for w in ["cat", "dog", "sun"] for f in ["sans-bold", "mono-bold"]
                 for p in (12, 18, 24)]
        for w, f, p in cases:
            g = render_word(w, f, p, (p + 12, p * 4))
            text, conf = recognize(tiny_ocr, g.pixels)
            hits += int(text == w)
        assert hits / len(cases) >= 0.9

    def test_save_load_roundtrip(self, tiny_ocr, tmp_path):
        path = tmp_path / "ocr.pt"
        save_ocr(tiny_ocr, path)
        loaded = load_ocr(path)
        x = torch.rand(1, 1, OCRModel.height, OCRModel.width)
        assert torch.equal(loaded(x), tiny_ocr(x))
        assert loaded.trained


class TestTrainOcr:
    def test_empty_vocabulary(self):
        with pytest.raises(CoverageError):
            OcrTrainConfig(vocabulary=[])

    def test_single_word_degenerate(self):
        cfg = OcrTrainConfig(
            vocabulary=["cat"], fonts=["sans-bold"], renders_per_word=24,
            epochs=40, batch_size=8, lr=3e-3, seed=0, point_sizes=(10, 20),
        )
        model, log = train_ocr(cfg)
        assert log["final_val_accuracy"] == 1.0


class TestMetrics:
    def test_half_match(self):
        m = eval_ocr_metrics(["hello", "world"], ["hello", "there"])
        assert (m.precision, m.recall, m.f1) == (0.5, 0.5, 0.5)

    def test_exact(self):
        m = eval_ocr_metrics(["open"], ["open"])
        assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)

    def test_repetition_penalizes_precision(self):
        m = eval_ocr_metrics(["do", "not", "do", "not"], ["do", "not"])
        assert m.precision == 0.5 and m.recall == 1.0
        assert abs(m.f1 - 2 / 3) < 1e-9

    def test_empty_sides(self):
        assert eval_ocr_metrics([], ["x"]).precision == 0.0
        assert eval_ocr_metrics(["x"], []).recall == 0.0
        assert eval_ocr_metrics([], []).f1 == 0.0

    def test_case_folded(self):
        m = eval_ocr_metrics(["Cat"], ["cat"])
        assert m.f1 == 1.0

    @given(
        st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=6),
        st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=6),
    )
    @settings(max_examples=60, deadline=None)
    def test_bounds_and_identity(self, detected, truth):
        m = eval_ocr_metrics(detected, truth)
        assert 0 <= m.precision <= 1 and 0 <= m.recall <= 1 and 0 <= m.f1 <= 1
        if m.precision + m.recall > 0:
            expected = 2 * m.precision * m.recall / (m.precision + m.recall)
            assert abs(m.f1 - expected) < 1e-12
        else:
            assert m.f1 == 0.0
