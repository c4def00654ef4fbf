import math

import pytest

from latticelm.arpa import (ArpaFormatError, logprob, parse_arpa,
                            sentence_logprob, write_arpa)
from latticelm.fixtures import FIXTURE_CORPUS, build_addone_arpa, fixture_arpa

PRED_VOCAB = ["</s>", "<unk>", "does", "it", "so", "sodas"]

# Hand-derived add-one values over {"so does it", "sodas it"}; V = 6
# prediction types, 7 counted tokens (5 words + 2 </s>).
HAND_UNIGRAMS = {
    "so": 2 / 13, "does": 2 / 13, "it": 3 / 13, "sodas": 2 / 13,
    "</s>": 3 / 13, "<unk>": 1 / 13,
}
HAND_BIGRAMS = {
    ("<s>", "so"): 2 / 8, ("<s>", "sodas"): 2 / 8,
    ("so", "does"): 2 / 7, ("does", "it"): 2 / 7,
    ("it", "</s>"): 3 / 8, ("sodas", "it"): 2 / 7,
}
HAND_BACKOFFS = {
    "<s>": (1 - 4 / 8) / (1 - 4 / 13),
    "so": (1 - 2 / 7) / (1 - 2 / 13),
    "does": (1 - 2 / 7) / (1 - 3 / 13),
    "it": (1 - 3 / 8) / (1 - 3 / 13),
    "sodas": (1 - 2 / 7) / (1 - 3 / 13),
}


def test_fixture_order_and_vocab(model2):
    assert model2.order == 2
    assert set(PRED_VOCAB) | {"<s>"} == model2.vocab


def test_unigram_hand_values(model2):
    for word, p in HAND_UNIGRAMS.items():
        assert logprob(model2, [], word) == pytest.approx(math.log(p), abs=1e-12)


def test_bigram_hand_values(model2):
    for (hist, word), p in HAND_BIGRAMS.items():
        assert logprob(model2, [hist], word) == pytest.approx(math.log(p), abs=1e-12)


def test_backoff_hand_values(model2):
    # unseen bigram: backoff(h) * p_uni(w)
    expect = math.log(HAND_BACKOFFS["so"]) + math.log(HAND_UNIGRAMS["it"])
    assert logprob(model2, ["so"], "it") == pytest.approx(expect, abs=1e-12)
    # OOV word maps to <unk>
    expect = math.log(HAND_BACKOFFS["so"]) + math.log(HAND_UNIGRAMS["<unk>"])
    assert logprob(model2, ["so"], "xyz") == pytest.approx(expect, abs=1e-12)


def test_oov_history_maps_to_unk(model2):
    assert logprob(model2, ["zzz"], "it") == logprob(model2, ["<unk>"], "it")


def test_history_truncation(model2, model4):
    for model in (model2, model4):
        k = model.order - 1
        history = ["so", "does", "it", "sodas", "so", "does"]
        assert logprob(model, history, "it") == logprob(model, history[-k:], "it")


def test_bos_never_predicted_but_backs_off(model2):
    assert logprob(model2, [], "<s>") == -math.inf
    # <s> history still usable
    assert math.isfinite(logprob(model2, ["<s>"], "so"))


def test_normalization_all_histories(model2, model4):
    for model in (model2, model4):
        histories = {()} | {ng[:-1] for n in model.tables for ng in model.tables[n]}
        for hist in histories:
            if hist and hist[-1] == "</s>":
                continue
            total = sum(math.exp(logprob(model, list(hist), w)) for w in PRED_VOCAB)
            assert total == pytest.approx(1.0, abs=1e-4), hist


def test_backoff_recursion_depth(model4):
    # history longer than order-1 cannot deepen the recursion past the order
    assert math.isfinite(logprob(model4, ["so"] * 20, "it"))


def test_sentence_logprob_chain_rule(model2):
    words = ["so", "does", "it"]
    manual = (logprob(model2, ["<s>"], "so")
              + logprob(model2, ["<s>", "so"], "does")
              + logprob(model2, ["<s>", "so", "does"], "it")
              + logprob(model2, ["<s>", "so", "does", "it"], "</s>"))
    assert sentence_logprob(model2, words) == pytest.approx(manual, abs=1e-12)


def test_sentence_logprob_hand_sum(model2):
    expect = math.log(HAND_BIGRAMS[("<s>", "so")]) + math.log(HAND_BIGRAMS[("so", "does")]) \
        + math.log(HAND_BIGRAMS[("does", "it")]) + math.log(HAND_BIGRAMS[("it", "</s>")])
    assert sentence_logprob(model2, ["so", "does", "it"]) == pytest.approx(expect, abs=1e-12)


def test_empty_sentence(model2):
    # </s> after <s>: unseen bigram, backs off through <s>
    expect = math.log(HAND_BACKOFFS["<s>"]) + math.log(HAND_UNIGRAMS["</s>"])
    assert sentence_logprob(model2, []) == pytest.approx(expect, abs=1e-12)


def test_write_parse_roundtrip_scores_identical(model4):
    reparsed = parse_arpa(write_arpa(model4))
    assert reparsed.order == model4.order
    queries = [([], "so"), (["so"], "does"), (["<s>", "so", "does"], "it"),
               (["sodas", "it"], "</s>"), (["qq"], "zz"), (["so"] * 5, "it")]
    for hist, word in queries:
        assert logprob(reparsed, hist, word) == logprob(model4, hist, word)


def test_count_mismatch_rejected(model2):
    text = write_arpa(model2)
    text = text.replace("ngram 1=7", "ngram 1=8")
    with pytest.raises(ArpaFormatError, match="count mismatch"):
        parse_arpa(text)


def test_missing_prefix_rejected():
    text = ("\\data\\\nngram 1=2\nngram 2=1\n\n\\1-grams:\n"
            "-0.5\t<unk>\t0\n-0.5\ta\t0\n\n\\2-grams:\n-0.3\tb a\n\n\\end\\\n")
    with pytest.raises(ArpaFormatError, match="prefix"):
        parse_arpa(text)


def test_duplicate_ngram_rejected():
    text = ("\\data\\\nngram 1=2\n\n\\1-grams:\n"
            "-0.5\ta\n-0.6\ta\n\n\\end\\\n")
    with pytest.raises(ArpaFormatError, match="duplicate"):
        parse_arpa(text)


def test_builder_matches_hand_tables(model2):
    uni = model2.tables[1]
    for word, p in HAND_UNIGRAMS.items():
        assert uni[(word,)][0] == pytest.approx(math.log10(p), abs=1e-12)
    bi = model2.tables[2]
    for (h, w), p in HAND_BIGRAMS.items():
        assert bi[(h, w)][0] == pytest.approx(math.log10(p), abs=1e-12)
    for h, bow in HAND_BACKOFFS.items():
        assert uni[(h,)][1] == pytest.approx(math.log10(bow), abs=1e-12)


def test_higher_order_builder_is_consistent():
    model3 = build_addone_arpa(FIXTURE_CORPUS, 3)
    assert model3.order == 3
    # listed trigram value straight from the add-one formula
    # c(<s> so does)=1, c(<s> so)=1 as a context, V=6
    assert logprob(model3, ["<s>", "so"], "does") == pytest.approx(
        math.log(2 / 7), abs=1e-12)
