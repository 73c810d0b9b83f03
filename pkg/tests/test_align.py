from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oiwer.align import (
    POLICY_ORIGINAL,
    POLICY_PATH,
    ScorePolicy,
    align,
    align_lattice,
    oiwer,
    wer,
)
from oiwer.errors import ValidationError
from oiwer.refmodel import (
    VariantSegment,
    VariationReference,
    build_lattice,
    enumerate_paths,
    make_utterance,
)
from oiwer.textnorm import DEFAULT_CONFIG

from conftest import random_hypothesis, random_reference
from oracles import best_path_cost, levenshtein_brute


def _identities(result, hyp_len):
    assert result.substitutions + result.deletions + result.matches == result.ref_len_path
    assert result.substitutions + result.insertions + result.matches == hyp_len
    assert result.cost == result.substitutions + result.insertions + result.deletions


def test_align_identity():
    r = align(["a", "b", "c"], ["a", "b", "c"])
    assert (r.substitutions, r.insertions, r.deletions, r.matches) == (0, 0, 0, 3)
    assert [op.kind for op in r.ops] == ["match", "match", "match"]


def test_align_single_substitution():
    r = align(["a", "b", "c"], ["a", "x", "c"])
    assert (r.substitutions, r.insertions, r.deletions, r.matches) == (1, 0, 0, 2)
    assert r.ops[1].kind == "sub" and r.ops[1].ref == "b" and r.ops[1].hyp == "x"


def test_align_empty_hypothesis():
    r = align(["a", "b", "c"], [])
    assert r.deletions == 3 and r.cost == 3
    _identities(r, 0)


def test_align_empty_reference():
    r = align([], ["a", "b"])
    assert r.insertions == 2 and r.cost == 2
    _identities(r, 2)


def test_align_prefers_matches_on_cost_ties():
    # "b a" vs "a b": cost 2 either as two subs or del+match+ins;
    # the match-maximizing solution must win.
    r = align(["a", "b"], ["b", "a"])
    assert r.cost == 2
    assert r.matches == 1


def test_align_matches_brute_force_randomized():
    rng = random.Random(13)
    for _ in range(400):
        ref = random_hypothesis(rng, max_len=8)
        hyp = random_hypothesis(rng, max_len=8)
        r = align(ref, hyp)
        assert r.cost == levenshtein_brute(ref, hyp)
        _identities(r, len(hyp))


def test_align_deterministic():
    ref = ("a", "b", "a", "c")
    hyp = ("b", "a", "c", "c")
    assert align(ref, hyp) == align(ref, hyp)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.sampled_from("abcde"), max_size=8),
    st.lists(st.sampled_from("abcde"), max_size=8),
)
def test_align_symmetry(a, b):
    ra, rb = align(a, b), align(b, a)
    assert ra.cost == rb.cost
    assert ra.insertions == rb.deletions and ra.deletions == rb.insertions
    assert ra.substitutions == rb.substitutions and ra.matches == rb.matches


# --- lattice alignment -------------------------------------------------------


def _lat(ref):
    return build_lattice(ref, DEFAULT_CONFIG)


def test_align_lattice_exact_path_match(passbook_ref):
    r = align_lattice(_lat(passbook_ref), ["my", "pass", "book"])
    assert r.cost == 0
    assert r.chosen_variants == {0: 1}
    assert r.ref_len_path == 3
    _identities(r, 3)


def test_align_lattice_near_miss_picks_closest_variant(passbook_ref):
    r = align_lattice(_lat(passbook_ref), ["my", "passbok"])
    assert r.cost == 1
    assert r.substitutions == 1
    assert r.chosen_variants == {0: 0}
    _identities(r, 2)


def test_align_lattice_degenerate_equals_plain():
    rng = random.Random(17)
    for i in range(60):
        ref = random_reference(rng, uid=f"d{i}", with_segments=False)
        hyp = random_hypothesis(rng)
        plain = align(ref.utterance.tokens, hyp)
        lat = align_lattice(_lat(ref), hyp)
        assert plain.cost == lat.cost
        assert plain.breakdown() == lat.breakdown()
        assert [op.kind for op in plain.ops] == [op.kind for op in lat.ops]


def test_align_lattice_oracle_equivalence_randomized():
    rng = random.Random(19)
    for i in range(300):
        ref = random_reference(rng, uid=f"o{i}")
        hyp = random_hypothesis(rng)
        lat = _lat(ref)
        got = align_lattice(lat, hyp)
        want = min(align(p, hyp).cost for p in enumerate_paths(lat, limit=100000))
        assert got.cost == want
        assert got.cost == best_path_cost(ref, hyp)
        _identities(got, len(hyp))


def test_align_lattice_empty_hypothesis_takes_shortest_path():
    utt = make_utterance("u", "en", "a b c", DEFAULT_CONFIG)
    ref = VariationReference(utt, (VariantSegment(0, 3, ("a b c", "x")),))
    r = align_lattice(_lat(ref), [])
    assert r.cost == 1
    assert r.deletions == 1
    assert r.chosen_variants == {0: 1}
    assert r.ref_len_path == 1


def test_align_lattice_chosen_variants_spell_consistent_path(passbook_ref):
    r = align_lattice(_lat(passbook_ref), ["my", "pass", "book"])
    ref_side = tuple(op.ref for op in r.ops if op.ref is not None)
    assert ref_side == ("my", "pass", "book")


def test_align_lattice_deterministic(passbook_ref):
    lat = _lat(passbook_ref)
    first = align_lattice(lat, ["my", "pass"])
    for _ in range(5):
        assert align_lattice(lat, ["my", "pass"]) == first


def test_align_lattice_tie_prefers_lowest_variant_index():
    # both variants are 1 edit away; the earlier-listed one must be chosen
    utt = make_utterance("u", "en", "x", DEFAULT_CONFIG)
    ref = VariationReference(utt, (VariantSegment(0, 1, ("x", "y")),))
    r = align_lattice(_lat(ref), ["z"])
    assert r.cost == 1
    assert r.chosen_variants == {0: 0}


# --- scoring -----------------------------------------------------------------


def test_wer_zero():
    utt = make_utterance("u", "en", "a b", DEFAULT_CONFIG)
    s = wer(utt, ["a", "b"])
    assert (s.numerator, s.denominator, s.ratio) == (0, 2, 0.0)


def test_wer_split_compound_counts_two_errors():
    utt = make_utterance("u", "en", "my passbook", DEFAULT_CONFIG)
    s = wer(utt, ["my", "pass", "book"])
    assert (s.numerator, s.denominator, s.ratio) == (2, 2, 1.0)


def test_wer_can_exceed_one():
    utt = make_utterance("u", "en", "a", DEFAULT_CONFIG)
    s = wer(utt, ["a", "b", "c"])
    assert (s.numerator, s.denominator, s.ratio) == (2, 1, 2.0)


def test_oiwer_split_compound_scores_zero(passbook_ref):
    s = oiwer(passbook_ref, ["my", "pass", "book"], POLICY_ORIGINAL)
    assert (s.numerator, s.denominator, s.ratio) == (0, 2, 0.0)
    w = wer(passbook_ref.utterance, ["my", "pass", "book"])
    assert s.ratio <= w.ratio


def test_oiwer_numeral_collapse_policies():
    utt = make_utterance("u", "en", "five six eight four nine", DEFAULT_CONFIG)
    ref = VariationReference(utt, (VariantSegment(0, 5, ("five six eight four nine", "56849")),))
    orig = oiwer(ref, ["56849"], POLICY_ORIGINAL)
    assert (orig.numerator, orig.denominator, orig.ratio) == (0, 5, 0.0)
    path = oiwer(ref, ["56849"], POLICY_PATH)
    assert (path.numerator, path.denominator, path.ratio) == (0, 1, 0.0)


def test_oiwer_degenerate_equals_wer():
    ref = VariationReference(make_utterance("u", "en", "a b c", DEFAULT_CONFIG), ())
    hyp = ["a", "x"]
    s = oiwer(ref, hyp, POLICY_ORIGINAL)
    w = wer(ref.utterance, hyp)
    assert (s.numerator, s.denominator, s.ratio) == (w.numerator, w.denominator, w.ratio)
    assert s.alignment.breakdown() == w.alignment.breakdown()


def test_oiwer_ratio_dominance_randomized():
    rng = random.Random(23)
    for i in range(200):
        ref = random_reference(rng, uid=f"p{i}")
        hyp = random_hypothesis(rng)
        assert oiwer(ref, hyp, POLICY_ORIGINAL).ratio <= wer(ref.utterance, hyp).ratio


def test_variant_monotonicity_randomized():
    rng = random.Random(29)
    tried = 0
    while tried < 150:
        ref = random_reference(rng, uid=f"m{tried}")
        if not ref.segments:
            continue
        tried += 1
        hyp = random_hypothesis(rng)
        base = align_lattice(_lat(ref), hyp).cost
        si = rng.randrange(len(ref.segments))
        seg = ref.segments[si]
        extra = " ".join(rng.choice("abcde") for _ in range(rng.randint(1, 3)))
        if any(tuple(extra.split()) == tuple(v.split()) for v in seg.variants):
            continue
        new_seg = VariantSegment(seg.start, seg.end, seg.variants + (extra,))
        widened = VariationReference(ref.utterance, ref.segments[:si] + (new_seg,) + ref.segments[si + 1:])
        assert align_lattice(_lat(widened), hyp).cost <= base


def test_score_policy_validation():
    with pytest.raises(ValidationError):
        ScorePolicy("both")
