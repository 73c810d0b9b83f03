from __future__ import annotations

import random

import pytest

from oiwer.refmodel import VariantSegment, VariationReference, make_utterance
from oiwer.textnorm import DEFAULT_CONFIG

TABLE1_TEXT = (
    "Can I find the instructions to download the EPFO passbook statement "
    "for my account number five six eight four nine in the blue coloured catalogue?"
)

TABLE1_ANNOTATED = (
    "Can I find the instructions to download the [EPFO, E P F O] [passbook, pass book] "
    "statement for my account number [five six eight four nine, 56849] in the blue "
    "[coloured, colored] [catalogue, catalog]"
)


@pytest.fixture
def table1_utterance():
    return make_utterance("t1", "en", TABLE1_TEXT, DEFAULT_CONFIG)


@pytest.fixture
def passbook_ref():
    utt = make_utterance("u1", "en", "my passbook", DEFAULT_CONFIG)
    seg = VariantSegment(start=1, end=2, variants=("passbook", "pass book"))
    return VariationReference(utterance=utt, segments=(seg,))


def random_reference(
    rng: random.Random,
    *,
    uid: str = "r",
    language: str = "xx",
    alphabet: int = 5,
    max_k: int = 8,
    max_segments: int = 3,
    max_variants: int = 3,
    max_variant_tokens: int = 3,
    with_segments: bool = True,
) -> VariationReference:
    """Small random reference within the acceptance-suite bounds."""
    symbols = [chr(ord("a") + i) for i in range(alphabet)]
    k = rng.randint(1, max_k)
    tokens = [rng.choice(symbols) for _ in range(k)]
    utt = make_utterance(uid, language, " ".join(tokens), DEFAULT_CONFIG)

    segments: list[VariantSegment] = []
    if with_segments:
        n_segments = rng.randint(0, max_segments)
        starts = list(range(k))
        rng.shuffle(starts)
        taken: list[tuple[int, int]] = []
        for s in sorted(starts[:n_segments]):
            e = min(k, s + rng.randint(1, 2))
            if any(not (e <= ts or s >= te) for ts, te in taken):
                continue
            taken.append((s, e))
            canonical = " ".join(tokens[s:e])
            variants = [canonical]
            seen = {tuple(canonical.split())}
            for _ in range(rng.randint(0, max_variants - 1)):
                vlen = rng.randint(1, max_variant_tokens)
                v = tuple(rng.choice(symbols) for _ in range(vlen))
                if v not in seen:
                    seen.add(v)
                    variants.append(" ".join(v))
            segments.append(VariantSegment(start=s, end=e, variants=tuple(variants)))
        segments.sort(key=lambda seg: seg.start)
    return VariationReference(utterance=utt, segments=tuple(segments))


def random_hypothesis(rng: random.Random, *, alphabet: int = 5, max_len: int = 10) -> tuple[str, ...]:
    symbols = [chr(ord("a") + i) for i in range(alphabet)]
    return tuple(rng.choice(symbols) for _ in range(rng.randint(0, max_len)))
