"""Acceptance suite: one test per exit criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the PASS/FAIL lines.
"""

from __future__ import annotations

import json
import random
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import httpx
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from oiwer.align import POLICY_ORIGINAL, align, align_lattice, oiwer, wer
from oiwer.cli import main as cli_main
from oiwer.errors import UndefinedStatisticError
from oiwer.genvar import (
    CATEGORIES,
    CATEGORY_TITLES,
    CandidateAnnotation,
    GuidelineCategory,
    GuidelineSet,
    ProviderClient,
    ProviderConfig,
    run_generation,
)
from oiwer.metrics import r_squared
from oiwer.refmodel import (
    VariantSegment,
    VariationReference,
    build_lattice,
    enumerate_paths,
    make_utterance,
    parse_bracketed,
    parse_manifest,
    serialize_manifest,
    validate_reference,
)
from oiwer.review import ReviewStore, create_app
from oiwer.textnorm import DEFAULT_CONFIG

from conftest import TABLE1_ANNOTATED, TABLE1_TEXT, random_hypothesis, random_reference
from oracles import r_squared_closed_form


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL", file=sys.stderr)
        raise
    print(f"ACCEPTANCE {name}: PASS")


def _check_identities(result, hyp_len: int) -> None:
    assert result.substitutions + result.deletions + result.matches == result.ref_len_path
    assert result.substitutions + result.insertions + result.matches == hyp_len


_identity_checks = {"n": 0}


def _checked_align_lattice(lat, hyp):
    r = align_lattice(lat, hyp)
    _check_identities(r, len(hyp))
    _identity_checks["n"] += 1
    return r


def _checked_align(ref, hyp):
    r = align(ref, hyp)
    _check_identities(r, len(hyp))
    _identity_checks["n"] += 1
    return r


def _hand_fixtures() -> list[tuple[VariationReference, tuple[str, ...]]]:
    fixtures = []
    utt = make_utterance("f1", "en", "my passbook", DEFAULT_CONFIG)
    ref = VariationReference(utt, (VariantSegment(1, 2, ("passbook", "pass book")),))
    fixtures.append((ref, ("my", "pass", "book")))
    fixtures.append((ref, ("my", "passbok")))
    fixtures.append((ref, ()))
    utt2 = make_utterance("f2", "en", "five six eight four nine", DEFAULT_CONFIG)
    ref2 = VariationReference(utt2, (VariantSegment(0, 5, ("five six eight four nine", "56849")),))
    fixtures.append((ref2, ("56849",)))
    fixtures.append((ref2, ("five", "six", "eight", "four", "nine")))
    t1 = make_utterance("f3", "en", TABLE1_TEXT, DEFAULT_CONFIG)
    segs = parse_bracketed(TABLE1_ANNOTATED, t1, DEFAULT_CONFIG)
    fixtures.append((VariationReference(t1, tuple(segs)), tuple("Can I find the new catalogue".split())))
    return fixtures


def test_oracle_equivalence_1000_randomized():
    with criterion("oracle-equivalence"):
        rng = random.Random(2024)
        start = time.perf_counter()
        for i in range(1000):
            ref = random_reference(rng, uid=f"oe{i}")
            hyp = random_hypothesis(rng)
            lat = build_lattice(ref, DEFAULT_CONFIG)
            got = _checked_align_lattice(lat, hyp).cost
            want = min(_checked_align(p, hyp).cost for p in enumerate_paths(lat, limit=1_000_000))
            assert got == want, (ref, hyp, got, want)
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"oracle equivalence took {elapsed:.1f}s"


def test_ratio_dominance_zero_violations():
    with criterion("ratio-dominance"):
        rng = random.Random(2025)
        cases = []
        total_wer_num = total_oiwer_num = total_den = 0
        for i in range(1000):
            ref = random_reference(rng, uid=f"rd{i}")
            hyp = random_hypothesis(rng)
            cases.append((ref, hyp))
        cases.extend(_hand_fixtures())
        for ref, hyp in cases:
            o = oiwer(ref, hyp, POLICY_ORIGINAL, DEFAULT_CONFIG)
            w = wer(ref.utterance, hyp)
            _check_identities(o.alignment, len(hyp))
            _check_identities(w.alignment, len(hyp))
            _identity_checks["n"] += 2
            assert o.ratio <= w.ratio, (ref, hyp)
            total_wer_num += w.numerator
            total_oiwer_num += o.numerator
            total_den += ref.k
        assert total_oiwer_num / total_den <= total_wer_num / total_den


def test_degeneracy_identical_backtraces():
    with criterion("degeneracy"):
        rng = random.Random(2026)
        for i in range(100):
            ref = random_reference(rng, uid=f"dg{i}", with_segments=False)
            hyp = random_hypothesis(rng)
            o = oiwer(ref, hyp, POLICY_ORIGINAL, DEFAULT_CONFIG)
            w = wer(ref.utterance, hyp)
            _check_identities(o.alignment, len(hyp))
            _check_identities(w.alignment, len(hyp))
            _identity_checks["n"] += 2
            assert (o.numerator, o.denominator, o.ratio) == (w.numerator, w.denominator, w.ratio)
            assert o.alignment.breakdown() == w.alignment.breakdown()
            assert [op.kind for op in o.alignment.ops] == [op.kind for op in w.alignment.ops]


def test_variant_monotonicity_500_trials():
    with criterion("variant-monotonicity"):
        rng = random.Random(2027)
        trials = 0
        while trials < 500:
            ref = random_reference(rng, uid=f"vm{trials}")
            if not ref.segments:
                continue
            hyp = random_hypothesis(rng)
            base = _checked_align_lattice(build_lattice(ref, DEFAULT_CONFIG), hyp).cost
            si = rng.randrange(len(ref.segments))
            seg = ref.segments[si]
            extra_toks = tuple(rng.choice("abcde") for _ in range(rng.randint(1, 3)))
            if any(tuple(v.split()) == extra_toks for v in seg.variants):
                continue
            trials += 1
            new_seg = VariantSegment(seg.start, seg.end, seg.variants + (" ".join(extra_toks),))
            widened = VariationReference(ref.utterance, ref.segments[:si] + (new_seg,) + ref.segments[si + 1:])
            widened_cost = _checked_align_lattice(build_lattice(widened, DEFAULT_CONFIG), hyp).cost
            assert widened_cost <= base, (ref, hyp, extra_toks)


def test_accounting_identities_held_everywhere():
    # every alignment in the loops above passes through _check_identities;
    # run an extra independent sweep so this also stands alone
    with criterion("accounting-identities"):
        rng = random.Random(2030)
        for i in range(300):
            ref = random_reference(rng, uid=f"ai{i}")
            hyp = random_hypothesis(rng)
            _checked_align(ref.utterance.tokens, hyp)
            _checked_align_lattice(build_lattice(ref, DEFAULT_CONFIG), hyp)
        assert _identity_checks["n"] >= 600, "identity checks did not run"


def test_table1_reproduction():
    with criterion("table1-reproduction"):
        utt = make_utterance("t1", "en", TABLE1_TEXT, DEFAULT_CONFIG)
        segments = parse_bracketed(TABLE1_ANNOTATED, utt, DEFAULT_CONFIG)
        assert len(segments) == 5
        ref = VariationReference(utt, tuple(segments))
        validate_reference(ref, DEFAULT_CONFIG)
        lat = build_lattice(ref, DEFAULT_CONFIG)
        assert lat.path_count == 32
        assert len(set(enumerate_paths(lat, limit=64))) == 32

        hyp_text = (
            "Can I find the instructions to download the E P F O pass book statement "
            "for my account number 56849 in the blue colored catalog"
        )
        from oiwer.textnorm import tokenize

        hyp = tokenize(hyp_text, DEFAULT_CONFIG)
        o = oiwer(ref, hyp, POLICY_ORIGINAL, DEFAULT_CONFIG)
        w = wer(utt, hyp)
        assert o.numerator == 0
        assert w.numerator > 0
        # every explicit segment resolved to its non-canonical variant
        assert o.alignment.chosen_variants == {0: 1, 1: 1, 2: 1, 3: 1, 4: 1}


def test_r_squared_correctness():
    with criterion("r-squared"):
        rng = random.Random(2028)
        checked = 0
        while checked < 100:
            n = rng.randint(2, 50)
            pairs = [(rng.uniform(0, 1), rng.uniform(0, 1)) for _ in range(n)]
            if len({x for x, _ in pairs}) < 2 or len({y for _, y in pairs}) < 2:
                continue
            checked += 1
            assert r_squared(pairs) == pytest.approx(r_squared_closed_form(pairs), abs=1e-12)
        line = [(float(x), 3.0 * x - 2.0) for x in range(10)]
        assert r_squared(line) == 1.0
        with pytest.raises(UndefinedStatisticError):
            r_squared([(0.0, 5.0), (1.0, 5.0), (2.0, 5.0)])


def _write_synthetic_corpus(path_refs: Path, path_hyps: Path, n: int, seed: int, k: int = 15) -> None:
    rng = random.Random(seed)
    vocab = [f"w{i}" for i in range(200)]
    refs = []
    hyp_lines = []
    for i in range(n):
        toks = [rng.choice(vocab) for _ in range(k)]
        utt = make_utterance(f"u{i:05d}", rng.choice(["hi", "ta", "ml"]), " ".join(toks), DEFAULT_CONFIG)
        segs = tuple(VariantSegment(t, t + 1, (toks[t], toks[t] + "x")) for t in range(k))
        refs.append(VariationReference(utt, segs))
        out = []
        for seg in segs:
            c = rng.random()
            if c < 0.5:
                out.append(seg.variants[0])
            elif c < 0.8:
                out.append(seg.variants[1])
            elif c < 0.9:
                out.append("zzz")
        hyp_lines.append(json.dumps({"id": utt.id, "text": " ".join(out)}, ensure_ascii=False))
    path_refs.write_text(serialize_manifest(refs, DEFAULT_CONFIG), encoding="utf-8")
    path_hyps.write_text("\n".join(hyp_lines) + "\n", encoding="utf-8")


def test_determinism_jobs_and_order(tmp_path):
    with criterion("determinism"):
        refs = tmp_path / "refs.jsonl"
        hyps = tmp_path / "hyps.jsonl"
        _write_synthetic_corpus(refs, hyps, n=1000, seed=77, k=8)
        runner = CliRunner()
        out1, out2, out3 = tmp_path / "o1", tmp_path / "o2", tmp_path / "o3"
        assert runner.invoke(cli_main, ["eval", "--refs", str(refs), "--hyps", str(hyps), "--out", str(out1), "--jobs", "1"]).exit_code == 0
        assert runner.invoke(cli_main, ["eval", "--refs", str(refs), "--hyps", str(hyps), "--out", str(out2), "--jobs", "8"]).exit_code == 0

        rng = random.Random(5)
        ref_lines = refs.read_text(encoding="utf-8").splitlines()
        head, body = ref_lines[0], ref_lines[1:]
        rng.shuffle(body)
        refs_shuf = tmp_path / "refs-shuf.jsonl"
        refs_shuf.write_text("\n".join([head] + body) + "\n", encoding="utf-8")
        hyp_lines = hyps.read_text(encoding="utf-8").splitlines()
        rng.shuffle(hyp_lines)
        hyps_shuf = tmp_path / "hyps-shuf.jsonl"
        hyps_shuf.write_text("\n".join(hyp_lines) + "\n", encoding="utf-8")
        assert runner.invoke(cli_main, ["eval", "--refs", str(refs_shuf), "--hyps", str(hyps_shuf), "--out", str(out3), "--jobs", "8"]).exit_code == 0

        for name in ("report.json", "report.txt", "report.csv"):
            b = (out1 / name).read_bytes()
            assert b == (out2 / name).read_bytes(), f"{name} differs between --jobs 1 and --jobs 8"
            assert b == (out3 / name).read_bytes(), f"{name} differs under shuffled input"


def test_throughput_10k_under_60s(tmp_path):
    with criterion("throughput"):
        refs = tmp_path / "refs.jsonl"
        hyps = tmp_path / "hyps.jsonl"
        _write_synthetic_corpus(refs, hyps, n=10_000, seed=88, k=15)
        runner = CliRunner()
        start = time.perf_counter()
        result = runner.invoke(
            cli_main,
            ["eval", "--refs", str(refs), "--hyps", str(hyps), "--out", str(tmp_path / "out"), "--jobs", "1"],
        )
        elapsed = time.perf_counter() - start
        assert result.exit_code == 0, result.output
        assert elapsed < 60.0, f"end-to-end evaluation took {elapsed:.1f}s"
        report = json.loads((tmp_path / "out" / "report.json").read_text(encoding="utf-8"))
        assert report["inputs"]["utterances_scored"] == 10_000


def test_generation_pipeline_against_mock(tmp_path, monkeypatch):
    with criterion("generation-pipeline"):
        monkeypatch.setenv("ACCEPT_CRED", "sk-acceptance-secret")
        guide = GuidelineSet(
            language="en",
            categories={
                name: GuidelineCategory(f"about {name}", (f"{name} demo",)) for name in CATEGORIES
            },
        )
        utts = [make_utterance(f"u{i}", "en", f"alpha{i} beta gamma", DEFAULT_CONFIG) for i in range(3)]

        # dry-run prompts name all seven categories
        run_generation(utts, guide, None, tmp_path / "c.jsonl", tmp_path / "j.jsonl",
                       dry_run=True, prompt_dir=tmp_path / "prompts")
        prompts = list((tmp_path / "prompts").glob("*.prompt.txt"))
        assert len(prompts) == 3
        for p in prompts:
            text = p.read_text(encoding="utf-8")
            for name in CATEGORIES:
                assert text.count(CATEGORY_TITLES[name]) == 1

        # mock responses round-trip into valid references
        def ok_handler(request: httpx.Request) -> httpx.Response:
            prompt = json.loads(request.content)["prompt"]
            transcript = prompt.rsplit("Transcript: ", 1)[1]
            first = transcript.split()[0]
            return httpx.Response(200, json={"text": transcript.replace(first, f"[{first}, {first} x]", 1)})

        cfg = ProviderConfig(
            endpoint="https://mock.test/api", model="m", credential_env="ACCEPT_CRED",
            timeout_s=5, max_attempts=3, backoff_s=0.001,
        )
        summary = run_generation(
            utts, guide, cfg, tmp_path / "cands.jsonl", tmp_path / "journal.jsonl",
            transport=httpx.MockTransport(ok_handler), sleep=lambda s: None,
        )
        assert summary.succeeded == 3
        for line in (tmp_path / "cands.jsonl").read_text(encoding="utf-8").splitlines():
            cand = CandidateAnnotation.from_record(json.loads(line))
            assert cand.status == "parsed"
            validate_reference(cand.to_reference(DEFAULT_CONFIG), DEFAULT_CONFIG)

        # 429 then 200 retries; 401 does not
        calls = {"n": 0}

        def flaky(request: httpx.Request) -> httpx.Response:
            calls["n"] += 1
            return httpx.Response(429) if calls["n"] == 1 else httpx.Response(200, json={"text": "alpha0 beta gamma"})

        client = ProviderClient(cfg, transport=httpx.MockTransport(flaky), sleep=lambda s: None)
        assert client.request("p") == "alpha0 beta gamma"
        assert client.last_attempts == 2
        client.close()

        auth_calls = {"n": 0}

        def denied(request: httpx.Request) -> httpx.Response:
            auth_calls["n"] += 1
            return httpx.Response(401)

        client = ProviderClient(cfg, transport=httpx.MockTransport(denied), sleep=lambda s: None)
        from oiwer.errors import ProviderAuthError

        with pytest.raises(ProviderAuthError):
            client.request("p")
        assert auth_calls["n"] == 1
        client.close()


def test_review_round_trip_secondary(tmp_path):
    with criterion("review-round-trip"):
        utt = make_utterance("u1", "en", "the blue coloured catalogue", DEFAULT_CONFIG)
        ref = VariationReference(utt, (VariantSegment(2, 3, ("coloured", "colored")),))
        manifest = serialize_manifest([ref], DEFAULT_CONFIG)
        data = tmp_path / "data.jsonl"
        data.write_text(manifest, encoding="utf-8")

        # import -> no edits -> export is content-equal
        store = ReviewStore(data, DEFAULT_CONFIG)
        client = TestClient(create_app(store))
        assert client.get("/api/export").text == manifest

        # an add/remove session whose re-evaluation reflects exactly the edits
        r = client.post("/api/utterances/u1/edits", json={"op": "add_variant", "segment": 0, "variant": "kolored"})
        assert r.status_code == 200
        r = client.post("/api/utterances/u1/edits", json={"op": "remove_variant", "segment": 0, "variant_index": 1})
        assert r.status_code == 200  # removes "colored", keeps canonical + "kolored"
        r = client.post("/api/utterances/u1/review", json={"reviewer": "acceptance"})
        assert r.status_code == 200
        exported = client.get("/api/export", params={"reviewed_only": "true"}).text
        refs = parse_manifest(exported.splitlines(), DEFAULT_CONFIG)
        assert len(refs) == 1
        assert refs[0].segments[0].variants == ("coloured", "kolored")
        hyp_old = ("the", "blue", "colored", "catalogue")
        hyp_new = ("the", "blue", "kolored", "catalogue")
        assert oiwer(refs[0], hyp_new, POLICY_ORIGINAL).numerator == 0
        assert oiwer(refs[0], hyp_old, POLICY_ORIGINAL).numerator == 1  # removed variant no longer matches

        # canonical-variant removal rejected end-to-end through the HTTP API
        r = client.post("/api/utterances/u1/edits", json={"op": "remove_variant", "segment": 0, "variant_index": 0})
        assert r.status_code == 409
        assert r.json()["error"] == "canonical-variant-protected"
        assert store.records["u1"].candidate.segments[0].variants[0] == "coloured"
