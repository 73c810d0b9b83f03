"""Edit-distance alignment engines.

Two independent routes:

* ``align`` — classic Levenshtein DP between two token sequences.
* ``align_lattice`` — DP over a variation lattice's token edges, finding
  the cheapest alignment against *any* source-to-sink path.

Both minimize edit cost first and, among equal-cost alignments, maximize
matches; remaining ties break deterministically (diagonal over deletion
over insertion, then lowest variant index), so identical inputs always
produce byte-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ValidationError
from .refmodel import Lattice, Utterance, VariationReference, build_lattice
from .textnorm import DEFAULT_CONFIG, NormConfig

_INF = 1 << 30


@dataclass(frozen=True)
class EditOp:
    """One backtrace step. ``ref``/``hyp`` are None for ins/del respectively."""

    kind: str  # "match" | "sub" | "del" | "ins"
    ref: str | None
    hyp: str | None


@dataclass(frozen=True)
class AlignmentResult:
    substitutions: int
    insertions: int
    deletions: int
    matches: int
    ops: tuple[EditOp, ...]
    chosen_variants: dict[int, int] = field(default_factory=dict)
    ref_len_original: int = 0
    ref_len_path: int = 0

    @property
    def cost(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    def breakdown(self) -> dict[str, int]:
        return {
            "S": self.substitutions,
            "I": self.insertions,
            "D": self.deletions,
            "M": self.matches,
        }


@dataclass(frozen=True)
class ScorePolicy:
    """Which reference length divides the edit cost.

    ``original`` keeps scores comparable to plain WER on the same utterance
    (and makes the dominance property hold); ``path`` divides by the chosen
    path's length instead.
    """

    denominator: str = "original"

    def __post_init__(self) -> None:
        if self.denominator not in ("original", "path"):
            raise ValidationError(f"unknown denominator policy {self.denominator!r}", rule="score-policy")


POLICY_ORIGINAL = ScorePolicy("original")
POLICY_PATH = ScorePolicy("path")


@dataclass(frozen=True)
class ScoreRecord:
    numerator: int
    denominator: int
    ratio: float
    alignment: AlignmentResult


def _ops_to_result(
    ops: list[EditOp],
    chosen_variants: dict[int, int],
    ref_len_original: int,
) -> AlignmentResult:
    s = i = d = m = 0
    for op in ops:
        if op.kind == "match":
            m += 1
        elif op.kind == "sub":
            s += 1
        elif op.kind == "del":
            d += 1
        else:
            i += 1
    return AlignmentResult(
        substitutions=s,
        insertions=i,
        deletions=d,
        matches=m,
        ops=tuple(ops),
        chosen_variants=chosen_variants,
        ref_len_original=ref_len_original,
        ref_len_path=s + d + m,
    )


def align(ref_tokens: tuple[str, ...] | list[str], hyp_tokens: tuple[str, ...] | list[str]) -> AlignmentResult:
    """Unit-cost Levenshtein alignment of two token sequences with backtrace."""
    ref = list(ref_tokens)
    hyp = list(hyp_tokens)
    k, n = len(ref), len(hyp)

    # cell value is (cost, matches): minimize cost, then maximize matches
    cost = [[0] * (n + 1) for _ in range(k + 1)]
    mat = [[0] * (n + 1) for _ in range(k + 1)]
    for i in range(1, k + 1):
        cost[i][0] = i
    for j in range(1, n + 1):
        cost[0][j] = j
    for i in range(1, k + 1):
        ri = ref[i - 1]
        row, prow = cost[i], cost[i - 1]
        mrow, pmrow = mat[i], mat[i - 1]
        for j in range(1, n + 1):
            eq = ri == hyp[j - 1]
            bc = prow[j - 1] + (0 if eq else 1)
            bm = pmrow[j - 1] + (1 if eq else 0)
            c = prow[j] + 1
            if c < bc or (c == bc and pmrow[j] > bm):
                bc, bm = c, pmrow[j]
            c = row[j - 1] + 1
            if c < bc or (c == bc and mrow[j - 1] > bm):
                bc, bm = c, mrow[j - 1]
            row[j] = bc
            mrow[j] = bm

    ops: list[EditOp] = []
    i, j = k, n
    while i > 0 or j > 0:
        c, m = cost[i][j], mat[i][j]
        if i > 0 and j > 0:
            eq = ref[i - 1] == hyp[j - 1]
            if c == cost[i - 1][j - 1] + (0 if eq else 1) and m == mat[i - 1][j - 1] + (1 if eq else 0):
                ops.append(EditOp("match" if eq else "sub", ref[i - 1], hyp[j - 1]))
                i, j = i - 1, j - 1
                continue
        if i > 0 and c == cost[i - 1][j] + 1 and m == mat[i - 1][j]:
            ops.append(EditOp("del", ref[i - 1], None))
            i -= 1
            continue
        ops.append(EditOp("ins", None, hyp[j - 1]))
        j -= 1
    ops.reverse()
    return _ops_to_result(ops, {}, k)


def align_lattice(lat: Lattice, hyp_tokens: tuple[str, ...] | list[str]) -> AlignmentResult:
    """Cheapest alignment of the hypothesis against any lattice path.

    Exact DP over (lattice node, hypothesis prefix) states; cost equals the
    minimum over all source-to-sink paths of their Levenshtein distance to
    the hypothesis. O(edges x hypothesis length), no pruning.
    """
    hyp = list(hyp_tokens)
    n = len(hyp)
    num_nodes = lat.num_nodes
    in_edges = lat.in_edges
    edge_src = lat.edge_src
    edge_token = lat.edge_token

    width = n + 1
    # flat arrays indexed [node * width + j]; nodes are topologically numbered
    cost = [_INF] * (num_nodes * width)
    mat = [0] * (num_nodes * width)
    for j in range(width):
        cost[j] = j  # source row: insertions only
    for s in range(1, num_nodes):
        base = s * width
        incoming = in_edges[s]
        for j in range(width):
            bc, bm = _INF, 0
            hj = hyp[j - 1] if j > 0 else None
            for ei in incoming:
                pbase = edge_src[ei] * width
                tok = edge_token[ei]
                c = cost[pbase + j] + 1  # deletion: consume ref token only
                if c < bc or (c == bc and mat[pbase + j] > bm):
                    bc, bm = c, mat[pbase + j]
                if j > 0:
                    eq = tok == hj
                    c = cost[pbase + j - 1] + (0 if eq else 1)
                    m = mat[pbase + j - 1] + (1 if eq else 0)
                    if c < bc or (c == bc and m > bm):
                        bc, bm = c, m
            if j > 0:
                c = cost[base + j - 1] + 1  # insertion: consume hyp token only
                if c < bc or (c == bc and mat[base + j - 1] > bm):
                    bc, bm = c, mat[base + j - 1]
            cost[base + j] = bc
            mat[base + j] = bm

    # Backtrace from (sink, N). Preference among exact-value-preserving
    # moves: diagonal, then deletion, then insertion; in-edge lists are in
    # (segment, variant, position) order, so the first valid edge always
    # carries the lowest variant index.
    ops: list[EditOp] = []
    chosen: dict[int, int] = {}
    s, j = lat.boundaries[-1], n
    while s != 0 or j != 0:
        base = s * width
        c, m = cost[base + j], mat[base + j]
        moved = False
        if j > 0:
            hj = hyp[j - 1]
            for ei in in_edges[s]:
                pbase = edge_src[ei] * width
                tok = edge_token[ei]
                eq = tok == hj
                if cost[pbase + j - 1] + (0 if eq else 1) == c and mat[pbase + j - 1] + (1 if eq else 0) == m:
                    ops.append(EditOp("match" if eq else "sub", tok, hj))
                    chosen[lat.edge_segment[ei]] = lat.edge_variant[ei]
                    s, j = edge_src[ei], j - 1
                    moved = True
                    break
            if moved:
                continue
        for ei in in_edges[s]:
            pbase = edge_src[ei] * width
            if cost[pbase + j] + 1 == c and mat[pbase + j] == m:
                ops.append(EditOp("del", lat.edge_token[ei], None))
                chosen[lat.edge_segment[ei]] = lat.edge_variant[ei]
                s = edge_src[ei]
                moved = True
                break
        if moved:
            continue
        ops.append(EditOp("ins", None, hyp[j - 1]))
        j -= 1
    ops.reverse()

    chosen_variants = {
        exp: vi
        for seg, vi in chosen.items()
        if (exp := lat.explicit_of_segment[seg]) is not None
    }
    return _ops_to_result(ops, chosen_variants, lat.ref_len_original)


def wer(ref: Utterance, hyp_tokens: tuple[str, ...] | list[str]) -> ScoreRecord:
    """Classic word error rate against the original transcript."""
    if ref.k < 1:
        raise ValidationError("reference has no tokens", utterance_id=ref.id, rule="non-empty-transcript")
    result = align(ref.tokens, hyp_tokens)
    return ScoreRecord(
        numerator=result.cost,
        denominator=ref.k,
        ratio=result.cost / ref.k,
        alignment=result,
    )


def oiwer(
    ref: VariationReference,
    hyp_tokens: tuple[str, ...] | list[str],
    policy: ScorePolicy = POLICY_ORIGINAL,
    cfg: NormConfig = DEFAULT_CONFIG,
    lattice: Lattice | None = None,
) -> ScoreRecord:
    """Orthographically-informed WER: edit cost against the best lattice path.

    Pass a prebuilt ``lattice`` to skip recompilation when scoring the same
    reference repeatedly.
    """
    lat = lattice if lattice is not None else build_lattice(ref, cfg)
    result = align_lattice(lat, hyp_tokens)
    den = ref.k if policy.denominator == "original" else result.ref_len_path
    if den < 1:
        raise ValidationError("reference has no tokens", utterance_id=ref.utterance.id, rule="non-empty-transcript")
    return ScoreRecord(
        numerator=result.cost,
        denominator=den,
        ratio=result.cost / den,
        alignment=result,
    )
