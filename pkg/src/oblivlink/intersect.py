"""Private set-intersection-size strategies and the Jaccard match decision.

Five interchangeable ways to compute |set(v1) ∩ set(v2)| over private
vectors with unique entries, differing in which backend capabilities they
lean on:

  PJ  pairwise join: serial scalar equality over every pair.
  VR  vector rotation: pad to a common length, rotate one operand slot by
      slot and count zero differences (private-set-intersection style).
  VE  vector extension: tile one vector, repeat the other element-wise, and
      count zeros of a single difference.
  SO  sorting: merge, oblivious sort, count equal adjacent slots.
  MJ  matrix join: one oblivious equality-join gate.

All strategies decrypt to the same cardinality; their primitive-operation
footprints differ and are what the cost ledger measures.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

from .backends.base import EXACT
from .errors import CapabilityError
from .machine import Machine, PrivateScalar, PrivateVector, TAU_NUM

# Public padding value for VR, outside the 16-bit-token / packed-container
# encoding by construction.
PAD_SENTINEL = (1 << 63) - 1


class Strategy(enum.Enum):
    PJ = "pj"
    VR = "vr"
    VE = "ve"
    SO = "so"
    MJ = "mj"


def strategy_supported(strategy: Strategy, caps) -> bool:
    """Capability table: which strategies a backend can execute."""
    if strategy is Strategy.PJ:
        return caps.native_eq or caps.division
    if strategy is Strategy.VR:
        return caps.rotation and (caps.native_eq or caps.division)
    if strategy is Strategy.VE:
        return caps.repeat_elements and (caps.native_eq or caps.division)
    if strategy is Strategy.SO:
        return caps.sort
    if strategy is Strategy.MJ:
        return caps.join
    raise ValueError(strategy)


def supported_strategies(caps) -> list[Strategy]:
    return [s for s in Strategy if strategy_supported(s, caps)]


def _eq_ops(caps) -> int:
    # primitive ops per element-wise equality: one native gate, or the
    # arithmetic workaround chain (sub, enc, add, masked reciprocal's
    # enc/mul/dec/enc/mul, enc, mul, mul, enc, add)
    return 1 if caps.native_eq else 13


def _zero_count_ops(caps) -> int:
    return 4 + _eq_ops(caps)


def estimated_cost(strategy: Strategy, m: int, n: int, caps, weights=None) -> float:
    """Predicted ledger total for one intersection, in primitive-op units.

    Derived from the implementations below with every vector primitive
    costing one unit (or its weight); used by auto strategy selection.
    """
    w = weights or {}

    def u(op, k=1.0):
        return k * w.get(op, 1.0)

    big = max(m, n, 1)
    if strategy is Strategy.PJ:
        return m * n * (u("eq", _eq_ops(caps)) + u("add") + u("get")) + m * u("get") + u("enc")
    if strategy is Strategy.VR:
        return big * (u("rotate") + u("sub") + u("add") + u("eq", _zero_count_ops(caps))) + 2 * u("enc")
    if strategy is Strategy.VE:
        return u("tile") + u("repeat_each") + u("sub") + u("eq", _zero_count_ops(caps))
    if strategy is Strategy.SO:
        return u("concat") + u("sort") + 2 * u("slice") + u("sub") + u("eq", _zero_count_ops(caps))
    if strategy is Strategy.MJ:
        return u("join")
    raise ValueError(strategy)


def pick_strategy(caps, m: int, n: int, weights=None) -> Strategy:
    """Cheapest supported strategy under the backend's cost model."""
    options = supported_strategies(caps)
    if not options:
        raise CapabilityError("backend supports no intersection strategy")
    return min(options, key=lambda s: estimated_cost(s, m, n, caps, weights))


def _debug_check_unique(mach: Machine, *vectors):
    """Uniqueness precondition; only the cleartext oracle can look."""
    if not getattr(mach.b, "is_oracle", False):
        return
    for v in vectors:
        values = mach.b.peek(v.payload)
        if len(values) != len(set(values)):
            raise ValueError("intersection input contains duplicate entries")


def zero_count(mach: Machine, diff: PrivateVector) -> PrivateScalar:
    """Private count of zero slots: equality against broadcast zero, then a
    dot product with all-ones."""
    n = diff.length
    zero = mach.enc(0)
    bits = mach.eeq(diff, mach.broadcast(zero, n))
    ones = mach.enc([1] * n)
    return mach.dot(bits, ones)


def isect_pj(mach: Machine, v1: PrivateVector, v2: PrivateVector,
             debug: bool = False) -> PrivateScalar:
    """Pairwise join: |v1| * |v2| serial scalar equality gates."""
    if debug:
        _debug_check_unique(mach, v1, v2)
    count = mach.enc(0)
    for i in range(v1.length):
        a = mach.vget(v1, i)
        for j in range(v2.length):
            bit = mach.eeq_scalar(a, mach.vget(v2, j))
            count = mach.add(count, bit)
    return count


def _pad_to(mach: Machine, v: PrivateVector, length: int, pad) -> PrivateVector:
    if v.length >= length:
        return v
    return mach.concat(v, mach.enc([pad] * (length - v.length)))


def vr_diff_sequence(mach: Machine, v1: PrivateVector, v2: PrivateVector,
                     pad=PAD_SENTINEL) -> list[PrivateVector]:
    """The per-rotation difference vectors VR counts zeros over.

    The shorter input is padded with the public sentinel to the common
    length L; the first difference uses the unrotated second operand, and
    the running operand is right-rotated once per step (L rotations, L
    subtractions in total).
    """
    length = max(v1.length, v2.length)
    v1p = _pad_to(mach, v1, length, pad)
    v2p = _pad_to(mach, v2, length, pad)
    diffs = []
    for _ in range(length):
        diffs.append(mach.esub(v1p, v2p))
        v2p = mach.rshift(v2p, 1)
    return diffs


def isect_vr(mach: Machine, v1: PrivateVector, v2: PrivateVector,
             pad=PAD_SENTINEL, token_range=None, debug: bool = False) -> PrivateScalar:
    """Vector rotation: rotate max(|v1|,|v2|) times, accumulating the zero
    count of each difference; the rotation count intentionally covers the
    padded length so every slot pairing is visited exactly once."""
    if token_range is not None and token_range[0] <= pad < token_range[1]:
        raise ValueError(f"padding value {pad} collides with the token encoding range")
    if debug:
        _debug_check_unique(mach, v1, v2)
    total = mach.enc(0)
    for diff in vr_diff_sequence(mach, v1, v2, pad):
        total = mach.add(total, zero_count(mach, diff))
    return total


def ve_extend(mach: Machine, v1: PrivateVector, v2: PrivateVector):
    """VE intermediates: v1 tiled |v2| times, each v2 element repeated |v1|
    times."""
    return mach.tile(v1, v2.length), mach.repeat_each(v2, v1.length)


def isect_ve(mach: Machine, v1: PrivateVector, v2: PrivateVector,
             debug: bool = False) -> PrivateScalar:
    """Vector extension: one difference over the extended vectors."""
    if debug:
        _debug_check_unique(mach, v1, v2)
    v1e, v2e = ve_extend(mach, v1, v2)
    return zero_count(mach, mach.esub(v1e, v2e))


def so_adjacent_diff(mach: Machine, v1: PrivateVector, v2: PrivateVector) -> PrivateVector:
    """SO intermediate: head minus tail of the sorted merge."""
    merged = mach.sort_vec(mach.concat(v1, v2))
    total = merged.length
    head = mach.slice(merged, 0, total - 1)
    tail = mach.slice(merged, 1, total)
    return mach.esub(head, tail)


def isect_so(mach: Machine, v1: PrivateVector, v2: PrivateVector,
             debug: bool = False) -> PrivateScalar:
    """Sorting: equal adjacent slots of the sorted merge straddle the two
    unique-entry inputs, so counting them counts the overlap."""
    if debug:
        _debug_check_unique(mach, v1, v2)
    if v1.length + v2.length <= 1:
        return mach.enc(0)
    return zero_count(mach, so_adjacent_diff(mach, v1, v2))


def isect_mj(mach: Machine, v1: PrivateVector, v2: PrivateVector,
             debug: bool = False) -> PrivateScalar:
    """Matrix join: one oblivious equality-join gate."""
    if debug:
        _debug_check_unique(mach, v1, v2)
    return mach.join_count(v1, v2)


_DISPATCH = {
    Strategy.PJ: isect_pj,
    Strategy.VR: isect_vr,
    Strategy.VE: isect_ve,
    Strategy.SO: isect_so,
    Strategy.MJ: isect_mj,
}


def intersection_size(mach: Machine, v1: PrivateVector, v2: PrivateVector,
                      strategy: Strategy, debug: bool = False) -> PrivateScalar:
    if not strategy_supported(strategy, mach.b.caps):
        raise CapabilityError(
            f"strategy {strategy.value} unsupported on {mach.b.kind}/{mach.b.profile}")
    return _DISPATCH[strategy](mach, v1, v2, debug=debug)


@dataclass
class JaccardParams:
    """Match threshold as an exact rational, plus the tolerance added on
    approximate backends."""

    threshold: Fraction
    epsilon: float = TAU_NUM

    def __post_init__(self):
        self.threshold = Fraction(self.threshold)
        if not 0 < self.threshold < 1:
            raise ValueError("jaccard threshold must lie strictly between 0 and 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")


def jaccard_match(mach: Machine, r1: PrivateVector, r2: PrivateVector,
                  params: JaccardParams, strategy: Strategy,
                  debug: bool = False) -> PrivateScalar:
    """Private bit: similarity inter/(|r1|+|r2|-inter) above the threshold.

    Exact backends evaluate the division-free rearrangement
    den*inter > num*(s1+s2-inter) with strict inequality; approximate
    backends evaluate the quotient form with epsilon slack.
    """
    s1 = mach.size(r1)
    s2 = mach.size(r2)
    inter = intersection_size(mach, r1, r2, strategy, debug=debug)
    if mach.b.domain == EXACT:
        num, den = params.threshold.numerator, params.threshold.denominator
        lhs = mach.mul(mach.enc(den), inter)
        union = mach.sub(mach.enc(s1 + s2), inter)
        rhs = mach.mul(mach.enc(num), union)
        return mach.gt(lhs, rhs)
    union = mach.sub(mach.enc(float(s1 + s2)), inter)
    sim = mach.mul(inter, mach.masked_reciprocal(union))
    lhs = mach.add(sim, mach.enc(params.epsilon))
    return mach.gt(lhs, mach.enc(float(params.threshold)))
