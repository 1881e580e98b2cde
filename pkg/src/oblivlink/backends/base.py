"""Backend contexts for the oblivious machine.

A backend realizes the primitive operator set (encrypt/decrypt, element-wise
arithmetic, dot products, rotations, gates) over opaque payloads.  Every
backend carries:

  * a capability table that strategy selection consults,
  * an operation-cost ledger (counts per pipeline stage and primitive),
  * an optional execution trace used to assert data-oblivious behaviour,
  * a transcript of role-visible observations used for leakage audits,
  * a registry of decryption authorities.

Two numeric domains exist: ``exact-integer-64`` (wrapping 64-bit integers)
and ``approximate-fixed-point`` (floating point with small tolerances).
"""

from __future__ import annotations

import itertools
import zlib
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from ..errors import AuthorityError, CapabilityError, DomainError, TaintViolation

MASK64 = (1 << 64) - 1

EXACT = "exact-integer-64"
APPROX = "approximate-fixed-point"

_context_counter = itertools.count(1)


def to_u64(value) -> np.ndarray:
    """Coerce python/numpy numbers to a wrapping uint64 array (two's
    complement for negatives)."""
    arr = np.asarray(value)
    if arr.dtype == np.uint64:
        return arr.copy()
    if arr.dtype.kind in "iu":
        return arr.astype(np.int64, copy=False).view(np.uint64).copy()
    try:
        return np.asarray(value, dtype=np.uint64)
    except (OverflowError, ValueError, TypeError):
        pass
    try:
        return np.asarray(value, dtype=np.int64).view(np.uint64)
    except (OverflowError, ValueError, TypeError):
        flat = [int(v) & MASK64 for v in np.asarray(value, dtype=object).ravel()]
        return np.array(flat, dtype=np.uint64).reshape(np.asarray(value, dtype=object).shape)


def lift_signed(arr: np.ndarray):
    """Reinterpret wrapped uint64 values as signed integers (python ints)."""
    return np.asarray(arr).view(np.int64).tolist()


def tagged_rng(tag: str, seed) -> np.random.Generator:
    """Independent generator for one purpose: the tag namespaces the seed so
    subsystems sharing a master seed never share a stream."""
    parts = seed if isinstance(seed, tuple) else (seed,)
    ints = tuple(int(p) % (1 << 63) if isinstance(p, int) else zlib.crc32(str(p).encode())
                 for p in parts)
    return np.random.default_rng((zlib.crc32(tag.encode()),) + ints)


@dataclass(frozen=True)
class Capabilities:
    """Primitive features a backend declares; strategies require subsets."""

    native_eq: bool = True
    rotation: bool = True
    repeat_elements: bool = True
    sort: bool = True
    join: bool = True
    division: bool = True
    compare: bool = True

    def flags(self) -> dict:
        return {
            "native_eq": self.native_eq,
            "rotation": self.rotation,
            "repeat_elements": self.repeat_elements,
            "sort": self.sort,
            "join": self.join,
            "division": self.division,
            "compare": self.compare,
        }


CAPS_ALL = Capabilities()
# Mirrors a SIMD/slot-packing HE platform: rotations and slot replication are
# cheap, no native equality/sort/join, division via the masked-reciprocal
# protocol only.
CAPS_SIMD = Capabilities(native_eq=False, rotation=True, repeat_elements=True,
                         sort=False, join=False, division=True, compare=True)
# Mirrors an MPC platform with native comparison protocols, gather-style
# element repetition, sorting, and an oblivious table join; no slot rotation.
CAPS_SHAREMIND = Capabilities(native_eq=True, rotation=False, repeat_elements=True,
                              sort=True, join=True, division=False, compare=True)


class OpCostLedger:
    """Primitive-operation counts keyed by (pipeline stage, primitive)."""

    def __init__(self):
        self.counts: dict[tuple[str, str], int] = {}

    def tick(self, stage: str, op: str, n: int = 1):
        key = (stage, op)
        self.counts[key] = self.counts.get(key, 0) + n

    def merge(self, other: "OpCostLedger"):
        for key, n in other.counts.items():
            self.counts[key] = self.counts.get(key, 0) + n

    def by_op(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for (_, op), n in self.counts.items():
            out[op] = out.get(op, 0) + n
        return out

    def by_stage(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for (stage, _), n in self.counts.items():
            out[stage] = out.get(stage, 0) + n
        return out

    def total(self, weights: dict[str, float] | None = None) -> float:
        if not weights:
            return float(sum(self.counts.values()))
        return float(sum(n * weights.get(op, 1.0) for (_, op), n in self.counts.items()))

    def rows(self) -> list[tuple[str, str, int]]:
        return sorted((stage, op, n) for (stage, op), n in self.counts.items())

    def to_csv(self) -> str:
        lines = ["stage,primitive,count"]
        lines += [f"{s},{o},{n}" for s, o, n in self.rows()]
        return "\n".join(lines) + "\n"


@dataclass
class Observation:
    """One role-visible fact recorded in the transcript."""
    role: str
    kind: str
    value: object


class DecryptionAuthority:
    """Token naming who may decrypt values from one backend context."""

    def __init__(self, context_id: int, name: str, holder: str):
        self.context_id = context_id
        self.name = name
        self.holder = holder
        self.active = True

    def revoke(self):
        self.active = False

    def __repr__(self):
        state = "active" if self.active else "revoked"
        return f"DecryptionAuthority({self.name!r}, holder={self.holder!r}, {state})"


def assert_oblivious(trace_a: list, trace_b: list):
    """Twin-trace check: two runs over identical public shapes must perform
    the identical primitive sequence regardless of private contents."""
    if len(trace_a) != len(trace_b):
        raise TaintViolation(
            f"trace lengths differ ({len(trace_a)} vs {len(trace_b)}): "
            "operation count depended on private contents")
    for i, (a, b) in enumerate(zip(trace_a, trace_b)):
        if a != b:
            raise TaintViolation(
                f"trace diverges at step {i}: {a} vs {b}", operation=a[0], site=i)


class Backend:
    """Common machinery: identity, ledger, trace, transcript, authorities.

    Concrete backends implement the primitive methods; every primitive must
    call ``_record`` with its name and public shape metadata so that cost
    accounting and the obliviousness trace stay in lockstep.
    """

    kind = "abstract"
    profile = "generic"

    def __init__(self, caps: Capabilities, domain: str, seed: int = 0):
        self.context_id = next(_context_counter)
        self.caps = caps
        self.domain = domain
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.ledger = OpCostLedger()
        self.trace: list[tuple] = []
        self.trace_enabled = False
        self.transcript: list[Observation] = []
        self.cost_weights: dict[str, float] = {}
        self._stage = "main"
        self._authorities: list[DecryptionAuthority] = []

    # -- accounting ------------------------------------------------------

    @contextmanager
    def stage(self, name: str):
        prev, self._stage = self._stage, name
        try:
            yield self
        finally:
            self._stage = prev

    def _record(self, op: str, *meta):
        self.ledger.tick(self._stage, op)
        if self.trace_enabled:
            self.trace.append((op,) + meta)

    def enable_trace(self, on: bool = True):
        self.trace_enabled = on
        if on:
            self.trace = []

    def observe(self, role: str, kind: str, value):
        self.transcript.append(Observation(role, kind, value))

    def observations(self, role: str) -> list[Observation]:
        return [o for o in self.transcript if o.role == role]

    # -- authorities -----------------------------------------------------

    def issue_authority(self, name: str, holder: str) -> DecryptionAuthority:
        auth = DecryptionAuthority(self.context_id, name, holder)
        self._authorities.append(auth)
        return auth

    def check_authority(self, authority):
        if not isinstance(authority, DecryptionAuthority):
            raise AuthorityError("decryption requires a DecryptionAuthority token")
        if authority.context_id != self.context_id:
            raise AuthorityError(
                f"authority {authority.name!r} was issued by another context")
        if not authority.active:
            raise AuthorityError(f"authority {authority.name!r} has been revoked")

    # -- capability gating -----------------------------------------------

    def require(self, capability: str):
        if not self.caps.flags()[capability]:
            raise CapabilityError(
                f"backend {self.kind}/{self.profile} lacks capability {capability!r}")

    def require_domain(self, domain: str, why: str):
        if self.domain != domain:
            raise DomainError(f"{why} requires {domain} domain, backend is {self.domain}")

    # -- lifecycle ---------------------------------------------------------

    def clone(self) -> "Backend":
        """Independent context with the same parameters and a derived seed;
        ledgers are separate and may be merged after parallel work."""
        raise NotImplementedError

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
