"""Data-owner-side encoding and MinHashLSH blocking.

Records are normalized, tokenized into distinct overlapping character
bigrams (8-bit characters, so each token is a 16-bit code), optionally
packed four-to-a-container, MinHash-signed with 128 seeded universal
hashes, and indexed under per-band blocking keys.  Blocking keys are public
by design; the record-id vectors they map to are encrypted before leaving
the owner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends.base import tagged_rng
from .machine import Machine, PrivateVector

TOKEN_BITS = 16
TOKEN_RANGE = (0, 1 << TOKEN_BITS)
PAD_CHAR = " "

# universal-hash modulus: prime above 2^32, keeps a*x+b inside uint64
_MERSENNE_PRIME = 4294967311
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class TokenSet:
    """A record id plus its distinct 16-bit bigram codes."""
    record_id: str
    tokens: frozenset[int]

    def sorted_tokens(self) -> list[int]:
        return sorted(self.tokens)


@dataclass(frozen=True)
class EncodedRecord:
    """Token codes packed into 64-bit containers (k tokens per container)."""
    record_id: str
    containers: tuple[int, ...]
    pack: int


def normalize_text(fields: dict[str, str], order: list[str], sep: str = " ") -> str:
    """Lowercased concatenation of the configured fields."""
    return sep.join(str(fields.get(name, "")).lower() for name in order)


def tokenize_bigrams(text: str, record_id: str = "") -> TokenSet:
    """Distinct overlapping bigrams of normalized text.

    Characters must fit 8 bits; a bigram code is first*256 + second.  Empty
    or single-character text yields one space-padded bigram.
    """
    for ch in text:
        if ord(ch) > 0xFF:
            raise ValueError(f"non-8-bit character {ch!r} in {record_id or text!r}")
    if len(text) < 2:
        text = (text + PAD_CHAR * 2)[:2]
    codes = {(ord(text[i]) << 8) | ord(text[i + 1]) for i in range(len(text) - 1)}
    return TokenSet(record_id, frozenset(codes))


def pack_tokens(tokens: TokenSet, pack: int = 1) -> EncodedRecord:
    """ceil(|tokens|/k) containers from the ascending token codes; k=4 packs
    four codes big-endian per container (zero padded), k=1 keeps exact
    set semantics."""
    if pack not in (1, 4):
        raise ValueError("packing factor must be 1 or 4")
    codes = tokens.sorted_tokens()
    if pack == 1:
        return EncodedRecord(tokens.record_id, tuple(codes), 1)
    containers = []
    for i in range(0, len(codes), pack):
        chunk = codes[i:i + pack]
        value = 0
        for j in range(pack):
            value = (value << TOKEN_BITS) | (chunk[j] if j < len(chunk) else 0)
        containers.append(value)
    return EncodedRecord(tokens.record_id, tuple(containers), pack)


class MinHasher:
    """128 seeded universal hashes (a*x + b mod p); the signature keeps the
    minimum of each hash over the token codes."""

    def __init__(self, num_perm: int = 128, seed: int = 1):
        self.num_perm = num_perm
        self.seed = seed
        rng = tagged_rng("minhash", seed)
        self.a = rng.integers(1, _MERSENNE_PRIME, size=num_perm, dtype=np.uint64)
        self.b = rng.integers(0, _MERSENNE_PRIME, size=num_perm, dtype=np.uint64)

    def signature(self, tokens) -> np.ndarray:
        values = tokens.tokens if isinstance(tokens, TokenSet) else tokens
        if not values:
            return np.full(self.num_perm, _MERSENNE_PRIME - 1, dtype=np.uint64)
        x = np.fromiter(values, dtype=np.uint64)
        hashed = (self.a[:, None] * x[None, :] + self.b[:, None]) % np.uint64(_MERSENNE_PRIME)
        return hashed.min(axis=1)

    def estimate_similarity(self, sig1: np.ndarray, sig2: np.ndarray) -> float:
        return float((sig1 == sig2).mean())


@dataclass
class BandPlan:
    """LSH layout: ``bands`` keys per record, each hashing ``rows``
    signature slots (the blocking key size)."""
    bands: int
    rows: int
    num_perm: int = 128
    fp_weight: float = 0.5
    fn_weight: float = 0.5
    objective: float = 0.0

    def __post_init__(self):
        if self.bands < 1 or self.rows < 1:
            raise ValueError("bands and rows must be positive")
        if self.bands * self.rows > self.num_perm:
            raise ValueError("bands*rows exceeds the number of permutations")


def collision_probability(similarity: float, plan: BandPlan) -> float:
    """Chance two records of the given Jaccard similarity share a key."""
    return 1.0 - (1.0 - similarity ** plan.rows) ** plan.bands


def _weighted_error(threshold: float, bands: int, rows: int,
                    fp_weight: float, fn_weight: float, step: float = 0.001) -> float:
    # midpoint rule over the LSH S-curve, matching the step the band plan
    # figures were produced with
    s = np.arange(step / 2, 1.0, step)
    p = 1.0 - (1.0 - s ** float(rows)) ** float(bands)
    below = s < threshold
    fp = p[below].sum() * step
    fn = (1.0 - p[~below]).sum() * step
    return fp_weight * fp + fn_weight * fn


def optimal_band_plan(threshold: float, num_perm: int = 128,
                      fp_weight: float = 0.5, fn_weight: float = 0.5) -> BandPlan:
    """Exhaustive (bands, rows) search with bands*rows <= num_perm,
    minimizing the weighted false-positive/false-negative area."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("blocking threshold must lie strictly between 0 and 1")
    best = None
    for bands in range(1, num_perm + 1):
        for rows in range(1, num_perm // bands + 1):
            err = _weighted_error(threshold, bands, rows, fp_weight, fn_weight)
            if best is None or err < best[0]:
                best = (err, bands, rows)
    err, bands, rows = best
    return BandPlan(bands, rows, num_perm, fp_weight, fn_weight, objective=err)


def _fnv1a_u64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def band_keys(signature: np.ndarray, plan: BandPlan) -> list[str]:
    """One public key per band: band index plus a stable 64-bit hash of the
    band's signature slots, hex encoded."""
    keys = []
    for band in range(plan.bands):
        chunk = signature[band * plan.rows:(band + 1) * plan.rows]
        digest = _fnv1a_u64(chunk.tobytes())
        keys.append(f"{band:03d}-{digest:016x}")
    return keys


def build_block_index(token_sets: list[TokenSet], plan: BandPlan,
                      hasher: MinHasher) -> dict[str, list[int]]:
    """Owner-side inverted index: blocking key -> 0-based record rows (the
    row order is the upload order)."""
    index: dict[str, list[int]] = {}
    for row, tokens in enumerate(token_sets):
        for key in band_keys(hasher.signature(tokens), plan):
            index.setdefault(key, []).append(row)
    return index


def encrypt_blocks(index: dict[str, list[int]], mach: Machine) -> dict[str, PrivateVector]:
    """Encrypt each key's record-id vector before it leaves the owner."""
    return {key: mach.enc(rows) for key, rows in sorted(index.items())}


def build_blocks(token_sets: list[TokenSet], plan: BandPlan, hasher: MinHasher,
                 mach: Machine) -> dict[str, PrivateVector]:
    return encrypt_blocks(build_block_index(token_sets, plan, hasher), mach)
