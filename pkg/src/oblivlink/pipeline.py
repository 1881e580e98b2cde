"""End-to-end private entity resolution across party roles.

Stages (each accounted separately in the cost ledger):

  encode_block  owners tokenize, encode, and index their records
  upload        encoded records and block-id vectors enter the backend
  merge_dedup   shared-key id pairs privately flag the candidate matrix
  obfuscate     noise is unioned in, then the matrix is revealed to the host
                under an explicitly granted, logged authority
  filter_er     Jaccard matching runs on revealed candidate cells only
  finalize      the candidate mask arithmetically erases noise-born results

The computation host (P3) observes dataset sizes, per-record container
counts, blocking keys, per-block sizes, and the obfuscated candidate
matrix; all of it is logged to the transcript so leakage audits can diff
against that budget.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .backends import make_backend
from .backends.base import APPROX, tagged_rng
from .blocking import (EncodedRecord, MinHasher, build_block_index,
                       optimal_band_plan, pack_tokens)
from .errors import StageError
from .intersect import JaccardParams, Strategy, jaccard_match, pick_strategy
from .machine import Machine, PrivateMatrix, PrivateVector

ROLE_OWNER_1 = "P1"
ROLE_OWNER_2 = "P2"
ROLE_HOST = "P3"


@dataclass
class ObfuscationPolicy:
    """Noise unioned into the candidate matrix before it is revealed; noise
    only ever adds cells.  Source is the host RNG or an owner-encrypted
    noise matrix."""
    rate: float = 0.05
    source: str = "host"

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("noise rate must lie in [0, 1]")
        if self.source not in ("host", "owner"):
            raise ValueError("noise source must be 'host' or 'owner'")


@dataclass
class PipelineConfig:
    backend: str = "clear"
    profile: str = "generic"
    strategy: str = "auto"
    t_jaccard: Fraction = Fraction(1, 2)
    t_block: float = 0.5
    num_perm: int = 128
    fp_weight: float = 0.5
    fn_weight: float = 0.5
    pack: int = 1
    rho: float = 0.05
    noise_source: str = "host"
    epsilon: float = 1e-6
    seed: int = 0
    latency_us: float = 0.0
    jobs: int = 1

    def jaccard_params(self) -> JaccardParams:
        return JaccardParams(Fraction(self.t_jaccard), self.epsilon)

    def flat_items(self) -> list[tuple[str, str]]:
        t = Fraction(self.t_jaccard)
        return [
            ("backend", self.backend), ("profile", self.profile),
            ("strategy", self.strategy), ("t_jaccard", f"{t.numerator}/{t.denominator}"),
            ("t_block", str(self.t_block)), ("num_perm", str(self.num_perm)),
            ("fp_weight", str(self.fp_weight)), ("fn_weight", str(self.fn_weight)),
            ("pack", str(self.pack)), ("rho", str(self.rho)),
            ("noise_source", str(self.noise_source)), ("epsilon", str(self.epsilon)),
            ("seed", str(self.seed)), ("latency_us", str(self.latency_us)),
            ("jobs", str(self.jobs)),
        ]


@dataclass
class PartyUpload:
    """What one data owner ships: encoded records, the blocking index over
    0-based upload rows, and the owner-side row-to-external-id map."""
    encoded: list[EncodedRecord]
    index: dict[str, list[int]]
    id_map: list[str]
    manifest: dict = field(default_factory=dict)


@dataclass
class RunResult:
    matches: list[tuple[str, str]]
    strategy: Strategy
    obfu_count: int
    evaluated_cells: int
    shape: tuple[int, int]
    ledger: object
    round_stats: object | None
    transcript: list
    trace: list


def prepare_upload(records, config: PipelineConfig) -> PartyUpload:
    """Owner-side encoding and blocking (no machine operations)."""
    token_sets = [r.token_set() for r in records]
    encoded = [pack_tokens(t, config.pack) for t in token_sets]
    plan = optimal_band_plan(config.t_block, config.num_perm,
                             config.fp_weight, config.fn_weight)
    hasher = MinHasher(config.num_perm, config.seed)
    index = build_block_index(token_sets, plan, hasher)
    manifest = {
        "size": len(records), "pack": config.pack, "t_block": config.t_block,
        "num_perm": config.num_perm, "bands": plan.bands, "rows": plan.rows,
        "seed": config.seed,
    }
    return PartyUpload(encoded, index, [r.record_id for r in records], manifest)


# -- machine-level stages ----------------------------------------------------


def merge_and_dedup(mach: Machine, b1: dict[str, PrivateVector],
                    b2: dict[str, PrivateVector], shape: tuple[int, int]) -> PrivateMatrix:
    """Alg.-style block merge: for every key present on both sides, each
    cross id pair is privately written true into the candidate matrix; the
    boolean matrix deduplicates pairs that share several keys."""
    rows, cols = shape
    cand = mach.enc(np.zeros(shape, dtype=np.int64))
    exactify = mach.b.domain == APPROX
    for bkey in sorted(b1):
        if bkey not in b2:
            continue
        r1_ids, r2_ids = b1[bkey], b2[bkey]
        for i in range(r1_ids.length):
            enc_r1 = mach.vector_lookup(r1_ids, mach.enc(i))
            if exactify:
                enc_r1 = mach.masked_round(enc_r1)
            for j in range(r2_ids.length):
                enc_r2 = mach.vector_lookup(r2_ids, mach.enc(j))
                if exactify:
                    enc_r2 = mach.masked_round(enc_r2)
                cand = mach.matrix_update(cand, enc_r1, enc_r2, mach.enc(1))
    return cand


def obfuscate(mach: Machine, cand: PrivateMatrix, policy: ObfuscationPolicy,
              noise_rng: np.random.Generator, authority) -> np.ndarray:
    """Union random true cells into the candidate matrix, then reveal it to
    the host under the granted authority."""
    shape = (cand.rows, cand.cols)
    noise_bits = (noise_rng.random(shape) < policy.rate).astype(np.int64)
    noise = mach.enc(noise_bits)
    ones = mach.enc(np.ones(shape, dtype=np.int64))
    noisy = mach.choose_mat(noise, ones, cand)
    revealed = np.asarray(mach.dec(noisy, authority), dtype=np.float64).reshape(shape)
    obfu = revealed > 0.5
    mach.b.observe(ROLE_HOST, "obfu_pairs", tuple(map(tuple, obfu.astype(int).tolist())))
    return obfu


def filter_and_resolve(mach: Machine, enc1: list[PrivateVector], enc2: list[PrivateVector],
                       obfu: np.ndarray, params: JaccardParams,
                       strategy: Strategy):
    """Evaluate the match bit exactly where the revealed matrix is true;
    every other cell stays encrypted false.  The loop structure is public
    and driven by the revealed matrix alone."""
    rows, cols = obfu.shape
    if rows == 0 or cols == 0:
        return mach.enc(np.zeros((rows, cols), dtype=np.int64)), 0
    evaluated = 0
    grid = []
    for i in range(rows):
        row_cells = []
        for j in range(cols):
            if obfu[i][j]:
                row_cells.append(jaccard_match(mach, enc1[i], enc2[j], params, strategy))
                evaluated += 1
            else:
                row_cells.append(mach.enc(0))
        grid.append(row_cells)
    return mach.matrix_from_cells(grid), evaluated


def finalize(mach: Machine, results: PrivateMatrix, dummies: PrivateMatrix,
             cand: PrivateMatrix) -> PrivateMatrix:
    """Arithmetic selection against the candidate mask removes every
    noise-induced result."""
    return mach.choose_mat(cand, results, dummies)


# -- full run -------------------------------------------------------------------


def _run_stage(backend, name, body):
    try:
        with backend.stage(name):
            return body()
    except StageError:
        raise
    except Exception as exc:  # tag the failing stage for diagnostics
        raise StageError(name, str(exc)) from exc


def run_pper_from_uploads(u1: PartyUpload, u2: PartyUpload, config: PipelineConfig,
                          backend=None) -> RunResult:
    own_backend = backend is None
    if backend is None:
        backend = make_backend(config.backend, config.profile, seed=config.seed,
                               latency_us=config.latency_us)
    mach = Machine(backend)
    shape = (len(u1.encoded), len(u2.encoded))
    params = config.jaccard_params()

    sizes1 = [len(r.containers) for r in u1.encoded]
    sizes2 = [len(r.containers) for r in u2.encoded]
    if config.strategy == "auto":
        mean1 = int(np.mean(sizes1)) if sizes1 else 1
        mean2 = int(np.mean(sizes2)) if sizes2 else 1
        strategy = pick_strategy(backend.caps, mean1, mean2,
                                 getattr(backend, "cost_weights", None))
    else:
        strategy = Strategy(config.strategy)

    def upload():
        backend.observe(ROLE_HOST, "dataset_size", ("D1", shape[0]))
        backend.observe(ROLE_HOST, "dataset_size", ("D2", shape[1]))
        enc1, enc2 = [], []
        for role, up, out in ((1, u1, enc1), (2, u2, enc2)):
            for row, rec in enumerate(up.encoded):
                backend.observe(ROLE_HOST, "record_container_count",
                                (f"D{role}", row, len(rec.containers)))
                out.append(mach.enc(list(rec.containers)))
        b1, b2 = {}, {}
        for role, up, out in ((1, u1, b1), (2, u2, b2)):
            for key in sorted(up.index):
                ids = up.index[key]
                backend.observe(ROLE_HOST, "block_key", key)
                backend.observe(ROLE_HOST, "block_size", (f"D{role}", key, len(ids)))
                out[key] = mach.enc(ids)
        return enc1, enc2, b1, b2

    enc1, enc2, b1, b2 = _run_stage(backend, "upload", upload)
    cand = _run_stage(backend, "merge_dedup",
                      lambda: merge_and_dedup(mach, b1, b2, shape))

    def reveal_obfuscated():
        policy = ObfuscationPolicy(config.rho, config.noise_source)
        noise_tag = "noise" if policy.source == "host" else "noise-owner"
        noise_rng = tagged_rng(noise_tag, config.seed)
        reveal_auth = backend.issue_authority("obfuscation-reveal", ROLE_HOST)
        backend.observe(ROLE_HOST, "authority_grant", "obfuscation-reveal")
        revealed = obfuscate(mach, cand, policy, noise_rng, reveal_auth)
        reveal_auth.revoke()
        return revealed

    obfu = _run_stage(backend, "obfuscate", reveal_obfuscated)
    results, evaluated = _run_stage(
        backend, "filter_er",
        lambda: filter_and_resolve(mach, enc1, enc2, obfu, params, strategy))

    def finish():
        dummies = mach.enc(np.zeros(shape, dtype=np.int64))
        final = finalize(mach, results, dummies, cand)
        owner_auth = backend.issue_authority("owners", f"{ROLE_OWNER_1}+{ROLE_OWNER_2}")
        bits = np.asarray(mach.dec(final, owner_auth), dtype=np.float64).reshape(shape)
        return sorted(
            (u1.id_map[i], u2.id_map[j])
            for i, j in zip(*np.nonzero(bits > 0.5)))

    matches = _run_stage(backend, "finalize", finish)

    stats = backend.round_stats() if hasattr(backend, "round_stats") else None
    result = RunResult(
        matches=matches, strategy=strategy,
        obfu_count=int(obfu.sum()), evaluated_cells=evaluated, shape=shape,
        ledger=backend.ledger, round_stats=stats,
        transcript=list(backend.transcript),
        trace=list(backend.trace) if backend.trace_enabled else [],
    )
    if own_backend:
        backend.close()
    return result


def run_pper(d1_records, d2_records, config: PipelineConfig, backend=None) -> RunResult:
    """Full staged run from raw records: encode/block owner-side, upload,
    merge, obfuscate, filter, finalize.  Matches come back as sorted
    external-id pairs."""
    u1 = prepare_upload(d1_records, config)
    u2 = prepare_upload(d2_records, config)
    return run_pper_from_uploads(u1, u2, config, backend=backend)


# -- transport files ------------------------------------------------------------


def write_party_dir(path: str, upload: PartyUpload):
    """Serialize one owner's upload: records.enc, blocks.enc, manifest, and
    the owner-side id map."""
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "records.enc"), "w") as fh:
        for row, rec in enumerate(upload.encoded):
            fh.write(json.dumps({"row": row, "containers": list(rec.containers),
                                 "pack": rec.pack}) + "\n")
    with open(os.path.join(path, "blocks.enc"), "w") as fh:
        json.dump({k: v for k, v in sorted(upload.index.items())}, fh, indent=0)
    with open(os.path.join(path, "manifest"), "w") as fh:
        json.dump(upload.manifest, fh, indent=2, sort_keys=True)
    with open(os.path.join(path, "idmap.csv"), "w") as fh:
        fh.write("row,record_id\n")
        for row, rid in enumerate(upload.id_map):
            fh.write(f"{row},{rid}\n")


def read_party_dir(path: str) -> PartyUpload:
    encoded = []
    with open(os.path.join(path, "records.enc")) as fh:
        for line in fh:
            item = json.loads(line)
            encoded.append(EncodedRecord(str(item["row"]), tuple(item["containers"]),
                                         item.get("pack", 1)))
    with open(os.path.join(path, "blocks.enc")) as fh:
        index = {k: list(map(int, v)) for k, v in json.load(fh).items()}
    with open(os.path.join(path, "manifest")) as fh:
        manifest = json.load(fh)
    id_map = []
    with open(os.path.join(path, "idmap.csv")) as fh:
        next(fh)
        for line in fh:
            row, rid = line.rstrip("\n").split(",", 1)
            id_map.append(rid)
    return PartyUpload(encoded, index, id_map, manifest)
