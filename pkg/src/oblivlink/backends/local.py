"""In-process backends over numpy payloads.

``ClearBackend`` is the cleartext oracle: every capability, exact results,
and (uniquely) a ``peek`` hook so debug-mode precondition checks can inspect
payloads.  ``SimBackend`` is the cost-accounting oblivious simulator: same
numerics, but capabilities restricted by profile and leakage surfaced through
the transcript.  Neither performs real encryption; opacity is enforced at the
machine layer and audited via trace/transcript.
"""

from __future__ import annotations

import numpy as np

from .base import (APPROX, CAPS_ALL, CAPS_SHAREMIND, CAPS_SIMD, EXACT,
                   Backend, Capabilities, lift_signed, to_u64)


class LocalBackend(Backend):
    """Shared numpy implementation of the primitive layer.

    Exact domain payloads are wrapping ``uint64`` arrays (two's complement
    view for signed semantics); approximate domain payloads are ``float64``.
    """

    is_oracle = False

    def __init__(self, caps: Capabilities, domain: str, seed: int = 0):
        super().__init__(caps, domain, seed)
        self._clones = 0

    # -- payload coercion --------------------------------------------------

    def _coerce(self, value) -> np.ndarray:
        if self.domain == EXACT:
            return to_u64(value)
        return np.asarray(value, dtype=np.float64)

    def _signed(self, payload: np.ndarray) -> np.ndarray:
        if self.domain == EXACT:
            return np.asarray(payload).view(np.int64)
        return payload

    # -- enc / dec -----------------------------------------------------------

    def enc(self, value) -> np.ndarray:
        payload = self._coerce(value)
        self._record("enc", payload.shape)
        return payload

    def dec(self, payload: np.ndarray):
        self._record("dec", payload.shape)
        if self.domain == EXACT:
            return lift_signed(payload)
        return payload.tolist()

    # -- element-wise arithmetic ----------------------------------------------

    def _ew(self, op: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self._record(op, a.shape)
        with np.errstate(over="ignore"):
            if op == "add":
                return a + b
            if op == "sub":
                return a - b
            return a * b

    def add(self, a, b):
        return self._ew("add", a, b)

    def sub(self, a, b):
        return self._ew("sub", a, b)

    def mul(self, a, b):
        return self._ew("mul", a, b)

    # -- linear algebra ------------------------------------------------------

    def dot(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self._record("dot", a.shape)
        with np.errstate(over="ignore"):
            return np.asarray((a * b).sum())

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self._record("matmul", a.shape, b.shape)
        with np.errstate(over="ignore"):
            return (a[:, :, None] * b[None, :, :]).sum(axis=1)

    def vecmat(self, v: np.ndarray, m: np.ndarray) -> np.ndarray:
        self._record("vecmat", v.shape, m.shape)
        with np.errstate(over="ignore"):
            return (v[:, None] * m).sum(axis=0)

    def outer(self, col: np.ndarray, row: np.ndarray) -> np.ndarray:
        self._record("outer", col.shape, row.shape)
        with np.errstate(over="ignore"):
            return col[:, None] * row[None, :]

    def transpose(self, m: np.ndarray) -> np.ndarray:
        self._record("transpose", m.shape)
        return m.T.copy()

    # -- vector structure ------------------------------------------------------

    def rotate(self, v: np.ndarray, k: int, cyclic: bool = True, fill=None) -> np.ndarray:
        self.require("rotation")
        self._record("rotate", v.shape, k, cyclic)
        if cyclic:
            return np.roll(v, k)
        if k == 0 or len(v) == 0:
            return v.copy()
        out = np.full_like(v, self._coerce(fill))
        if 0 < k < len(v):
            out[k:] = v[:-k]
        elif -len(v) < k < 0:
            out[:k] = v[-k:]
        return out

    def tile(self, v: np.ndarray, times: int) -> np.ndarray:
        self.require("repeat_elements")
        self._record("tile", v.shape, times)
        return np.tile(v, times)

    def repeat_each(self, v: np.ndarray, times: int) -> np.ndarray:
        self.require("repeat_elements")
        self._record("repeat_each", v.shape, times)
        return np.repeat(v, times)

    def concat(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self._record("concat", a.shape, b.shape)
        return np.concatenate([a, b])

    def slice(self, v: np.ndarray, lo: int, hi: int) -> np.ndarray:
        self._record("slice", v.shape, lo, hi)
        return v[lo:hi].copy()

    def vget(self, v: np.ndarray, i: int) -> np.ndarray:
        self._record("get", v.shape, i)
        return np.asarray(v[i])

    def broadcast(self, s: np.ndarray, shape) -> np.ndarray:
        self._record("broadcast", tuple(shape))
        return np.broadcast_to(s, shape).copy()

    def stack(self, rows) -> np.ndarray:
        self._record("stack", (len(rows),))
        return np.stack([np.asarray(r) for r in rows])

    # -- gates ---------------------------------------------------------------

    def eq(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.require("native_eq")
        self._record("eq", a.shape)
        bit = (a == b)
        return self._coerce(bit.astype(np.int64))

    def gt(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.require("compare")
        self._record("gt", a.shape)
        bit = (self._signed(a) > self._signed(b))
        return self._coerce(bit.astype(np.int64))

    def sort(self, v: np.ndarray) -> np.ndarray:
        self.require("sort")
        self._record("sort", v.shape)
        if self.domain == EXACT:
            return np.sort(self._signed(v)).view(np.uint64)
        return np.sort(v)

    def join_count(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.require("join")
        self._record("join", a.shape, b.shape)
        return self._coerce(len(np.intersect1d(a, b)))

    # -- masked reciprocal protocol ---------------------------------------------

    def masked_reciprocal(self, x: np.ndarray, helper_role: str = "P3") -> np.ndarray:
        """Reciprocal of a private value without a division gate.

        A data owner contributes fresh randomness r; the helper decrypts only
        the product r*x, inverts it in clear, and the re-encrypted inverse is
        multiplied by enc(r) again.  The helper's transcript therefore holds
        r*x, never x.
        """
        self.require("division")
        self.require_domain(APPROX, "masked reciprocal")
        r = self.rng.uniform(0.5, 2.0, size=x.shape)
        r_enc = self.enc(r)
        masked = self.mul(x, r_enc)
        opened = self.dec(masked)
        self.observe(helper_role, "masked_value", opened)
        opened_arr = np.asarray(opened, dtype=np.float64)
        if np.any(opened_arr == 0.0):
            raise ZeroDivisionError("masked reciprocal of zero")
        recip = self.enc(1.0 / opened_arr)
        return self.mul(recip, r_enc)

    def masked_round(self, x: np.ndarray, helper_role: str = "P3") -> np.ndarray:
        """Snap a near-integer private value back to the exact integer.

        Same helper pattern as the reciprocal: an additive integer mask r
        hides the value, the helper rounds the opened x+r in clear, and r is
        subtracted again.  Approximate backends need this between a private
        lookup and the mask generation that consumes its result, because the
        equality workaround's residual error scales with the looked-up
        magnitude and would flatten the next one-hot mask.
        """
        self.require("division")
        if self.domain == EXACT:
            return x
        r = self.rng.integers(1 << 16, 1 << 24, size=x.shape).astype(np.float64)
        r_enc = self.enc(r)
        masked = self.add(x, r_enc)
        opened = self.dec(masked)
        self.observe(helper_role, "masked_value", opened)
        rounded = self.enc(np.rint(np.asarray(opened, dtype=np.float64)))
        return self.sub(rounded, r_enc)

    # -- lifecycle ---------------------------------------------------------------

    def _child_seed(self) -> tuple:
        self._clones += 1
        base = self.seed if isinstance(self.seed, tuple) else (self.seed,)
        return base + (self._clones,)

    def clone(self):
        child = type(self)(seed=self._child_seed())
        child.trace_enabled = self.trace_enabled
        return child


class ClearBackend(LocalBackend):
    """Cleartext oracle: all capabilities, plain arithmetic, peek allowed."""

    kind = "clear"
    profile = "generic"
    is_oracle = True

    def __init__(self, seed: int = 0):
        super().__init__(CAPS_ALL, EXACT, seed)

    def peek(self, payload: np.ndarray):
        """Debug-only payload inspection; exists on the oracle alone."""
        return lift_signed(payload)


_PROFILES = {
    "generic": (CAPS_ALL, EXACT),
    "simd": (CAPS_SIMD, APPROX),
    "sharemind": (CAPS_SHAREMIND, EXACT),
}


class SimBackend(LocalBackend):
    """Oblivious simulator: profile-restricted capabilities plus cost,
    trace, and transcript accounting."""

    kind = "oblivious-sim"

    def __init__(self, profile: str = "generic", seed: int = 0):
        if profile not in _PROFILES:
            raise ValueError(f"unknown profile {profile!r}; pick one of {sorted(_PROFILES)}")
        caps, domain = _PROFILES[profile]
        super().__init__(caps, domain, seed)
        self.profile = profile

    def clone(self):
        child = SimBackend(self.profile, seed=self._child_seed())
        child.trace_enabled = self.trace_enabled
        return child
