"""Batch orbit engine shared by single-orbit queries, classification and rendering.

All points of a batch advance in lock-step through elementwise numpy
operations, so the trajectory of a point never depends on which other
points share its batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .kernel import evaluate_batch, evaluate_point
from .sphere import INF, chordal_array

# termination codes
RUNNING, HIT, OVERFLOW, CONVERGED, CYCLE = -1, 1, 2, 3, 4
BUDGET = 0

CONV_TOL = 1e-13
CONV_STEPS = 5
MAX_CYCLE = 16


class Stepper:
    """One application of a map (or of its base map n times, for iterates)."""

    def __init__(self, fmap):
        self.fmap = fmap
        if fmap.iterate_of is not None:
            self.base, self.times = fmap.iterate_of[0], fmap.iterate_of[1]
        else:
            self.base, self.times = fmap, 1
        self.inf_singular = self.base.infinity_singular
        self.at_inf = None
        if not self.inf_singular:
            val, status = evaluate_point(self.base, INF)
            # image of infinity: (value, lands at infinity?)
            self.at_inf = (val, status != "finite")

    def _base_step(self, z, zi):
        """Returns new (z, zi), a 'dead' mask and the kind of death.

        kind 1: current point singular (hit, nothing appended);
        kind 2: lands on infinity in B(f) (appended, hit);
        kind 3: overflow with infinity in B(f) (appended).
        """
        n = z.size
        out = np.zeros(n, dtype=complex)
        oi = np.zeros(n, dtype=bool)
        kind = np.zeros(n, dtype=np.int8)
        hit_pt = np.zeros(n, dtype=complex)
        fin = ~zi
        if fin.any():
            v, st = evaluate_batch(self.base, z[fin])
            o = np.where(st == ex.FINITE, v, 0)
            to_inf = (st == ex.POLE) | (st == ex.OVERFLOW)
            k = np.zeros(v.size, dtype=np.int8)
            if self.inf_singular:
                k = np.where(st == ex.POLE, 2, k)
                k = np.where(st == ex.OVERFLOW, 3, k)
            sing = st == ex.SINGULAR
            k = np.where(sing, 1, k)
            if sing.any():
                _, where = self.base.singularity_rule.nearest(z[fin])
                hp = np.zeros(v.size, dtype=complex)
                hp[sing] = where[sing]
                hit_pt[fin] = hp
            out[fin] = o
            oi[fin] = to_inf
            kind[fin] = k
        if zi.any():
            if self.inf_singular:
                kind[zi] = 1
            else:
                val, lands_inf = self.at_inf
                out[zi] = 0 if lands_inf else val
                oi[zi] = lands_inf
        return out, oi, kind, hit_pt

    def step(self, z, zi):
        """Returns (z', zi', kind, hit point, hit-at-infinity flag)."""
        if self.times == 1:
            out, oi, kind, hp = self._base_step(z, zi)
            return out, oi, kind, hp, kind == 2
        cur, ci = z.copy(), zi.copy()
        kind = np.zeros(z.size, dtype=np.int8)
        hp = np.zeros(z.size, dtype=complex)
        alive = np.ones(z.size, dtype=bool)
        for stage in range(self.times):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            o, oi, k, h = self._base_step(cur[idx], ci[idx])
            cur[idx], ci[idx] = o, oi
            dead = k != 0
            if not dead.any():
                continue
            di, kd, hd = idx[dead], k[dead], h[dead]
            if stage == self.times - 1:
                kind[di] = kd
                # singular at an intermediate value: the iterate is undefined at z itself
                hp[di] = np.where(kd == 1, hd if stage == 0 else z[di], 0)
            else:
                kind[di] = np.where(kd == 3, 3, 1)
                hp[di] = np.where(kd == 1, hd, z[di]) if stage == 0 else z[di]
            alive[di] = False
        return cur, ci, kind, hp, kind == 2


@dataclass
class Snapshot:
    """State of a batch at a checkpoint: right-aligned tails and bookkeeping."""

    step: int
    z: np.ndarray  # (P, W) complex tails, last column = last iterate
    zi: np.ndarray  # (P, W) at-infinity flags
    sym: np.ndarray  # (P, W) cover symbols (-1 outside, -2 padding)
    valid: np.ndarray  # (P, W)
    length: np.ndarray  # iterates recorded so far (incl. start)
    term: np.ndarray
    distinct: np.ndarray  # distinct cover symbols seen since the start


@dataclass
class BatchState:
    z: np.ndarray
    zi: np.ndarray
    length: np.ndarray
    term: np.ndarray
    hit_pt: np.ndarray
    hit_inf: np.ndarray
    first_in: np.ndarray
    seen: np.ndarray
    ring_z: np.ndarray
    ring_i: np.ndarray
    ring_s: np.ndarray
    calm: np.ndarray


class BatchOrbit:
    """Lock-step iteration of many starting points with a tail ring buffer.

    ``cover`` is any object with ``symbols(z, zi) -> int array`` and a
    ``targets`` sequence; ``ring`` is the number of trailing iterates kept.
    With ``record`` the full orbits are kept as well (small batches only).
    """

    def __init__(self, fmap, z0, zi0=None, cover=None, ring=400, record=False):
        self.fmap = fmap
        self.stepper = Stepper(fmap)
        self.cover = cover
        z0 = np.asarray(z0, dtype=complex).ravel()
        zi0 = np.zeros(z0.size, dtype=bool) if zi0 is None else np.asarray(zi0, dtype=bool).ravel()
        n = z0.size
        self.n = n
        self.ring = ring = max(ring, 2 * MAX_CYCLE)  # cycle detection looks back MAX_CYCLE
        self.steps = 0  # number of map applications performed so far
        k = len(cover.targets) if cover is not None else 0
        self.s = BatchState(
            z=np.where(zi0, 0, z0), zi=zi0.copy(),
            length=np.ones(n, dtype=np.int64),
            term=np.full(n, RUNNING, dtype=np.int8),
            hit_pt=np.zeros(n, dtype=complex), hit_inf=np.zeros(n, dtype=bool),
            first_in=np.full(n, -1, dtype=np.int64),
            seen=np.zeros((n, max(k, 1)), dtype=bool),
            ring_z=np.zeros((n, ring), dtype=complex), ring_i=np.zeros((n, ring), dtype=bool),
            ring_s=np.full((n, ring), -2, dtype=np.int16),
            calm=np.zeros(n, dtype=np.int16),
        )
        self.record = record
        self.rec_z = [self.s.z.copy()] if record else None
        self.rec_i = [self.s.zi.copy()] if record else None
        self.rec_s = None
        sym = self._symbols(self.s.z, self.s.zi)
        if record:
            self.rec_s = [sym.copy()]
        self._store(np.arange(n), self.s.z, self.s.zi, sym, 0)

    def _symbols(self, z, zi):
        if self.cover is None:
            return np.full(z.size, -1, dtype=np.int16)
        return self.cover.symbols(z, zi).astype(np.int16)

    def _store(self, idx, z, zi, sym, pos):
        s = self.s
        col = pos % self.ring
        s.ring_z[idx, col] = z
        s.ring_i[idx, col] = zi
        s.ring_s[idx, col] = sym
        inside = sym >= 0
        newly = inside & (s.first_in[idx] < 0)
        s.first_in[idx[newly]] = pos
        if inside.any():
            s.seen[idx[inside], sym[inside]] = True

    @property
    def active(self):
        return self.s.term == RUNNING

    def freeze(self, mask):
        """Stop iterating the selected points (their state is kept)."""
        s = self.s
        sel = mask & (s.term == RUNNING)
        s.term[sel] = BUDGET

    def run(self, total_steps):
        """Advance running points until ``total_steps`` map applications."""
        s = self.s
        st = self.stepper
        while self.steps < total_steps:
            idx = np.flatnonzero(s.term == RUNNING)
            if idx.size == 0:
                self.steps = total_steps
                break
            z, zi = s.z[idx], s.zi[idx]
            nz, ni, kind, hp, hinf = st.step(z, zi)
            self.steps += 1
            pos = self.steps
            # current point singular: no new iterate
            dead1 = kind == 1
            if dead1.any():
                d = idx[dead1]
                s.term[d] = HIT
                s.hit_pt[d] = hp[dead1]
                s.hit_inf[d] = zi[dead1]
            app = ~dead1
            a = idx[app]
            nz_a, ni_a = np.where(ni[app], 0, nz[app]), ni[app]
            sym = self._symbols(nz_a, ni_a)
            if self.record:
                full_z = np.zeros(self.n, dtype=complex)
                full_i = np.zeros(self.n, dtype=bool)
                full_s = np.full(self.n, -2, dtype=np.int16)
                full_z[a], full_i[a], full_s[a] = nz_a, ni_a, sym
                self.rec_z.append(full_z)
                self.rec_i.append(full_i)
                self.rec_s.append(full_s)
            self._store(a, nz_a, ni_a, sym, pos)
            s.length[a] += 1
            # convergence detector on the chordal step
            d = chordal_array(z[app], zi[app], nz_a, ni_a)
            calm = np.where(d < CONV_TOL, s.calm[a] + 1, 0).astype(np.int16)
            s.calm[a] = calm
            s.z[a], s.zi[a] = nz_a, ni_a
            k_app = kind[app]
            hit2 = k_app == 2
            if hit2.any():
                s.term[a[hit2]] = HIT
                s.hit_inf[a[hit2]] = True
            ovf = k_app == 3
            if ovf.any():
                s.term[a[ovf]] = OVERFLOW
            conv = (calm >= CONV_STEPS) & (k_app == 0)
            if conv.any():
                s.term[a[conv]] = CONVERGED
            if pos % MAX_CYCLE == 0:
                self._detect_cycles()

    def _detect_cycles(self):
        """Exact repetition of an earlier iterate with period 2..MAX_CYCLE."""
        s = self.s
        idx = np.flatnonzero((s.term == RUNNING) & (s.length > 2 * MAX_CYCLE))
        if idx.size == 0:
            return
        last = (s.length[idx] - 1) % self.ring
        zl = s.ring_z[idx, last]
        il = s.ring_i[idx, last]
        found = np.zeros(idx.size, dtype=bool)
        for p in range(2, MAX_CYCLE + 1):
            col = (s.length[idx] - 1 - p) % self.ring
            same = (s.ring_z[idx, col] == zl) & (s.ring_i[idx, col] == il)
            found |= same
        if found.any():
            s.term[idx[found]] = CYCLE

    def finish(self):
        s = self.s
        s.term[s.term == RUNNING] = BUDGET

    def snapshot(self, width=None, idx=None) -> Snapshot:
        """Right-aligned tails (last ``width`` iterates) for the points ``idx``."""
        s = self.s
        idx = np.arange(self.n) if idx is None else np.asarray(idx)
        w = self.ring if width is None else min(width, self.ring)
        length = s.length[idx]
        cols = np.arange(w)
        absolute = length[:, None] - w + cols[None, :]
        valid = absolute >= 0
        ring_col = np.where(valid, absolute, 0) % self.ring
        rows = idx[:, None]
        z = np.where(valid, s.ring_z[rows, ring_col], 0)
        zi = np.where(valid, s.ring_i[rows, ring_col], False)
        sym = np.where(valid, s.ring_s[rows, ring_col], -2)
        distinct = s.seen[idx].sum(axis=1)
        return Snapshot(self.steps, z, zi, sym, valid, length, s.term[idx].copy(), distinct)

    # full-orbit access (record=True)
    def orbit(self, i):
        n = int(self.s.length[i])
        zs = [INF if self.rec_i[k][i] else complex(self.rec_z[k][i]) for k in range(n)]
        return zs

    def orbit_symbols(self, i):
        n = int(self.s.length[i])
        return [int(self.rec_s[k][i]) for k in range(n)]


# tail analysis ---------------------------------------------------------------
MAX_CLUSTERS = 8


@dataclass
class Clusters:
    center: np.ndarray  # (P, K) complex
    center_inf: np.ndarray  # (P, K) bool
    radius: np.ndarray  # (P, K)
    hits: np.ndarray  # (P, K) int, 0 marks an unused slot
    count: np.ndarray  # (P,) clusters in use (MAX_CLUSTERS + 1 when the cap was exceeded)


def cluster_tails(z, zi, valid, rho, max_clusters=MAX_CLUSTERS) -> Clusters:
    """Greedy chordal clustering of every row of a tail matrix.

    Points are visited in time order; each joins the first existing cluster
    whose centre is within ``rho`` or opens a new one.  Overlapping clusters
    (centre distance at most the sum of radii) are merged afterwards, so the
    reported balls are pairwise disjoint.
    """
    P, W = z.shape
    K = max_clusters
    cz = np.zeros((P, K), dtype=complex)
    ci = np.zeros((P, K), dtype=bool)
    rad = np.zeros((P, K))
    hits = np.zeros((P, K), dtype=np.int64)
    count = np.zeros(P, dtype=np.int64)
    over = np.zeros(P, dtype=bool)
    rows = np.arange(P)
    slot = np.arange(K)[None, :]
    for c in range(W):
        v = valid[:, c]
        if not v.any():
            continue
        pz, pi = z[:, c], zi[:, c]
        d = chordal_array(cz, ci, pz[:, None], pi[:, None])
        d = np.where(slot < count[:, None], d, np.inf)
        near = d <= rho
        has = near.any(axis=1)
        first = np.argmax(near, axis=1)
        join = v & has
        r, k = rows[join], first[join]
        hits[r, k] += 1
        rad[r, k] = np.maximum(rad[r, k], d[r, k])
        new = v & ~has & (count < K)
        r = rows[new]
        k = count[new]
        cz[r, k], ci[r, k], hits[r, k], rad[r, k] = pz[new], pi[new], 1, 0.0
        count[new] += 1
        over |= v & ~has & (count >= K)
    for _ in range(K):
        used = hits > 0
        dd = chordal_array(cz[:, :, None], ci[:, :, None], cz[:, None, :], ci[:, None, :])
        ov = (dd <= rad[:, :, None] + rad[:, None, :]) & used[:, :, None] & used[:, None, :]
        ov &= np.triu(np.ones((K, K), dtype=bool), 1)[None]
        flat = ov.reshape(P, K * K)
        anyov = flat.any(axis=1)
        if not anyov.any():
            break
        pick = np.argmax(flat, axis=1)
        r = rows[anyov]
        i, j = pick[anyov] // K, pick[anyov] % K
        rad[r, i] = np.maximum(rad[r, i], dd[r, i, j] + rad[r, j])
        hits[r, i] += hits[r, j]
        hits[r, j] = 0
        rad[r, j] = 0.0
    n_used = (hits > 0).sum(axis=1)
    return Clusters(cz, ci, rad, hits, np.where(over, K + 1, n_used))


def symbol_period(sym, valid, max_period=MAX_CYCLE):
    """Smallest p <= max_period with sym[c] == sym[c - p] across each valid row.

    Rows need at least 2p valid entries to qualify; 0 means no period found.
    """
    P, W = sym.shape
    nvalid = valid.sum(axis=1)
    period = np.zeros(P, dtype=np.int64)
    for p in range(1, max_period + 1):
        if p >= W:
            break
        both = valid[:, p:] & valid[:, :-p]
        same = (sym[:, p:] == sym[:, :-p]) | ~both
        ok = same.all(axis=1) & (nvalid >= 2 * p) & (period == 0)
        period[ok] = p
    return period
