"""Finite-volume bijection: balanced word to rooted quadrangulation with an FK edge set.

The quadrangulation Q has one edge per time t = 0..2n-1, namely
lambda(t) = (primal vertex, dual vertex) after step t, and one face per
matched pair.  Half-edge 2t runs primal to dual along edge t, 2t+1 back.
All loop and component statistics here are computed from the graph alone
and serve as the oracle for the word-level formulas in :mod:`loops`.
"""

from __future__ import annotations

import itertools
import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .matching import compute_matches
from .word import Word


class NotBalanced(ValueError):
    """The word does not reduce to the empty word."""


class _DSU:
    def __init__(self, n: int):
        self.p = list(range(n))

    def find(self, x: int) -> int:
        p = self.p
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int) -> None:
        a, b = self.find(a), self.find(b)
        if a != b:
            self.p[max(a, b)] = min(a, b)


@dataclass
class PlanarMapRecord:
    """Decorated quadrangulation built from a balanced word.

    Times are relative: step t = 1..2n is the t-th symbol.  Quad q stores
    burger time ``qj[q]``, order time ``qi[q]``, ``kind`` (0 = h, 1 = c)
    and ``flexible``.  ``sides[q]`` lists the four Q-edges in boundary
    order starting from a primal corner and ``corners[q]`` the matching
    vertices (primal ids even positions, dual ids odd positions).
    """

    word: Word
    primal_parent: np.ndarray
    dual_parent: np.ndarray
    lam: np.ndarray
    qj: np.ndarray
    qi: np.ndarray
    kind: np.ndarray
    flexible: np.ndarray
    sides: np.ndarray
    corners: np.ndarray
    s_primal: np.ndarray
    face_next: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.qj)

    @property
    def n_primal(self) -> int:
        return len(self.primal_parent)

    @property
    def n_dual(self) -> int:
        return len(self.dual_parent)

    def alpha(self, h):
        return h ^ 1

    def sigma(self) -> np.ndarray:
        """Rotation around vertices, sigma = face successor after alpha."""
        return self.face_next[np.arange(4 * self.n) ^ 1]

    def pairing(self, flip: int | None = None) -> np.ndarray:
        """Loop pairing inside each quad as pairs of side positions.

        Row q is (a, b): the triangles are positions {a, a+1} and {b, b+1}
        mod 4.  Passing ``flip`` toggles the flexible flag of that quad.
        """
        flex = self.flexible.copy()
        if flip is not None:
            flex[flip] = not flex[flip]
        # the pairing {j-1, j} sits at positions (0,1) for h quads, (3,0) for c quads
        lam_pair = np.where(self.kind == 0, 0, 3)
        first = np.where(flex, (lam_pair + 3) % 4, lam_pair)
        return np.stack([first, (first + 2) % 4], axis=1)

    def diagonal_is_primal(self) -> np.ndarray:
        """Whether the S/S* diagonal of each quad is primal (i.e. lies in S)."""
        return self.s_primal

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "word": self.word.labels(),
            "primal_vertices": [int(x) for x in self.primal_parent],
            "dual_vertices": [int(x) for x in self.dual_parent],
            "lambda": self.lam.tolist(),
            "half_edges": {"alpha": (np.arange(4 * self.n) ^ 1).tolist(),
                           "sigma": self.sigma().tolist(),
                           "face": self.face_next.tolist()},
            "quads": [{"j": int(j), "i": int(i), "kind": "hc"[k], "flexible": bool(f),
                       "sides": s.tolist(), "s_primal": bool(sp)}
                      for j, i, k, f, s, sp in zip(self.qj, self.qi, self.kind, self.flexible,
                                                   self.sides, self.s_primal)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def build_map(w: Word) -> PlanarMapRecord:
    """Run the tree walk of the resolved word and assemble the quadrangulation."""
    mt = compute_matches(w)
    sym = w.symbols
    m = len(w)
    if m % 2 or (m and (mt.rel < 0).any()):
        raise NotBalanced("word does not reduce to the empty word")
    n = m // 2
    pp, dp = [-1], [-1]
    cur_p, cur_d = 0, 0
    lam = np.zeros((m + 1, 2), dtype=np.int64)
    ykind = np.empty(m, dtype=np.int64)
    for k in range(m):
        s = sym[k]
        if s <= 1:
            kd = s
        else:
            kd = sym[mt.rel[k]]
        ykind[k] = kd
        if s <= 1:
            if kd == 0:
                pp.append(cur_p)
                cur_p = len(pp) - 1
            else:
                dp.append(cur_d)
                cur_d = len(dp) - 1
        elif kd == 0:
            cur_p = pp[cur_p]
        else:
            cur_d = dp[cur_d]
        lam[k + 1] = (cur_p, cur_d)
    qj, qi, kind, flex = [], [], [], []
    for k in range(m):
        if sym[k] >= 2:
            qj.append(int(mt.rel[k]) + 1)
            qi.append(k + 1)
            kind.append(int(ykind[k]))
            flex.append(sym[k] == 4)
    qj, qi = np.array(qj, dtype=np.int64), np.array(qi, dtype=np.int64)
    kind, flex = np.array(kind, dtype=np.int64), np.array(flex, dtype=bool)
    sides = np.zeros((n, 4), dtype=np.int64)
    corners = np.zeros((n, 4), dtype=np.int64)
    face_next = np.zeros(4 * n, dtype=np.int64)
    for q in range(n):
        j, i = qj[q], qi[q]
        if kind[q] == 0:
            s = [j - 1, j, i - 1, i]
            c = [lam[j - 1, 0], lam[j - 1, 1], lam[j, 0], lam[i, 1]]
        else:
            s = [j - 1, i, i - 1, j]
            c = [lam[j - 1, 0], lam[j - 1, 1], lam[i, 0], lam[j, 1]]
        s = [t % m for t in s]
        sides[q], corners[q] = s, c
        hs = [2 * s[k] + (k % 2) for k in range(4)]
        for k in range(4):
            face_next[hs[k]] = hs[(k + 1) % 4]
    s_primal = (kind == 0) ^ flex
    return PlanarMapRecord(w, np.array(pp), np.array(dp), lam, qj, qi, kind, flex,
                           sides, corners, s_primal, face_next)


def _cycles(perm: np.ndarray) -> int:
    seen = np.zeros(perm.size, dtype=bool)
    c = 0
    for h in range(perm.size):
        if not seen[h]:
            c += 1
            while not seen[h]:
                seen[h] = True
                h = perm[h]
    return c


def euler_check(m: PlanarMapRecord) -> dict:
    """Vertex count from the rotation system versus the tree vertex count."""
    if m.n == 0:
        return {"V": 2, "E": 0, "F": 0, "chi": 2, "ok": True}
    fn = m.face_next
    is_perm = np.array_equal(np.sort(fn), np.arange(fn.size))
    V = _cycles(m.sigma())
    E, F = 2 * m.n, m.n
    face_sizes_ok = all(
        fn[fn[fn[fn[h]]]] == h and len({h, fn[h], fn[fn[h]], fn[fn[fn[h]]]}) == 4
        for h in range(fn.size))
    ok = is_perm and face_sizes_ok and V == m.n_primal + m.n_dual and V - E + F == 2
    return {"V": V, "E": E, "F": F, "chi": V - E + F, "ok": bool(ok)}


# ---------------------------------------------------------------- clusters and loops

def _diagonal(m: PlanarMapRecord, q: int) -> tuple:
    """Endpoints of the S or S* diagonal of quad q, tagged by type."""
    a = int(m.pairing()[q][0])
    # the triangles' corners are a+1 and a+3; the diagonal joins a and a+2
    c = m.corners[q]
    return ("p" if a % 2 == 0 else "d", int(c[a]), int(c[(a + 2) % 4]))


def clusters(m: PlanarMapRecord) -> tuple:
    """Cluster labels of S (on primal vertices) and S* (on dual vertices).

    Returns (primal_label, dual_label, quad_cluster) where quad_cluster[q]
    is ('p' or 'd', label) for the cluster containing the diagonal of q.
    """
    dp, dd = _DSU(m.n_primal), _DSU(m.n_dual)
    diags = [_diagonal(m, q) for q in range(m.n)]
    for t, a, b in diags:
        (dp if t == "p" else dd).union(a, b)
    pl = [dp.find(x) for x in range(m.n_primal)]
    dl = [dd.find(x) for x in range(m.n_dual)]
    qc = [(t, pl[a] if t == "p" else dl[a]) for t, a, _ in diags]
    return pl, dl, qc


def k_of_s(m: PlanarMapRecord) -> dict:
    """Cluster count, face count of S and the loop count; K = c(S) + f(S) - 1."""
    pl, dl, _ = clusters(m)
    c = len(set(pl))
    c_star = len(set(dl))
    e = int(m.s_primal.sum())
    f = e - m.n_primal + c + 1
    return {"c": c, "f": f, "c_star": c_star, "K": c + f - 1, "loops": len(loops(m))}


def loops(m: PlanarMapRecord, flip: int | None = None) -> list:
    """Interface loops as sorted lists of Q-edges, ordered by smallest edge."""
    E = 2 * m.n
    d = _DSU(E)
    for q, (a, b) in enumerate(m.pairing(flip)):
        s = m.sides[q]
        d.union(s[a], s[(a + 1) % 4])
        d.union(s[b], s[(b + 1) % 4])
    groups = defaultdict(list)
    for t in range(E):
        groups[d.find(t)].append(t)
    return sorted(groups.values(), key=lambda g: g[0])


def _half(t: int, corner_pos: int) -> int:
    # half of edge t ending at a primal (even position) or dual (odd) corner
    return 2 * t + (corner_pos % 2)


def regions(m: PlanarMapRecord, cut=None, loop_edges=None) -> _DSU:
    """Union-find on edge halves for the sphere cut along diagonals and one loop.

    ``cut`` marks quads whose S/S* diagonal is a barrier; ``loop_edges``
    the Q-edges of a loop whose strands are barriers.  Half 2t is the
    primal end of edge t and 2t+1 the dual end.
    """
    E = 2 * m.n
    cut = np.zeros(m.n, dtype=bool) if cut is None else cut
    on = np.zeros(E, dtype=bool)
    if loop_edges is not None:
        on[list(loop_edges)] = True
    d = _DSU(2 * E)
    for t in range(E):
        if not on[t]:
            d.union(2 * t, 2 * t + 1)
    pair = m.pairing()
    for q in range(m.n):
        s = m.sides[q]
        mids = []
        for a in pair[q]:
            b = (a + 1) % 4
            corner = b
            far_a, far_b = a, (b + 1) % 4
            ha_c, hb_c = _half(s[a], corner), _half(s[b], corner)
            ha_f, hb_f = _half(s[a], far_a), _half(s[b], far_b)
            if on[s[a]]:
                d.union(ha_c, hb_c)
                d.union(ha_f, hb_f)
            else:
                for h in (hb_c, ha_f, hb_f):
                    d.union(ha_c, h)
            mids.append(ha_f)
        if not cut[q]:
            d.union(mids[0], mids[1])
    return d


@dataclass(frozen=True)
class Component:
    area: int
    boundary_len: int
    primal: bool
    edges: tuple


@dataclass
class MapLoop:
    edges: list
    surrounds_primal: bool
    full_area: int
    interior_area: int
    outer_boundary_len: int
    components: list
    enclosed_by_curve: int = 0


def _cluster_holes(m, cluster_quads, loop_half, inf_edge):
    """Maximal complementary components of a cluster, away from the loop's face.

    Returns a list of (area, boundary_len, edges, contains_inf).
    """
    cut = np.zeros(m.n, dtype=bool)
    cut[list(cluster_quads)] = True
    d = regions(m, cut=cut)
    E = 2 * m.n
    face_of = [d.find(2 * t) for t in range(E)]
    f0 = d.find(loop_half)
    pair = m.pairing()
    # each cluster edge separates the faces of its two triangles
    adj = []
    for q in cluster_quads:
        s = m.sides[q]
        a, b = pair[q]
        adj.append((d.find(2 * s[a]), d.find(2 * s[b])))
    holes = {f for f in face_of if f != f0}
    grp = _DSU(2 * E)
    for x, y in adj:
        if x in holes and y in holes:
            grp.union(x, y)
    comps = defaultdict(list)
    for t in range(E):
        if face_of[t] != f0:
            comps[grp.find(face_of[t])].append(t)
    out = []
    for root, edges in comps.items():
        blen = sum(1 for x, y in adj
                   if (x == f0 and y in holes and grp.find(y) == root)
                   or (y == f0 and x in holes and grp.find(x) == root))
        out.append((len(edges), blen, tuple(edges), inf_edge in edges))
    return out


def map_loop_oracle(m: PlanarMapRecord, loop_edges, inf_edge: int = 0) -> MapLoop:
    """Area, interior area, outer boundary and bounded components of one loop.

    ``inf_edge`` is the Q-edge playing the role of infinity; it must not lie
    on the loop.
    """
    ledges = sorted(loop_edges)
    lset = set(ledges)
    if inf_edge in lset:
        raise ValueError("the reference edge lies on the loop")
    d = regions(m, loop_edges=lset)
    inf = d.find(2 * inf_edge)
    E = 2 * m.n
    inside = [t for t in range(E) if t not in lset and d.find(2 * t) != inf]
    strict = len(ledges) + len(inside)
    # clusters touched by the loop: diagonals of the quads its strands pass
    pl, dl, qc = clusters(m)
    pair = m.pairing()
    prim_c, dual_c = set(), set()
    loop_half_p = loop_half_d = None
    for q in range(m.n):
        s = m.sides[q]
        for a in pair[q]:
            if s[a] in lset:
                b = (a + 1) % 4
                cv = int(m.corners[q][b])
                if b % 2 == 0:
                    prim_c.add(pl[cv])
                else:
                    dual_c.add(dl[cv])
                t, lab = qc[q]
                (prim_c if t == "p" else dual_c).add(lab)
                if loop_half_p is None:
                    loop_half_p = loop_half_d = 2 * s[a]
    if len(prim_c) != 1 or len(dual_c) != 1:
        raise AssertionError("loop does not separate exactly one primal and one dual cluster")
    A, Astar = prim_c.pop(), dual_c.pop()
    qa = [q for q in range(m.n) if qc[q] == ("p", A)]
    qs = [q for q in range(m.n) if qc[q] == ("d", Astar)]
    # a primal vertex of A decides which side of the loop the cluster is on
    pv = next(x for x in range(m.n_primal) if pl[x] == A)
    half = next(2 * t for t in range(E) if m.lam[t, 0] == pv)
    surrounds_primal = d.find(half) != inf
    # the loop's own face in each cluster: any strand half adjacent to the cluster
    comps = []
    outer = None
    for primal, cq in ((True, qa), (False, qs)):
        ref = 2 * ledges[0]
        for area, blen, edges, has_inf in _cluster_holes(m, cq, ref, inf_edge):
            if has_inf:
                outer, outer_area = blen, area
            else:
                comps.append(Component(area, blen, primal, edges))
    if outer is None:
        raise AssertionError("no unbounded complementary component found")
    comps.sort(key=lambda c: (-c.area, c.edges[0]))
    # everything but the unbounded component; bounded pockets on the far side count
    full = E - outer_area
    removed = sum(c.area for c in comps if c.primal != surrounds_primal)
    return MapLoop(ledges, surrounds_primal, full, full - removed, outer, comps, strict)


def cut_cycle(m: PlanarMapRecord, region_edges) -> dict:
    """Diagonals separating a set of Q-edges from the rest, with cycle checks.

    Returns the diagonal quads, whether they form one simple cycle in S or
    in S*, its length, and whether cutting along it isolates exactly the set.
    """
    R = set(region_edges)
    pair = m.pairing()
    diag = []
    for q in range(m.n):
        s = m.sides[q]
        inn = [s[k] in R for k in range(4)]
        if all(inn) or not any(inn):
            continue
        a, b = pair[q]
        t1 = inn[a], inn[(a + 1) % 4]
        t2 = inn[b], inn[(b + 1) % 4]
        if t1[0] != t1[1] or t2[0] != t2[1] or t1[0] == t2[0]:
            return {"quads": [], "simple": False, "length": 0, "isolates": False}
        diag.append(q)
    ends = [_diagonal(m, q) for q in diag]
    types = {t for t, _, _ in ends}
    simple = len(types) == 1 and len(diag) > 0
    if simple:
        deg = defaultdict(int)
        dsu = {}
        for _, a, b in ends:
            deg[a] += 1
            deg[b] += 1
        simple = all(v == 2 for v in deg.values())
        if simple:
            verts = list(deg)
            idx = {v: k for k, v in enumerate(verts)}
            u = _DSU(len(verts))
            for _, a, b in ends:
                u.union(idx[a], idx[b])
            simple = len({u.find(k) for k in range(len(verts))}) == 1
    cut = np.zeros(m.n, dtype=bool)
    cut[diag] = True
    d = regions(m, cut=cut)
    groups = defaultdict(set)
    for t in range(2 * m.n):
        groups[d.find(2 * t)].add(t)
    side = next((g for g in groups.values() if 0 not in g), set())
    return {"quads": diag, "simple": bool(simple), "length": len(diag),
            "isolates": len(groups) == 2 and side == R,
            "primal": bool(simple and types == {"p"}),
            "vertices": sorted({v for _, a, b in ends for v in (a, b)})}


def bubble_check(m: PlanarMapRecord, phi_t: int, i_t: int) -> dict:
    """Graph data for the bubble lambda([phi, i-1]) of a flexible order (relative times)."""
    R = list(range(phi_t, i_t))
    res = cut_cycle(m, R)
    res["area"] = len(R)
    return res


def loop_of_edge(m: PlanarMapRecord, t: int) -> list:
    for g in loops(m):
        if t in g:
            return g
    raise ValueError(f"edge {t} is on no loop")


# ---------------------------------------------------------------- canonical codes and weights

def canonical_code(m: PlanarMapRecord) -> tuple:
    """Rooted-map code from a BFS over half-edges starting at the root half-edge 0."""
    if m.n == 0:
        return ()
    sig = m.sigma()
    face_of = np.empty(4 * m.n, dtype=np.int64)
    for q in range(m.n):
        for k in range(4):
            face_of[2 * m.sides[q][k] + (k % 2)] = q
    label = {0: 0}
    order = [0]
    dq = deque([0])
    while dq:
        h = dq.popleft()
        for g in (h ^ 1, int(sig[h])):
            if g not in label:
                label[g] = len(order)
                order.append(g)
                dq.append(g)
    return tuple((label[h ^ 1], label[int(sig[h])], bool(m.s_primal[face_of[h]])) for h in order)


def balanced_words(n: int):
    """All balanced words of length 2n as symbol tuples."""
    from .word import reduce
    for w in itertools.product(range(5), repeat=2 * n):
        if reduce(Word.of(w)).is_empty():
            yield w


def weight_check(n: int, p: Fraction) -> dict:
    """Exact check that word probabilities are proportional to sqrt(q)^K(S)."""
    if n > 4:
        raise MemoryError("weight_check enumerates 5^(2n) words; n must be at most 4")
    p = Fraction(p)
    probs = (Fraction(1, 4), Fraction(1, 4), (1 - p) / 4, (1 - p) / 4, p / 2)
    sq = 2 * p / (1 - p)
    classes = {}
    loops_match = True
    for w in balanced_words(n):
        m = build_map(Word.of(w))
        code = canonical_code(m)
        pr = Fraction(1)
        for s in w:
            pr *= probs[s]
        ks = k_of_s(m)
        loops_match &= ks["K"] == ks["loops"]
        if code in classes:
            raise AssertionError("two words map to the same rooted decorated map")
        classes[code] = (pr, ks["K"])
    ratios = [pr / sq ** k for pr, k in classes.values()]
    r0 = ratios[0] if ratios else Fraction(1)
    dev = max((abs(r / r0 - 1) for r in ratios), default=Fraction(0))
    return {"n": n, "p": str(p), "classes": len(classes), "max_rel_deviation": dev,
            "convention": "K(S) = c(S) + f(S) - 1 = number of loops",
            "K_equals_loops": bool(loops_match)}


def cycles_share_edge(m: PlanarMapRecord, bubble_a: tuple, bubble_b: tuple) -> bool:
    """Whether the boundary cycles of two bubbles (phi, i) share an S or S* edge."""
    qa = set(bubble_check(m, *bubble_a)["quads"])
    qb = set(bubble_check(m, *bubble_b)["quads"])
    return bool(qa & qb)


def sample_balanced(params, n_max: int, seed: int, count: int, n_min: int = 1) -> list:
    """Balanced words by rejection; each half-length is drawn uniformly in [n_min, n_max].

    Word number w draws its half-length from a dedicated stream and then
    tries replicas w * 2^20 + a, a = 0, 1, ... until the word is balanced,
    so the output depends on (seed, count) only.
    """
    from . import rng
    from .word import match_kernel
    c = rng.thresholds(params.p)
    lens_key = np.uint64(rng.replica_seed(seed, -1))
    out = []
    for wi in range(count):
        n = n_min + int(rng.uniform_at(lens_key, wi) * (n_max - n_min + 1))
        for a in range(1 << 20):
            key = np.uint64(rng.replica_seed(seed, (wi << 20) + a))
            sym = rng.fill_symbols(key, 1, 2 * n, *c)
            if (match_kernel(sym) >= 0).all():
                out.append(Word(1, sym))
                break
        else:
            raise RuntimeError("rejection sampler exhausted")
    return out
