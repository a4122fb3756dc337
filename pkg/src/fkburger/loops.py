"""FK loops around the origin read off the word: loop times, components and statistics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matching import (OUTSIDE, Direction, FlexRecord, MatchTable, flex_interval_length,
                       flex_record, phi_star_array)
from .walk import maximal_f_times
from .word import Word, reduced_length


class CensoredPhiStar(RuntimeError):
    """A needed phi* value lies outside the window."""


@dataclass(frozen=True)
class LoopEntry:
    """Word times of the loop numbered ``j`` around the origin.

    ``theta`` and ``theta_tilde`` are None when ``truncated``.
    """

    j: int
    dir: Direction
    iota: int
    theta_tilde: int | None
    theta: int | None
    truncated: bool


@dataclass(frozen=True)
class LoopComponents:
    I: list
    Theta: list
    U_count: int


@dataclass(frozen=True)
class LoopStats:
    component_areas: list
    component_boundary_lens: list
    component_dirs: list
    component_index: list
    full_area: int
    interior_area: int
    outer_boundary_len: int


def origin_chain(w: Word, mt: MatchTable, origin: int) -> list:
    """Matched o_f intervals containing ``origin``, innermost first."""
    if origin not in w:
        raise ValueError("origin must lie in the window")
    out = []
    for k in range(origin - w.start, len(w)):
        j = mt.rel[k]
        if w.symbols[k] == 4 and 0 <= j <= origin - w.start:
            out.append(flex_record(w, mt, k + w.start))
    return out


def nested_f_intervals(w: Word, mt: MatchTable, origin: int = 0) -> list:
    """Loop times around ``origin`` from runs of equal direction in the nested chain.

    iota is the outermost interval of a run, theta the innermost interval of
    the next run.  The first run is numbered 1 if it is Left and 2 otherwise,
    so odd numbers are Left.  The last run is truncated.
    """
    chain = origin_chain(w, mt, origin)
    runs = []
    for rec in chain:
        if runs and runs[-1][-1].dir == rec.dir:
            runs[-1].append(rec)
        else:
            runs.append([rec])
    if not runs:
        return []
    j0 = 1 if runs[0][0].dir is Direction.LEFT else 2
    out = []
    for r, run in enumerate(runs):
        if r + 1 < len(runs):
            th = runs[r + 1][0]
            out.append(LoopEntry(j0 + r, run[0].dir, run[-1].i, th.phi, th.i, False))
        else:
            out.append(LoopEntry(j0 + r, run[0].dir, run[-1].i, None, None, True))
    return out


def classify_components(w: Word, mt: MatchTable, entry: LoopEntry) -> LoopComponents:
    """Split the maximal o_f times in (theta_tilde, theta) by phi* < theta_tilde."""
    if entry.truncated:
        raise ValueError("loop entry is truncated")
    tt, th = entry.theta_tilde, entry.theta
    I, Theta = [], []
    for rec in maximal_f_times(w, mt, tt + 1, th - 1):
        if rec.phi_star is OUTSIDE:
            raise CensoredPhiStar(f"phi* of {rec.i} lies outside the window")
        (I if rec.phi_star < tt else Theta).append(rec)
    cross = 3 if entry.dir is Direction.LEFT else 2
    covered = np.zeros(th - tt + 1, dtype=bool)
    for rec in I:
        covered[rec.phi - tt:rec.i - tt + 1] = True
    u = 0
    for i in range(tt, th + 1):
        k = i - w.start
        if w.symbols[k] == cross and mt.rel[k] < tt - w.start and not covered[i - tt]:
            u += 1
    return LoopComponents(I, Theta, u)


def loop_stats(w: Word, mt: MatchTable, entry: LoopEntry, comps: LoopComponents) -> LoopStats:
    tt, th = entry.theta_tilde, entry.theta
    theta_len = flex_interval_length(mt, th)
    order = sorted(comps.Theta, key=lambda r: (-r.area, r.i))
    areas = [r.area for r in order]
    lens = [r.boundary_len for r in order]
    full = th - tt - sum(r.area for r in comps.I)
    outside = sum(r.area for r in comps.Theta if r.dir is not entry.dir)
    outer = -theta_len + sum(r.boundary_len for r in comps.I) + 2 * comps.U_count + 1
    return LoopStats(areas, lens, [r.dir for r in order], [r.i for r in order],
                     full, full - outside, outer)


def nesting_touch(w: Word, mt: MatchTable, i: int, i_prime: int) -> bool:
    """Whether the boundaries of nested same-direction bubbles P(i) in P(i') meet."""
    a = flex_record(w, mt, i)
    b = flex_record(w, mt, i_prime)
    if a.dir is not b.dir or not (b.phi <= a.phi and a.i <= b.i) or i == i_prime:
        raise ValueError("need nested flexible orders of the same direction")
    if a.phi_star is OUTSIDE:
        raise CensoredPhiStar(f"phi* of {i} lies outside the window")
    return a.phi_star <= b.phi


@dataclass
class LoopRow:
    sample_id: int
    entry: LoopEntry
    stats: LoopStats


LOOP_CSV_HEADER = ["sample_id", "j", "dir", "iota", "theta_tilde", "theta",
                   "full_area", "interior_area", "outer_boundary_len"]


def loop_readout(w: Word, mt: MatchTable, origin: int = 0):
    """All complete loop entries around ``origin`` with statistics.

    Returns (rows, censored) where ``censored`` counts entries dropped
    because of truncation or an out-of-window phi*.
    """
    rows, censored = [], 0
    for e in nested_f_intervals(w, mt, origin):
        if e.truncated:
            censored += 1
            continue
        try:
            comps = classify_components(w, mt, e)
        except CensoredPhiStar:
            censored += 1
            continue
        rows.append((e, loop_stats(w, mt, e, comps)))
    return rows, censored


def csv_rows(sample_id: int, entry: LoopEntry, st: LoopStats) -> list:
    """Loop row followed by one row per component (area, boundary length)."""
    rows = [[sample_id, entry.j, entry.dir.value, entry.iota, entry.theta_tilde, entry.theta,
             st.full_area, st.interior_area, st.outer_boundary_len]]
    for a, b in zip(st.component_areas, st.component_boundary_lens):
        rows.append([sample_id, entry.j, "component", "", "", "", a, "", b])
    return rows
