"""Return-word codings and commuting recognizable towers.

A marker (a short left/right context, possibly a union of several
context pairs) picks out a syndetic set of positions in the generated
language.  Cutting at those positions recodes the system over its
return words, and the recoding comes with measured constants: the
syndeticity bound d, the separation rho, the marker properness, and a
recognizability radius r + d.  Stacking codings at successive
contraction cuts and aligning each against the next yields a tower of
morphisms nu_n, tau_n, phi_n satisfying exact composition identities.

Generator words are expanded as flat strings whenever every level-0
letter is a single character, so occurrence scanning runs at C speed;
the horizon above the last materialized one is scanned hierarchically
through chunk seams instead of being expanded.
"""

import json
import os
from bisect import bisect_right
from dataclasses import dataclass, field

from .errors import HypothesisError, InsufficientDepthError
from .language import (
    DirectiveSequence,
    LanguageTable,
    level_language,
    properize,
    rotate_to_proper,
)
from .morphism import (
    Morphism,
    as_word,
    classify,
    compose,
    format_morphism,
    metrics,
    properness,
)
from .recognize import find_constant, recognizability_check
from .words import least_period

_MIN_OCCURRENCES = 3


def _is_text(w):
    return isinstance(w, str)


def _side(w):
    """Normalize a marker side: strings stay flat, anything else is a word."""
    if _is_text(w):
        return w
    return as_word(w)


@dataclass(frozen=True)
class Marker:
    """Occurrence pattern u.v: position k matches when the text around k
    spells u immediately to the left and v immediately to the right, for
    at least one of the variant pairs."""

    left: object
    right: object
    variants: tuple = ()

    def __post_init__(self):
        left = _side(self.left)
        right = _side(self.right)
        if self.variants:
            pairs = tuple((_side(u), _side(v)) for u, v in self.variants)
        else:
            pairs = ((left, right),)
        pairs = tuple(sorted(set(pairs), key=lambda p: (len(p[0]) + len(p[1]), p)))
        for u, v in pairs:
            if len(u) == 0 and len(v) == 0:
                raise HypothesisError("marker variant with both sides empty")
        object.__setattr__(self, "left", pairs[0][0])
        object.__setattr__(self, "right", pairs[0][1])
        object.__setattr__(self, "variants", pairs)

    @classmethod
    def union(cls, pairs):
        pairs = tuple(pairs)
        if not pairs:
            raise HypothesisError("marker union needs at least one context pair")
        return cls(pairs[0][0], pairs[0][1], variants=pairs)

    @property
    def radius(self):
        return max(max(len(u), len(v)) for u, v in self.variants)

    @property
    def span(self):
        return max(len(u) + len(v) for u, v in self.variants)

    @property
    def properness(self):
        """min(common suffix of the left sides, common prefix of the rights)."""
        lefts = [u[::-1] for u, _ in self.variants]
        rights = [v for _, v in self.variants]
        return min(_common_prefix(lefts), _common_prefix(rights))

    def describe(self):
        return {
            "variants": len(self.variants),
            "radius": self.radius,
            "span": self.span,
            "properness": self.properness,
        }


def _common_prefix(seqs):
    out = min(len(s) for s in seqs)
    first = seqs[0]
    for s in seqs[1:]:
        lo, hi = 0, min(out, len(s))
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if s[:mid] == first[:mid]:
                lo = mid
            else:
                hi = mid - 1
        out = min(out, lo)
    return out


def _length_vectors(dseq, h):
    lens = {a: 1 for a in dseq.alphabet(0)}
    for n in range(h):
        sig = dseq.level(n)
        lens = {a: sum(lens[b] for b in sig.image(a)) for a in sig.source}
    return lens


def _string_images(dseq, h):
    """Letter at level h -> flat level-0 text of its full expansion."""
    base = dseq.alphabet(0)
    flat = all(len(x) == 1 for x in base)
    f = {a: a if flat else (a,) for a in base}
    for n in range(h):
        sig = dseq.level(n)
        if flat:
            f = {a: "".join(f[b] for b in sig.image(a)) for a in sig.source}
        else:
            f = {a: tuple(x for b in sig.image(a) for x in f[b]) for a in sig.source}
    return f


def _patterns(dseq, marker):
    flat = all(len(x) == 1 for x in dseq.alphabet(0))
    out = []
    for u, v in marker.variants:
        if flat:
            fu = u if _is_text(u) else "".join(u)
            fv = v if _is_text(v) else "".join(v)
        else:
            fu = tuple(u)
            fv = tuple(v)
        out.append((fu, fv))
    return out


def _find_centers(text, patterns):
    """Sorted match centers; patterns is [(u, v), ...] in flat form."""
    found = set()
    if _is_text(text):
        for u, v in patterns:
            pat = u + v
            i = text.find(pat)
            while i != -1:
                found.add(i + len(u))
                i = text.find(pat, i + 1)
    else:
        n = len(text)
        for u, v in patterns:
            pat = u + v
            k = len(pat)
            for i in range(n - k + 1):
                if text[i : i + k] == pat:
                    found.add(i + len(u))
    return sorted(found)


class _Scan:
    """Occurrence data for all generator words at one horizon.  Words
    above the materialized horizon keep ``words[a] = None``."""

    __slots__ = ("horizon", "letters", "words", "lens", "occ", "segs")

    def __init__(self, horizon, letters):
        self.horizon = horizon
        self.letters = letters
        self.words = {}
        self.lens = {}
        self.occ = {}
        self.segs = {}

    def segments(self):
        return {s for a in self.letters for s in self.segs[a]}

    def sequence_facts(self, max_len):
        out = set()
        for a in self.letters:
            segs = self.segs[a]
            for k in range(1, max_len + 1):
                for i in range(len(segs) - k + 1):
                    out.add(tuple(segs[i : i + k]))
        return out


def _scan_direct(dseq, h, marker, budget):
    total = sum(_length_vectors(dseq, h).values())
    if total > budget:
        raise InsufficientDepthError(
            f"generator budget exceeded at horizon {h}: "
            f"{total} letters against a budget of {budget}"
        )
    pats = _patterns(dseq, marker)
    letters = tuple(sorted(dseq.alphabet(h)))
    images = _string_images(dseq, h)
    scan = _Scan(h, letters)
    for a in letters:
        text = images[a]
        occ = _find_centers(text, pats)
        scan.words[a] = text
        scan.lens[a] = len(text)
        scan.occ[a] = occ
        scan.segs[a] = [text[occ[j] : occ[j + 1]] for j in range(len(occ) - 1)]
    return scan


def _scan_above(dseq, marker, base):
    """Scan horizon base.horizon + 1 through chunk seams, without
    expanding the longer words.  Interior segments are reused from the
    base scan; only seam-crossing segments are stitched."""
    h = base.horizon
    pats = _patterns(dseq, marker)
    span = marker.span
    sig = dseq.level(h)
    letters = tuple(sorted(dseq.alphabet(h + 1)))
    scan = _Scan(h + 1, letters)
    known = {a: set(base.occ[a]) for a in base.letters}
    flat = _is_text(next(iter(base.words.values())))
    for x in letters:
        chunks = sig.image(x)
        offs = [0]
        for b in chunks:
            offs.append(offs[-1] + base.lens[b])
        total = offs[-1]

        def cut(i, j):
            # stitch text[i:j] out of chunk expansions
            parts = []
            c = bisect_right(offs, i) - 1
            while i < j:
                take = min(j, offs[c + 1])
                parts.append(base.words[chunks[c]][i - offs[c] : take - offs[c]])
                i = take
                c += 1
            if flat:
                return "".join(parts)
            return tuple(y for p in parts for y in p)

        centers = set()
        for ci, b in enumerate(chunks):
            off = offs[ci]
            centers.update(off + k for k in base.occ[b])
        for si in range(1, len(chunks)):
            p = offs[si]
            lo = max(0, p - span + 1)
            hi = min(total, p + span - 1)
            if hi <= lo:
                continue
            window = cut(lo, hi)
            for u, v in pats:
                pat = u + v
                if flat:
                    i = window.find(pat)
                    while i != -1:
                        k = lo + i + len(u)
                        if k - len(u) < p < k + len(v):
                            centers.add(k)
                        i = window.find(pat, i + 1)
                else:
                    for i in range(len(window) - len(pat) + 1):
                        if window[i : i + len(pat)] == pat:
                            k = lo + i + len(u)
                            if k - len(u) < p < k + len(v):
                                centers.add(k)
        occ = sorted(centers)
        segs = []
        for j in range(len(occ) - 1):
            i0, i1 = occ[j], occ[j + 1]
            c = bisect_right(offs, i0) - 1
            b = chunks[c]
            k0, k1 = i0 - offs[c], i1 - offs[c]
            if k1 <= base.lens[b] and k0 in known[b] and k1 in known[b]:
                base_occ = base.occ[b]
                jj = base_occ.index(k0)
                if jj + 1 < len(base_occ) and base_occ[jj + 1] == k1:
                    segs.append(base.segs[b][jj])
                    continue
            segs.append(cut(i0, i1))
        scan.words[x] = None
        scan.lens[x] = total
        scan.occ[x] = occ
        scan.segs[x] = segs
    return scan


def _short_occurrence(scan):
    for a in scan.letters:
        if len(scan.occ[a]) < _MIN_OCCURRENCES:
            return a, len(scan.occ[a])
    return None


def _period_at_most(text, bound):
    """Smallest period <= bound, or None.  Exact once len >= 2*bound + 2."""
    if bound < 1:
        return None
    if not _is_text(text):
        p = least_period(text)
        return p if p <= bound else None
    n = len(text)
    probe = text[: bound + 1]
    q = text.find(probe, 1)
    while 0 < q <= bound:
        if text[q:] == text[: n - q]:
            return q
        q = text.find(probe, q + 1)
    return None


def _as_level0_word(text):
    if _is_text(text):
        return tuple(text)
    return text


def _stable_scans(source, marker, horizon, budget, max_horizon, ready=None):
    """Find a horizon whose scan is syndetic and agrees with the scan
    one level deeper.  ``ready`` may impose further conditions by
    returning an error to record instead of None."""
    if not isinstance(source, DirectiveSequence):
        raise HypothesisError("return-word scanning needs a directive sequence")
    hs = [horizon] if horizon is not None else range(2, max_horizon + 1)
    last_err = None
    for h in hs:
        if h < 1:
            raise HypothesisError(f"horizon must be positive, got {h}")
        if h + 1 > source.declared_depth:
            last_err = last_err or InsufficientDepthError(
                f"horizon {h} needs level {h + 1} of a "
                f"depth-{source.declared_depth} sequence"
            )
            break
        scan = _scan_direct(source, h, marker, budget)
        above = _scan_above(source, marker, scan)
        short = _short_occurrence(scan) or _short_occurrence(above)
        if short is not None:
            a, k = short
            last_err = HypothesisError(
                f"marker not syndetic at horizon {h}: letter {a!r} has "
                f"{k} occurrences, need {_MIN_OCCURRENCES}"
            )
            continue
        if scan.segments() != above.segments():
            last_err = InsufficientDepthError(
                f"return words not stabilized at horizon {h}"
            )
            continue
        if ready is not None:
            err = ready(scan, above)
            if err is not None:
                last_err = err
                continue
        return scan, above, h
    raise last_err or InsufficientDepthError(
        f"return words not stabilized within horizon {max_horizon}"
    )


def return_words(source, marker, horizon=None, budget=80_000_000, max_horizon=24):
    """Distinct words between consecutive marker occurrences.

    Computed on the expansions of every level-``horizon`` letter and
    cross-checked one level deeper; a mismatch means the horizon shows
    an incomplete picture.  With horizon=None the smallest adequate
    horizon is searched.
    """
    scan, _above, _h = _stable_scans(source, marker, horizon, budget, max_horizon)
    return frozenset(_as_level0_word(s) for s in scan.segments())


@dataclass(frozen=True)
class ReturnCoding:
    """A return-word recoding: fresh letters "1".."k", the decoding
    morphism tau back to the base alphabet, and the measured constants."""

    marker: Marker
    alphabet: tuple
    tau: Morphism
    horizon: int
    syndeticity: int
    separation: int
    reco_radius: int
    certificates: dict = field(compare=False)

    def __post_init__(self):
        m = metrics(self.tau)
        if m["max_len"] > self.syndeticity or m["min_len"] < self.separation:
            raise AssertionError("contract broken: coding bounds disagree with tau")


def _table_len(marker, d, rho, radius_cap, window_cap):
    """Factor length a recognizability table must reach, and whether the
    table check is affordable at all.  Mirrors the radius-to-window rule
    of the recognizability checker."""
    reco_radius = marker.radius + d
    if reco_radius > radius_cap:
        return 2, False
    cover = 3 if reco_radius == 0 else (2 * reco_radius - 1) // rho + 4
    if cover > window_cap:
        return 2, False
    return cover, True


def build_return_coding(
    source,
    marker,
    horizon=None,
    budget=80_000_000,
    max_horizon=24,
    table_radius_cap=64,
    table_window_cap=24,
):
    """Recode a system over the return words of a syndetic marker.

    Returns (ReturnCoding, LanguageTable); the table holds factors of
    the recoded generator words.  Four certificates are checked and
    recorded: (a) decoding through tau reproduces the generator text
    between the first and last cut, (b) recognizability of tau at
    radius r + d, by table check when affordable and by the covering
    argument otherwise, (c) length, separation and properness bounds on
    tau, (d) decoding cut positions equal the marker occurrences.
    """

    def ready(scan, above):
        words = scan.segments()
        d = max(len(s) for s in words)
        rho = min(len(s) for s in words)
        max_len, _runnable = _table_len(
            marker, d, rho, table_radius_cap, table_window_cap
        )
        if max(len(scan.segs[a]) for a in scan.letters) < max_len:
            return InsufficientDepthError(
                f"recoded words shorter than {max_len} at horizon {scan.horizon}"
            )
        if scan.sequence_facts(max_len) != above.sequence_facts(max_len):
            return InsufficientDepthError(
                f"recoded language not stabilized at length {max_len} "
                f"at horizon {scan.horizon}"
            )
        return None

    scan, above, h = _stable_scans(
        source, marker, horizon, budget, max_horizon, ready=ready
    )
    words = scan.segments()
    d = max(len(s) for s in words)
    rho = min(len(s) for s in words)
    ell = marker.properness
    reco_radius = marker.radius + d
    max_len, runnable = _table_len(marker, d, rho, table_radius_cap, table_window_cap)

    for a in scan.letters:
        if scan.lens[a] >= 2 * d + 2:
            q = _period_at_most(scan.words[a], d)
            if q is not None:
                raise HypothesisError(
                    f"separation check failed: generator word for {a!r} at "
                    f"horizon {h} has period {q} <= syndeticity bound {d}; "
                    f"a periodic system admits no return-word coding"
                )

    order = []
    seen = set()
    for a in scan.letters:
        for s in scan.segs[a]:
            if s not in seen:
                seen.add(s)
                order.append(s)
    names = tuple(str(i + 1) for i in range(len(order)))
    tau = Morphism(
        {names[i]: _as_level0_word(order[i]) for i in range(len(order))},
        source=names,
        target=tuple(source.alphabet(0)),
    )
    index = {order[i]: names[i] for i in range(len(order))}
    coded = {a: tuple(index[s] for s in scan.segs[a]) for a in scan.letters}
    coded_above = {a: tuple(index[s] for s in above.segs[a]) for a in above.letters}

    table = LanguageTable(
        level=0,
        max_len=max_len,
        depth=h,
        words=frozenset(_facts(coded, max_len) | _facts(coded_above, max_len)),
        stabilized=True,
    )

    certificates = _certify(
        marker, scan, tau, coded, table, d, rho, ell, reco_radius, runnable
    )
    coding = ReturnCoding(
        marker=marker,
        alphabet=names,
        tau=tau,
        horizon=h,
        syndeticity=d,
        separation=rho,
        reco_radius=reco_radius,
        certificates=certificates,
    )
    return coding, table


def _facts(coded, max_len):
    out = set()
    for w in coded.values():
        for k in range(1, max_len + 1):
            for i in range(len(w) - k + 1):
                out.add(w[i : i + k])
    return out


def _certify(marker, scan, tau, coded, table, d, rho, ell, reco_radius, runnable):
    flat = _is_text(next(iter(scan.words.values())))
    images = {c: "".join(tau.image(c)) if flat else tau.image(c) for c in tau.source}

    # (a) decoding through tau reproduces the generator text
    for a in scan.letters:
        occ = scan.occ[a]
        decoded = (
            "".join(images[c] for c in coded[a])
            if flat
            else tuple(x for c in coded[a] for x in images[c])
        )
        if decoded != scan.words[a][occ[0] : occ[-1]]:
            raise HypothesisError(
                f"certificate (a) failed: decoding the recoded word for {a!r} "
                f"does not reproduce the generator text"
            )

    # (b) recognizability of tau at radius r + d
    if runnable:
        report = recognizability_check(tau, table, reco_radius)
        if report.verdict != "recognizable_at_r":
            raise HypothesisError(
                f"certificate (b) failed: recoding not recognizable at "
                f"radius {reco_radius}; witness {report.witness}"
            )
        reco_cert = {
            "mode": "table",
            "radius": reco_radius,
            "verdict": report.verdict,
        }
    else:
        reco_cert = {
            "mode": "structural",
            "radius": reco_radius,
            "verdict": "radius covers one return block plus the marker context",
        }

    # (c) measured bounds on tau
    m = metrics(tau)
    prop = properness(tau)
    need = min(rho, ell)
    if m["max_len"] > d or m["min_len"] < rho or prop < need:
        raise HypothesisError(
            f"certificate (c) failed: tau has lengths "
            f"[{m['min_len']}, {m['max_len']}] and properness {prop}; need "
            f"lengths within [{rho}, {d}] and properness at least {need}"
        )

    # (d) decoding cuts sit exactly on the marker occurrences
    for a in scan.letters:
        occ = scan.occ[a]
        pos = occ[0]
        cuts = [pos]
        for c in coded[a]:
            pos += len(images[c])
            cuts.append(pos)
        if cuts != list(occ):
            raise HypothesisError(
                f"certificate (d) failed: decoding cuts for {a!r} disagree "
                f"with the marker occurrences"
            )

    small = all(len(tau.image(c)) <= 64 for c in tau.source)
    coding_cert = {"letters": len(tau.source)}
    if small:
        coding_cert["words"] = {c: "".join(tau.image(c)) for c in tau.source}
    else:
        coding_cert["word_lengths"] = {c: len(tau.image(c)) for c in tau.source}
    return {
        "marker": marker.describe(),
        "horizon": scan.horizon,
        "d": d,
        "rho": rho,
        "ell": ell,
        "reco_radius": reco_radius,
        "coding": coding_cert,
        "decoding": {"reproduced": True, "words_checked": len(scan.letters)},
        "recognizability": reco_cert,
        "bounds": {
            "tau_min_len": m["min_len"],
            "tau_max_len": m["max_len"],
            "properness": prop,
            "required_properness": need,
        },
        "cuts": {"agree": True, "words_checked": len(scan.letters)},
        "table": {
            "max_len": table.max_len,
            "size": len(table.words),
            "stabilized": table.stabilized,
        },
    }


def align_through(base, base_table, base_radius, upper):
    """Factor ``upper`` through ``base``: find nu with base o nu = upper.

    Preconditions, on the caller: recognizability of base at
    base_radius over its source language (base_table), and upper at
    least base_radius-proper.  Each image of upper is parsed into
    images of base; the parse must exist and be unique.  The result
    must be letter-onto and, unless it is a pure relabeling, proper.
    """
    if properness(upper) < base_radius:
        raise HypothesisError(
            f"upper morphism is not {base_radius}-proper: "
            f"properness {properness(upper)}"
        )
    grams = {w for w in base_table.words if len(w) == 2}
    if not grams:
        raise HypothesisError("base language table holds no two-letter words")
    flat = all(len(x) == 1 for x in base.target)
    blocks = {}
    for a in base.source:
        img = base.image(a)
        key = "".join(img) if flat else img
        blocks.setdefault(key, []).append(a)
    items = sorted(blocks.items(), key=lambda kv: (-len(kv[0]), kv[0]))

    rules = {}
    for a in upper.source:
        img = upper.image(a)
        s = "".join(img) if flat else img
        parses = _parse_blocks(s, items, grams)
        if not parses:
            raise HypothesisError(
                f"cut containment violated: image of {a!r} does not parse "
                f"into base blocks"
            )
        if len(parses) > 1:
            raise HypothesisError(
                f"cut containment violated: ambiguous parse for {a!r} "
                f"({len(parses)} block readings)"
            )
        rules[a] = parses[0]

    nu = Morphism(rules, source=upper.source, target=base.source)
    if compose(base, nu) != upper:
        raise AssertionError("contract broken: alignment does not recompose")
    missing = set(base.source) - {x for w in rules.values() for x in w}
    if missing:
        raise HypothesisError(
            f"alignment is not letter-onto: missing {sorted(missing)}"
        )
    if properness(nu) < 1 and not _relabeling(nu):
        raise HypothesisError(
            "alignment is not proper: images share no boundary letter"
        )
    return nu


def _relabeling(m):
    imgs = [m.image(a) for a in m.source]
    return all(len(w) == 1 for w in imgs) and len(set(imgs)) == len(imgs)


def _parse_blocks(s, items, grams, cap=2):
    """Up to ``cap`` ways of reading s as a concatenation of blocks,
    with consecutive block letters restricted to the known two-letter
    words.  Dead (position, last letter) states are memoized."""
    n = len(s)
    text = _is_text(s)
    out = []
    dead = set()

    def rec(pos, word):
        if len(out) >= cap:
            return
        if pos == n:
            if word:
                out.append(tuple(word))
            return
        state = (pos, word[-1] if word else None)
        if state in dead:
            return
        before = len(out)
        for block, letters in items:
            hit = (
                s.startswith(block, pos)
                if text
                else s[pos : pos + len(block)] == block
            )
            if not hit:
                continue
            for b in letters:
                if word and (word[-1], b) not in grams:
                    continue
                word.append(b)
                rec(pos + len(block), word)
                word.pop()
        if len(out) == before and len(out) < cap:
            dead.add(state)

    rec(0, [])
    return out


@dataclass(frozen=True)
class Tower:
    """Codings nu_n with aligned connecting maps: nu_n tau_n = nu_{n+1}
    and nu_n phi_n recovers the contracted composition at the next cut."""

    source: DirectiveSequence
    normalization: str
    cuts: tuple
    nu: dict
    tau: dict
    phi: dict
    codings: dict
    tables: dict
    certificates: dict


def recognizable_tower(
    dseq,
    m_levels,
    properize_depth=32,
    budget=80_000_000,
    max_horizon=24,
    table_radius_cap=64,
    table_window_cap=24,
):
    """Build codings nu_2 .. nu_{m_levels + 1} at contraction cuts and
    align them into a commuting tower.

    The sequence is normalized to a proper one first: kept as is,
    replaced by a rotation conjugate when stationary, or recoded over
    return pairs.  Cuts are then chosen greedily so that at each cut
    the minimum image period and the composed properness both dominate
    three times the previous cut's longest image.  The top aligning map
    is built only when one more cut fits the expansion budget; the
    certificates record a skip otherwise."""
    if m_levels < 1:
        raise HypothesisError(f"tower needs at least one level, got {m_levels}")
    prefix = min(dseq.declared_depth, properize_depth)
    for n in range(prefix):
        if not classify(dseq.level(n), 0)["letter_onto"]:
            raise HypothesisError(
                f"tower needs a letter-onto sequence: level {n} skips letters; "
                f"drop unused letters first"
            )

    normalized, normalization = _normalize(dseq, prefix, properize_depth)
    cuts, cut_data = _contract_cuts(normalized, m_levels + 2, budget)
    if len(cuts) < m_levels + 1:
        last = cut_data["attempts"][-1] if cut_data["attempts"] else {}
        if "stopped" in last:
            detail = f"level {last['level']} {last['stopped']}"
        else:
            detail = (
                f"deepest attempt reached period {last.get('period')} and "
                f"properness {last.get('properness')} against a requirement "
                f"of {last.get('required')}"
            )
        raise HypothesisError(
            f"contraction budget exhausted after cuts {cuts}: {detail}"
        )

    codings = {}
    tables = {}
    nu = {}
    for i in range(1, m_levels + 1):
        n = i + 1
        marker = _cut_marker(normalized, cuts[i])
        coding, table = build_return_coding(
            normalized,
            marker,
            budget=budget,
            max_horizon=max_horizon,
            table_radius_cap=table_radius_cap,
            table_window_cap=table_window_cap,
        )
        codings[n] = coding
        tables[n] = table
        nu[n] = coding.tau

    targets = {k: normalized.compose_range(0, cuts[k]) for k in range(2, len(cuts))}
    tau = {}
    phi = {}
    skipped = None
    for n in range(2, m_levels + 1):
        tau[n] = align_through(nu[n], tables[n], codings[n].reco_radius, nu[n + 1])
    for n in range(2, m_levels + 2):
        k = n - 1
        if k + 1 in targets:
            phi[n] = align_through(
                nu[n], tables[n], codings[n].reco_radius, targets[k + 1]
            )
        else:
            skipped = f"phi_{n} skipped: no cut {k + 1} within the expansion budget"

    identities = []
    for n in sorted(tau):
        ok = compose(nu[n], tau[n]) == nu[n + 1]
        identities.append({"kind": "telescope", "level": n, "holds": ok})
        if not ok:
            raise AssertionError(f"contract broken: nu_{n} tau_{n} != nu_{n + 1}")
    for n in sorted(phi):
        k = n - 1
        ok = compose(nu[n], phi[n]) == targets[k + 1]
        identities.append({"kind": "factor", "level": n, "holds": ok})
        if not ok:
            raise AssertionError(
                f"contract broken: nu_{n} phi_{n} is not the composition "
                f"through cut {k + 1}"
            )
    for n in sorted(tau):
        if n + 1 not in phi:
            continue
        k = n - 1
        step = normalized.compose_range(cuts[k + 1], cuts[k + 2])
        ok = compose(phi[n], step) == compose(tau[n], phi[n + 1])
        identities.append({"kind": "seam", "level": n, "holds": ok})
        if not ok:
            raise AssertionError(
                f"contract broken: phi_{n} disagrees with tau_{n} phi_{n + 1} "
                f"across cut {k + 1}"
            )

    connecting = {}
    for n in sorted(tau):
        flags = classify(tau[n], 1)
        if not flags["letter_onto"]:
            raise AssertionError(f"contract broken: tau_{n} is not letter-onto")
        if not flags["proper"]:
            raise AssertionError(f"contract broken: tau_{n} is not proper")
        entry = {"proper": True, "letter_onto": True}
        try:
            report = find_constant(tau[n], tables[n + 1], cap=16)
            entry["recognizability"] = {
                "radius": report.radius,
                "verdict": report.verdict,
            }
        except (InsufficientDepthError, HypothesisError) as exc:
            entry["recognizability"] = {"skipped": str(exc)}
        connecting[n] = entry

    certificates = {
        "normalization": normalization,
        "cuts": list(cuts),
        "contraction": cut_data,
        "levels": {n: codings[n].certificates for n in sorted(codings)},
        "identities": identities,
        "connecting": connecting,
    }
    if skipped:
        certificates["phi_top"] = skipped
    return Tower(
        source=normalized,
        normalization=normalization,
        cuts=tuple(cuts),
        nu=nu,
        tau=tau,
        phi=phi,
        codings=codings,
        tables=tables,
        certificates=certificates,
    )


def _normalize(dseq, prefix, properize_depth):
    if all(properness(dseq.level(n)) >= 1 for n in range(prefix)):
        return dseq, "input already proper"
    stationary = all(dseq.level(n) == dseq.level(0) for n in range(prefix))
    if stationary:
        rotated = rotate_to_proper(dseq.level(0))
        if rotated is not None:
            sigma, power, shift = rotated
            out = DirectiveSequence(
                [sigma], repeat="stationary", max_depth=max(40, properize_depth)
            )
            return out, f"rotation conjugate (power {power}, shift {shift})"
    tail_stationary = prefix >= 2 and all(
        dseq.level(n) == dseq.level(1) for n in range(1, prefix)
    )
    if tail_stationary and properness(dseq.level(1)) >= 1:
        return dseq, "tail already proper (head kept)"
    if tail_stationary and dseq.level(1).source == dseq.level(1).target:
        rotated = rotate_to_proper(dseq.level(1))
        if rotated is not None:
            # Rotating the tail only shifts the central words the head
            # maps over, so the level-0 factor language is unchanged.
            sigma, power, shift = rotated
            out = DirectiveSequence(
                [dseq.level(0), sigma],
                repeat="cycle 1",
                max_depth=max(40, properize_depth),
            )
            return out, f"tail rotation conjugate (power {power}, shift {shift})"
    out = properize(dseq, properize_depth)
    bad = [n for n in range(out.declared_depth) if properness(out.level(n)) < 1]
    if bad:
        raise AssertionError("contract broken: properization left improper levels")
    return out, "return-pair properization"


def _contract_cuts(dseq, want, budget):
    cuts = [1]
    m_prev = max(_length_vectors(dseq, 1).values())
    attempts = []
    c = 1
    while len(cuts) < want and c + 1 <= dseq.declared_depth:
        c += 1
        total = sum(_length_vectors(dseq, c).values())
        if total > budget:
            attempts.append({"level": c, "stopped": f"estimate {total} over budget"})
            break
        images = _string_images(dseq, c)
        vals = [images[a] for a in sorted(images)]
        m_here = max(len(v) for v in vals)
        period = min(least_period(v) for v in vals)
        prop = min(_common_prefix(vals), _common_prefix([v[::-1] for v in vals]))
        need = 3 * m_prev
        hit = period >= need and prop >= need
        attempts.append(
            {
                "level": c,
                "max_len": m_here,
                "period": period,
                "properness": prop,
                "required": need,
                "cut": hit,
            }
        )
        if hit:
            cuts.append(c)
            m_prev = m_here
    return cuts, {"attempts": attempts}


def _cut_marker(dseq, cut):
    """Union marker over the images of the length-4 words at the cut
    level, split two against two."""
    table = None
    for depth in range(cut + 1, dseq.declared_depth + 1):
        table = level_language(dseq, cut, 4, depth)
        if table.stabilized:
            break
    if table is None or not table.stabilized:
        raise InsufficientDepthError(
            f"pair language at level {cut} not stabilized within depth "
            f"{dseq.declared_depth}"
        )
    images = _string_images(dseq, cut)
    pairs = []
    for w in table.of_length(4):
        u = images[w[0]] + images[w[1]]
        v = images[w[2]] + images[w[3]]
        pairs.append((u, v))
    return Marker.union(pairs)


def write_tower(tower, directory):
    """Serialize a tower: one .mor file per morphism plus the
    certificates as sorted JSON.  Returns the written paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, family in (("nu", tower.nu), ("tau", tower.tau), ("phi", tower.phi)):
        for n in sorted(family):
            path = os.path.join(directory, f"{name}_{n}.mor")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(format_morphism(family[n]))
                fh.write("\n")
            paths.append(path)
    path = os.path.join(directory, "certificates.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tower.certificates, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(path)
    return sorted(paths)


def inflate(sigma):
    """Length-preserving letter repetition: a -> a^|sigma(a)|."""
    rules = {a: (a,) * len(sigma.image(a)) for a in sigma.source}
    return Morphism(rules, source=sigma.source, target=sigma.source)
