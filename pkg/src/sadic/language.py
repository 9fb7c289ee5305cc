"""Directive sequences and finite-depth views of their level languages.

A directive sequence chains morphisms sigma_n: A_{n+1}+ -> A_n+.
Expanding a letter from level N down to level n yields the words visible
at depth N; their factors approximate the level-n language from below.
Every table records the depth it was computed at and whether one more
level of depth changed anything, and the normal-form constructions here
refuse to run on tables that have not stabilized.
"""

import importlib.resources
import os
from dataclasses import dataclass

from .errors import FormatError, HypothesisError, InsufficientDepthError
from .morphism import (
    Morphism,
    as_word,
    classify,
    compose,
    compose_chain,
    format_morphism,
    identity,
    metrics,
    parse_morphism,
)
from .words import least_period


class DirectiveSequence:
    """Chain of morphisms with matching alphabets.

    ``repeat`` extends the listed levels periodically: ``"stationary"``
    cycles the whole list, ``"cycle k"`` the last k entries.  Generated
    levels are materialized lazily and capped at ``max_depth`` so that a
    repeating sequence cannot be consumed without bound.
    """

    def __init__(self, levels, repeat=None, max_depth=32):
        levels = list(levels)
        if not levels:
            raise HypothesisError("a directive sequence needs at least one level")
        for n in range(len(levels) - 1):
            if levels[n].source != levels[n + 1].target:
                raise HypothesisError(
                    f"alphabet mismatch between levels {n} and {n + 1}: "
                    f"source {levels[n].source} vs target {levels[n + 1].target}"
                )
        self.levels = tuple(levels)
        self.max_depth = int(max_depth)
        if repeat is not None:
            repeat = str(repeat).strip()
            if repeat == "stationary":
                cycle = len(levels)
            else:
                parts = repeat.split()
                if len(parts) != 2 or parts[0] != "cycle" or not parts[1].isdigit():
                    raise FormatError(f"unknown repeat rule: {repeat!r}")
                cycle = int(parts[1])
                if not 1 <= cycle <= len(levels):
                    raise HypothesisError(
                        f"repeat cycle {cycle} exceeds the {len(levels)} listed levels"
                    )
            seam = levels[len(levels) - cycle]
            if levels[-1].source != seam.target:
                raise HypothesisError(
                    "repeat rule does not close: the deepest source alphabet "
                    "differs from the cycled target alphabet"
                )
            self._cycle = cycle
        else:
            self._cycle = 0
        self.repeat_rule = repeat

    @property
    def declared_depth(self):
        """Number of levels that can be materialized."""
        if self.repeat_rule is None:
            return len(self.levels)
        return max(len(self.levels), self.max_depth)

    def level(self, n):
        if n < 0:
            raise HypothesisError(f"negative level index {n}")
        if n >= self.declared_depth:
            raise InsufficientDepthError(
                f"insufficient materialized levels: level {n} of a "
                f"depth-{self.declared_depth} sequence"
            )
        if n < len(self.levels):
            return self.levels[n]
        base = len(self.levels) - self._cycle
        return self.levels[base + (n - base) % self._cycle]

    def alphabet(self, n):
        """Alphabet A_n; defined for 0 <= n <= declared_depth."""
        if n == 0:
            return self.levels[0].target
        return self.level(n - 1).source

    def compose_range(self, n, N):
        """Composition sigma_n o ... o sigma_{N-1}; identity when n == N."""
        if not 0 <= n <= N:
            raise HypothesisError(f"need 0 <= n <= N, got n={n}, N={N}")
        if n == N:
            return identity(self.alphabet(n))
        return compose_chain([self.level(i) for i in range(n, N)])

    def expand(self, n, N, w):
        """Apply sigma_n o ... o sigma_{N-1} to a level-N word, one level
        at a time, without building the composed morphism."""
        w = as_word(w)
        if not 0 <= n <= N:
            raise HypothesisError(f"need 0 <= n <= N, got n={n}, N={N}")
        for m in range(N - 1, n - 1, -1):
            w = self.level(m)(w)
        return w

    def alphabet_rank(self):
        """Smallest alphabet among the materialized levels.

        A finite-stage quantity: deeper, never-materialized levels could
        still be smaller, so this is only an upper bound for the limit.
        """
        return min(len(self.alphabet(n)) for n in range(len(self.levels) + 1))

    def __repr__(self):
        tail = f", repeat={self.repeat_rule!r}" if self.repeat_rule else ""
        return f"DirectiveSequence({len(self.levels)} levels{tail})"


@dataclass(frozen=True)
class LanguageTable:
    """Words of length <= max_len seen at one level, from one depth."""

    level: int
    max_len: int
    depth: int
    words: frozenset
    stabilized: bool

    def __contains__(self, w):
        return as_word(w) in self.words

    def of_length(self, k):
        return sorted(w for w in self.words if len(w) == k)

    def sorted_words(self):
        return sorted(self.words, key=lambda w: (len(w), w))


def _exact_factors(dseq, n, L, N):
    """All factors of length <= L of sigma_[n,N)(a) over a in A_N.

    Works downward keeping only factors of length <= L: a factor of
    sigma(w) that is at most L letters long meets at most L blocks, so
    the level above never needs words longer than L either.
    """
    cur = {(a,) for a in dseq.alphabet(N)}
    for m in range(N - 1, n - 1, -1):
        sig = dseq.level(m)
        nxt = set()
        for w in cur:
            img = sig(w)
            k = len(img)
            for i in range(k):
                for j in range(i + 1, min(i + L, k) + 1):
                    nxt.add(img[i:j])
        cur = nxt
    return cur


def level_language(dseq, n, L, N):
    """Table of level-n words of length <= L visible at depth N."""
    if L < 1:
        raise HypothesisError(f"word length bound must be at least 1, got {L}")
    if not 0 <= n < N:
        raise HypothesisError(f"need 0 <= n < N, got n={n}, N={N}")
    if N > dseq.declared_depth:
        raise InsufficientDepthError(
            f"insufficient materialized levels: depth {N} of a "
            f"depth-{dseq.declared_depth} sequence"
        )
    words = _exact_factors(dseq, n, L, N)
    stabilized = False
    if N - 1 > n:
        prev = _exact_factors(dseq, n, L, N - 1)
        lost = prev - words
        if lost:
            raise HypothesisError(
                f"level-{n} language shrank from depth {N - 1} to {N} "
                f"(level-{N - 1} morphism is not letter-onto): "
                f"lost {sorted(lost)[0]!r}"
            )
        stabilized = prev == words
    return LanguageTable(
        level=n, max_len=L, depth=N, words=frozenset(words), stabilized=stabilized
    )


def growth_profile(dseq, N):
    """Minimum image length of sigma_[0,n) for n = 0..N-1.

    Computed from letter-length vectors, so deep levels never expand."""
    if not 1 <= N <= dseq.declared_depth:
        raise InsufficientDepthError(
            f"insufficient materialized levels: depth {N} of a "
            f"depth-{dseq.declared_depth} sequence"
        )
    lens = {a: 1 for a in dseq.alphabet(0)}
    out = [1]
    for n in range(N - 1):
        sig = dseq.level(n)
        lens = {a: sum(lens[b] for b in sig.image(a)) for a in sig.source}
        out.append(min(lens.values()))
    for x, y in zip(out, out[1:]):
        if y < x:
            raise AssertionError("contract broken: growth profile decreased")
    return out


def min_period_profile(dseq, N):
    """Smallest least-period among the images sigma_[0,n)(a), n = 0..N-1."""
    if not 1 <= N <= dseq.declared_depth:
        raise InsufficientDepthError(
            f"insufficient materialized levels: depth {N} of a "
            f"depth-{dseq.declared_depth} sequence"
        )
    out = []
    for n in range(N):
        out.append(
            min(least_period(dseq.expand(0, n, (a,))) for a in dseq.alphabet(n))
        )
    return out


def contract(dseq, cut_points):
    """Compose level blocks [c_k, c_{k+1}) into single levels.

    The result runs through the same alphabets at the cut levels and has
    the same level-0 words; that is re-checked here at a small scale."""
    cuts = list(cut_points)
    if (
        len(cuts) < 2
        or cuts[0] != 0
        or any(cuts[i] >= cuts[i + 1] for i in range(len(cuts) - 1))
    ):
        raise HypothesisError(
            f"invalid cut points: need a strictly increasing list "
            f"starting at 0 with at least two entries, got {cuts}"
        )
    if cuts[-1] > dseq.declared_depth:
        raise HypothesisError(
            f"invalid cut points: {cuts[-1]} exceeds depth {dseq.declared_depth}"
        )
    levels = [dseq.compose_range(cuts[k], cuts[k + 1]) for k in range(len(cuts) - 1)]

    repeat = None
    if dseq.repeat_rule is not None:
        diffs = {cuts[k + 1] - cuts[k] for k in range(len(cuts) - 1)}
        base = len(dseq.levels) - dseq._cycle
        if len(diffs) == 1:
            step = diffs.pop()
            if step % dseq._cycle == 0 and cuts[-2] >= base:
                # continuation repeats the last composed block
                if all(m == levels[-1] for m in levels):
                    repeat = "stationary"
                else:
                    repeat = "cycle 1"
    out = DirectiveSequence(levels, repeat=repeat, max_depth=dseq.max_depth)

    if _exact_factors(out, 0, 2, len(levels)) != _exact_factors(dseq, 0, 2, cuts[-1]):
        raise AssertionError("contract broken: contraction changed the level-0 words")
    return out


def trim_letter_onto(dseq, N):
    """Drop letters that never occur in the level language.

    Keeps, at each level n < N, only the letters seen in some depth-N
    expansion; every kept letter of level n sits inside the image of a
    kept letter of level n+1, so the trimmed levels are letter-onto."""
    if not 1 <= N <= dseq.declared_depth:
        raise InsufficientDepthError(
            f"insufficient materialized levels: depth {N} of a "
            f"depth-{dseq.declared_depth} sequence"
        )
    keep = []
    for n in range(N):
        seen = _exact_factors(dseq, n, 1, N)
        kept = tuple(a for a in dseq.alphabet(n) if (a,) in seen)
        if not kept:
            raise HypothesisError(f"trimming empties the alphabet at level {n}")
        keep.append(kept)
    keep.append(dseq.alphabet(N))

    levels = []
    for n in range(N):
        sig = dseq.level(n)
        levels.append(
            Morphism(
                {a: sig.image(a) for a in keep[n + 1]},
                source=keep[n + 1],
                target=keep[n],
            )
        )
    out = DirectiveSequence(levels, repeat=None, max_depth=dseq.max_depth)
    for n, m in enumerate(out.levels):
        if not classify(m, 0)["letter_onto"]:
            raise AssertionError(
                f"contract broken: trimmed level {n} is not letter-onto"
            )
    return out


# ---------------------------------------------------------------------------
# properization


def _occurrences(word, w):
    k = len(w)
    return sum(1 for i in range(len(word) - k + 1) if word[i : i + k] == w)


def _pair_name(x, y):
    return f"{x};{y}"


def properize(dseq, N):
    """Rebuild the sequence so that every level is proper.

    Levels are first composed into blocks until each image contains every
    admissible length-3 word at least twice.  Around the smallest such
    word the images are cut in two, and consecutive-letter pairs [x;y]
    re-spell everything so that all images of one level share their first
    and last letter.  Block boundaries are limited to levels whose
    length-3 tables have stabilized within the given depth, and the first
    returned level maps pair letters back onto the original alphabet.
    """
    if not 2 <= N <= dseq.declared_depth:
        raise InsufficientDepthError(
            f"insufficient materialized levels: depth {N} of a "
            f"depth-{dseq.declared_depth} sequence"
        )
    for a in dseq.alphabet(0):
        if ";" in a:
            raise HypothesisError(f"letter {a!r} contains ';', reserved for pairs")

    tables = {}

    def table(level):
        if level not in tables:
            tables[level] = level_language(dseq, level, 3, N)
        return tables[level]

    if not table(0).stabilized:
        raise InsufficientDepthError(
            "insufficient depth for properization: the level-0 language "
            f"has not stabilized at depth {N}"
        )

    bounds = [0]
    while True:
        c = bounds[-1]
        threes = [w for w in table(c).sorted_words() if len(w) == 3]
        found = None
        for e in range(c + 1, N):
            if not table(e).stabilized:
                continue
            mu = dseq.compose_range(c, e)
            if all(
                _occurrences(mu.image(a), w) >= 2
                for a in mu.source
                for w in threes
            ):
                found = e
                break
        if found is None:
            break
        bounds.append(found)
    if len(bounds) == 1:
        raise InsufficientDepthError(
            "insufficient depth for properization: no block of levels has "
            "all length-3 words twice in every image within depth "
            f"{N} (stabilized boundaries only)"
        )

    alphas = [dseq.alphabet(c) for c in bounds]
    pair_letters = []
    for k, c in enumerate(bounds):
        two = {w for w in table(c).words if len(w) == 2}
        pair_letters.append(
            tuple(
                _pair_name(x, y)
                for x in alphas[k]
                for y in alphas[k]
                if (x, y) in two
            )
        )

    taus = []
    for k in range(len(bounds) - 1):
        A = alphas[k]
        index = {a: i for i, a in enumerate(A)}
        threes = [w for w in table(bounds[k]).words if len(w) == 3]
        w_k = min(threes, key=lambda w: tuple(index[x] for x in w))
        ak, bk, ck = w_k
        mu = dseq.compose_range(bounds[k], bounds[k + 1])
        cut_u = {}
        cut_v = {}
        for a in mu.source:
            img = mu.image(a)
            pos = next(
                i for i in range(len(img) - 2) if img[i : i + 3] == w_k
            )
            cut_u[a] = img[: pos + 1]
            cut_v[a] = img[pos + 1 :]
        allowed = set(pair_letters[k])
        rules = {}
        for name in pair_letters[k + 1]:
            x, y = name.split(";")
            z = cut_v[x] + cut_u[y] + (bk,)
            spelled = tuple(_pair_name(z[i], z[i + 1]) for i in range(len(z) - 1))
            for p in spelled:
                if p not in allowed:
                    raise AssertionError(
                        f"contract broken: pair {p!r} escaped the level-"
                        f"{bounds[k]} pair alphabet"
                    )
            rules[name] = spelled
        taus.append(
            Morphism(rules, source=pair_letters[k + 1], target=pair_letters[k])
        )

    eta = Morphism(
        {name: (name.split(";")[0],) for name in pair_letters[0]},
        source=pair_letters[0],
        target=alphas[0],
    )
    out_levels = [compose(eta, taus[0])] + taus[1:]
    out = DirectiveSequence(out_levels, repeat=None, max_depth=dseq.max_depth)

    for k, m in enumerate(out.levels):
        if not classify(m, 1)["proper"]:
            raise AssertionError(f"contract broken: output level {k} is not proper")
        if metrics(m)["min_len"] < 2:
            raise AssertionError(
                f"contract broken: output level {k} has an image shorter than 2"
            )
    for k in range(len(bounds)):
        if len(pair_letters[k]) > len(alphas[k]) ** 2:
            raise AssertionError("contract broken: pair alphabet outgrew its square")
    base_words = table(0).words
    for name in out_levels[0].source:
        img = out_levels[0].image(name)
        for i in range(len(img)):
            for j in range(i + 1, min(i + 3, len(img)) + 1):
                if img[i:j] not in base_words:
                    raise AssertionError(
                        "contract broken: output words escaped the input language"
                    )
    return out


# ---------------------------------------------------------------------------
# rotation conjugates


def rotate_to_proper(sigma, max_power=4):
    """Look for a proper morphism of the form w^-1 sigma^k(.) w.

    Returns (conjugate, k, t) for the smallest power k and rotation
    offset t that make every image share its first and last letter, or
    None when no rotation of sigma^1..sigma^max_power works.  The defining
    identity w * conjugate(x) = sigma^k(x) * w is re-checked letterwise.
    """
    if sigma.source != sigma.target:
        raise HypothesisError("rotation conjugation needs source == target")
    power = sigma
    for k in range(1, max_power + 1):
        if k > 1:
            power = compose(sigma, power)
        images = [power.image(a) for a in power.source]
        shortest = min(len(img) for img in images)
        for t in range(1, shortest):
            head = images[0][:t]
            if any(img[:t] != head for img in images):
                break
            rules = {
                a: power.image(a)[t:] + head for a in power.source
            }
            cand = Morphism(rules, source=power.source, target=power.target)
            if classify(cand, 1)["proper"]:
                for a in power.source:
                    if head + cand.image(a) != power.image(a) + head:
                        raise AssertionError(
                            "contract broken: rotation identity failed"
                        )
                return cand, k, t
    return None


# ---------------------------------------------------------------------------
# witness lookup for the lower-rank recursions


def aligned_witness_from_table(morphisms, table, side="prefix"):
    """Scan a language table for a pair (u, v) accepted by the aligned
    lower-rank recursion, in canonical (length, word) order.

    Candidates are restricted to table words over the family's source
    alphabet; returns None when no stored pair works."""
    from .decompose import lower_rank_aligned

    ms = list(morphisms)
    src = set(ms[0].source)
    total = sum(len(ms[0].image(a)) for a in ms[0].source)
    cands = [w for w in table.sorted_words() if set(w) <= src]
    for u in cands:
        if len(u) < total:
            continue
        for v in cands:
            try:
                lower_rank_aligned(ms, u, v, side=side)
            except HypothesisError:
                continue
            return u, v
    return None


# ---------------------------------------------------------------------------
# file format and built-in corpus

_CORPUS = ("fibonacci", "thue-morse", "chacon", "tribonacci")


def corpus_names():
    return _CORPUS


def format_directive_sequence(dseq):
    """Render levels as morphism blocks separated by `---` lines, with a
    trailing repeat footer when the sequence has one."""
    parts = [format_morphism(m) for m in dseq.levels]
    text = "---\n".join(parts)
    if dseq.repeat_rule is not None:
        text += f"repeat: {dseq.repeat_rule}\n"
    return text


def parse_directive_sequence(text):
    repeat = None
    sections = [[]]
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("repeat:"):
            if repeat is not None:
                raise FormatError(f"line {lineno}: duplicate repeat footer")
            repeat = line[len("repeat:") :].strip()
            continue
        if line == "---":
            sections.append([])
            continue
        sections[-1].append(raw)
    levels = []
    for i, lines in enumerate(sections):
        body = "\n".join(lines)
        if not body.strip() or all(
            s.strip().startswith("#") or not s.strip() for s in lines
        ):
            raise FormatError(f"section {i + 1} contains no rules")
        levels.append(parse_morphism(body))
    return DirectiveSequence(levels, repeat=repeat)


def load_corpus(name):
    """Load a built-in directive sequence by identifier.

    A file `<name>.dseq` under SADIC_CORPUS_DIR takes precedence over the
    packaged corpus, so users can shadow or extend it."""
    fname = f"{name}.dseq"
    override = os.environ.get("SADIC_CORPUS_DIR")
    if override:
        path = os.path.join(override, fname)
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                return parse_directive_sequence(fh.read())
    if name not in _CORPUS:
        raise FormatError(
            f"unknown corpus id {name!r} (built-in: {', '.join(_CORPUS)})"
        )
    data = (
        importlib.resources.files("sadic")
        .joinpath("corpus")
        .joinpath(fname)
        .read_text(encoding="utf-8")
    )
    return parse_directive_sequence(data)
