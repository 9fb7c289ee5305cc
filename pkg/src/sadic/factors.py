"""Letter-to-letter factor maps given by window codes.

A factor with radius r is specified locally: a total table from
(2r+1)-letter windows to output letters.  This module turns such a
code into a letterwise morphism on a proper level, transports a whole
directive sequence through the code with alphabet control, profiles
fibers by covering symbols, and enumerates asymptotic-pair candidates.
Everything works at finite scale against language tables, so results
carry the depth they were computed at rather than a limit claim.
"""

import random
from dataclasses import dataclass

from .coding import Tower, recognizable_tower
from .decompose import push_rank_through
from .errors import FormatError, HypothesisError, InsufficientDepthError
from .language import (
    DirectiveSequence,
    LanguageTable,
    contract,
    level_language,
    rotate_to_proper,
)
from .morphism import (
    Morphism,
    as_word,
    classify,
    compose,
    compose_chain,
    format_word,
    parse_word,
    properness,
)


@dataclass(frozen=True)
class LocalCode:
    """Window-to-letter table with a fixed radius.

    table maps (2r+1)-letter words to single output letters.  Only
    windows that occur in the relevant language need entries; applying
    the code to an absent window is an error naming that window.
    """

    radius: int
    table: dict

    def __post_init__(self):
        if self.radius < 0:
            raise HypothesisError(f"radius must be nonnegative, got {self.radius}")
        fixed = {}
        for w, c in self.table.items():
            w = as_word(w)
            if len(w) != self.window_len:
                raise HypothesisError(
                    f"window {format_word(w)} has {len(w)} letters, "
                    f"radius {self.radius} needs {self.window_len}"
                )
            if not isinstance(c, str) or len(c.split()) != 1:
                raise HypothesisError(
                    f"code value for window {format_word(w)} must be a single letter"
                )
            fixed[w] = c
        if not fixed:
            raise HypothesisError("a local code needs at least one window")
        object.__setattr__(self, "table", fixed)

    @property
    def window_len(self):
        return 2 * self.radius + 1

    @property
    def letters(self):
        """Output alphabet, sorted."""
        return tuple(sorted(set(self.table.values())))

    def apply(self, window):
        window = as_word(window)
        if len(window) != self.window_len:
            raise HypothesisError(
                f"window {format_word(window)} has {len(window)} letters, "
                f"radius {self.radius} needs {self.window_len}"
            )
        try:
            return self.table[window]
        except KeyError:
            raise HypothesisError(
                f"code table has no entry for window {format_word(window)}"
            ) from None

    def scan(self, word):
        """Code every interior position; output is 2*radius shorter."""
        word = as_word(word)
        if len(word) < self.window_len:
            raise HypothesisError(
                f"word of length {len(word)} is shorter than one "
                f"window ({self.window_len} letters)"
            )
        r = self.radius
        return tuple(
            self.apply(word[p - r : p + r + 1]) for p in range(r, len(word) - r)
        )

    @classmethod
    def relabeling(cls, mapping):
        """Radius-0 code from a letter-to-letter map."""
        return cls(0, {(a,): c for a, c in mapping.items()})


@dataclass(frozen=True)
class FiberProfile:
    """Covering symbols along one profiled word.

    In each factorization of the word into image blocks, position ell
    is covered by a symbol (offset, letter): which letter's block the
    position falls in and how far from the block start.
    per_position_symbols[ell] is the set of distinct symbols seen at
    ell over all factorizations, per_position_counts its sizes.
    """

    window_len: int
    per_position_symbols: tuple
    per_position_counts: tuple
    min_count: int
    argmin_position: int

    def __post_init__(self):
        assert self.min_count >= 1
        assert self.per_position_counts == tuple(
            len(s) for s in self.per_position_symbols
        )
        assert self.min_count == min(self.per_position_counts)
        assert self.per_position_counts[self.argmin_position] == self.min_count


@dataclass(frozen=True)
class TransportedStructure:
    """A coded factor presented by directive levels of its own.

    tau is the coded image of the level-0 morphism (lengths preserved),
    tower the coding tower built over (tau, sigma_1, sigma_2, ...), and
    nu_sequence the result of factoring the tower's deepest aligning
    map back through its connecting chain, so the factor is generated
    over alphabets no larger than the original ones.
    """

    tau: Morphism
    tower: Tower
    nu_sequence: DirectiveSequence
    psi_levels: tuple
    certificates: dict


def sliding_block_to_morphism(sigma, code, lx1):
    """Turn a radius-r coded factor into a letterwise morphism tau.

    With u and v the shared r-prefix and r-suffix of sigma's images,
    tau(a) reads the code along v sigma(a) u, one window per position
    of sigma(a), so |tau(a)| = |sigma(a)| for every letter.  Interior
    windows of any sigma(w) only ever see this shared padding, which
    makes coding commute with substitution away from the ends; that is
    checked here for every word of lx1.  Properness of tau is reported
    by classify, not enforced: a radius-0 code can merge first letters
    and destroy it, and a larger shared margin can create it.
    """
    r = code.radius
    if not classify(sigma, r)["r_proper"]:
        raise HypothesisError(
            f"sigma is not {r}-proper: images need a shared {r}-letter "
            f"prefix and suffix to pad the code windows"
        )
    if not isinstance(lx1, LanguageTable):
        raise HypothesisError("lx1 must be a language table for sigma's source level")
    stray = {x for w in lx1.words for x in w} - set(sigma.source)
    if stray:
        raise HypothesisError(
            f"language table letter {sorted(stray)[0]!r} is outside sigma's source"
        )
    base = sigma.image(sigma.source[0])
    u = base[:r]
    v = base[len(base) - r :] if r else ()
    rules = {}
    for a in sigma.source:
        img = sigma.image(a)
        coded = code.scan(v + img + u)
        if len(coded) != len(img):
            raise AssertionError(
                f"contract broken: coded image of {a!r} changed length"
            )
        rules[a] = coded
    tau = Morphism(rules, source=sigma.source, target=code.letters)
    for w in lx1.sorted_words():
        s = sigma(w)
        if len(s) < code.window_len:
            continue
        if code.scan(s) != tau(w)[r : len(s) - r]:
            raise AssertionError(
                f"contract broken: coding does not commute with "
                f"substitution on {format_word(w)}"
            )
    return tau


def _stable_language(dseq, n, max_len):
    """Level-n words of length <= max_len, deepened until stable."""
    table = None
    for depth in range(n + 1, dseq.declared_depth + 1):
        table = level_language(dseq, n, max_len, depth)
        if table.stabilized:
            return table
    if table is None:
        raise InsufficientDepthError(f"no materializable depth beyond level {n}")
    return table


def _prepare_radius(dseq, radius, prefix):
    """Compose a head of levels until level 0 is radius-proper.

    Tries the sequence as given, then a rotation conjugate when the
    prefix is stationary; head compositions of up to four levels are
    attempted before giving up.
    """
    if radius == 0:
        return dseq, []
    candidates = [(dseq, None)]
    head = dseq.level(0)
    stationary = all(dseq.level(n) == head for n in range(prefix))
    if stationary and head.source == head.target:
        rotated = rotate_to_proper(head)
        if rotated is not None:
            conjugate, power, shift = rotated
            candidates.append(
                (
                    DirectiveSequence(
                        [conjugate],
                        repeat="stationary",
                        max_depth=max(40, dseq.max_depth),
                    ),
                    f"rotation conjugate (power {power}, shift {shift})",
                )
            )
    for cand, note in candidates:
        for j in range(1, min(4, cand.declared_depth) + 1):
            if not classify(cand.compose_range(0, j), radius)["r_proper"]:
                continue
            notes = [note] if note else []
            if j == 1:
                return cand, notes
            top = min(cand.declared_depth, prefix + j)
            cuts = [0, j] + list(range(j + 1, top + 1))
            notes.append(f"composed {j} head levels for {radius}-properness")
            return contract(cand, cuts), notes
    raise HypothesisError(
        f"no head composition within 4 levels is {radius}-proper "
        f"for this code radius"
    )


def _with_level0(work, tau, properize_depth):
    """Replace level 0 by tau, keeping the repeat structure."""
    rule = work.repeat_rule
    if rule is not None:
        cycle = len(work.levels) if rule == "stationary" else int(rule.split()[1])
        shifted = [work.level(n) for n in range(1, len(work.levels) + 1)]
        return DirectiveSequence(
            [tau] + shifted,
            repeat=f"cycle {cycle}",
            max_depth=max(40, work.max_depth),
        )
    deep = [work.level(n) for n in range(1, work.declared_depth)]
    return DirectiveSequence([tau] + deep, max_depth=max(40, work.max_depth))


def _push_through_tower(tower, depth):
    """Factor the deepest aligning map back through the connecting
    chain, yielding coding levels over a reduced alphabet.

    The chain tau_2 o ... o tau_depth is treated as a single level:
    properness of connecting maps multiplies under composition while
    the aligning map phi_2 stays fixed, and the reduction needs the
    former to dominate the latter.  A single connecting level never
    does, because its properness and phi_2's total length grow with
    the same contraction gap.  Level 0 is factored through the
    shortest proper head composition, with an exact witness built by
    expanding phi_2's source alphabet both ways.
    """
    if depth + 1 not in tower.phi:
        raise HypothesisError(
            f"top aligning map unavailable at depth {depth}: "
            f"{tower.certificates.get('phi_top', 'missing top cut')}"
        )
    seq = tower.source
    cuts = tower.cuts
    nu2 = tower.nu[2]
    phi2 = tower.phi[2]
    chain = compose_chain([tower.tau[n] for n in range(2, depth + 1)])
    sig_top = seq.compose_range(cuts[2], cuts[depth + 1])
    if properness(seq.compose_range(0, 1)) >= 1:
        j = 1
    elif seq.declared_depth >= 2 and properness(seq.compose_range(0, 2)) >= 1:
        j = 2
    else:
        raise HypothesisError("no proper head composition within two levels")
    star = seq.compose_range(0, j)
    x = tuple(phi2.source)
    u0 = seq.compose_range(j, cuts[2])(x)
    w0 = phi2(x)
    return push_rank_through(
        [sig_top],
        [nu2, chain],
        [compose(nu2, phi2), phi2, tower.phi[depth + 1]],
        require_margin=False,
        level0=(star, u0, w0),
    )


def transported_structure(
    dseq,
    code,
    m_levels,
    properize_depth=32,
    budget=80_000_000,
    max_horizon=24,
):
    """Present the coded factor of a directive sequence by a directive
    sequence of its own, with alphabet control.

    Level 0 is replaced by its coded image tau and the deeper levels
    are kept, giving (tau, sigma_1, sigma_2, ...).  A coding tower is
    built on that sequence, then its deepest aligning map is factored
    back through the connecting chain.  The reduction needs the chain
    to be proper enough, and chains deepen one tower level at a time
    until it is, so the loop below retries at up to three depths
    starting from max(2, m_levels).  Certificates record the
    preparation, the tower shape, every push attempt, the pushed
    alphabet bounds against the original alphabet sizes, and the
    letterwise length agreement between tau and the original level 0.
    """
    if m_levels < 1:
        raise HypothesisError(f"need at least one tower level, got {m_levels}")
    prefix = min(dseq.declared_depth, properize_depth)
    cap = max(len(dseq.alphabet(n)) for n in range(prefix + 1))
    work, notes = _prepare_radius(dseq, code.radius, prefix)
    sigma0 = work.level(0)
    lx1 = _stable_language(work, 1, 3)
    tau = sliding_block_to_morphism(sigma0, code, lx1)
    tilde = _with_level0(work, tau, properize_depth)

    attempts = []
    tower = None
    push = None
    last_error = None
    base_depth = max(2, m_levels)
    for depth in range(base_depth, base_depth + 3):
        try:
            candidate = recognizable_tower(
                tilde,
                depth,
                properize_depth=properize_depth,
                budget=budget,
                max_horizon=max_horizon,
            )
            push = _push_through_tower(candidate, depth)
        except (HypothesisError, InsufficientDepthError) as exc:
            attempts.append({"tower_levels": depth, "error": str(exc)})
            last_error = exc
            continue
        attempts.append({"tower_levels": depth, "ok": True})
        tower = candidate
        break
    if push is None:
        raise HypothesisError(
            f"transport failed at tower depths {base_depth} through "
            f"{base_depth + 2}: {last_error}"
        )

    nus = list(push.nu_levels)
    for nu in nus:
        if len(nu.source) > cap:
            raise AssertionError(
                f"contract broken: pushed alphabet of size {len(nu.source)} "
                f"exceeds the original bound {cap}"
            )
    lengths = {}
    for a in sigma0.source:
        lengths[a] = len(sigma0.image(a))
        if len(tau.image(a)) != lengths[a]:
            raise AssertionError(
                f"contract broken: tau changed the image length of {a!r}"
            )
    certificates = {
        "code_radius": code.radius,
        "preparation": notes,
        "normalization": tower.normalization,
        "tower_levels": len(tower.tau) + 1,
        "tower_cuts": list(tower.cuts),
        "coding_alphabet_sizes": {n: len(tower.nu[n].source) for n in sorted(tower.nu)},
        "push_attempts": attempts,
        "pushed_alphabet_bounds": push.certificates["pushed_alphabet_bounds"],
        "nu_alphabet_sizes": [(len(nu.source), len(nu.target)) for nu in nus],
        "alphabet_cap": cap,
        "first_coordinate": {"agrees": True, "lengths": lengths},
        "recognizability": {
            n: entry.get("recognizability")
            for n, entry in tower.certificates["connecting"].items()
        },
    }
    return TransportedStructure(
        tau=tau,
        tower=tower,
        nu_sequence=DirectiveSequence(nus, max_depth=max(32, len(nus))),
        psi_levels=tuple(push.psi_levels),
        certificates=certificates,
    )


def coded_prefix(dseq, code, n, max_len=8, properize_depth=32):
    """Inputs for profiling the coded factor at level n: the coded
    sequence, its composed prefix down from level n, the stabilized
    level-n language table, and the preparation notes."""
    if n < 1:
        raise HypothesisError(f"need a positive level, got {n}")
    prefix_depth = min(dseq.declared_depth, properize_depth)
    work, notes = _prepare_radius(dseq, code.radius, prefix_depth)
    tau = sliding_block_to_morphism(work.level(0), code, _stable_language(work, 1, 3))
    tilde = _with_level0(work, tau, properize_depth)
    return tilde, tilde.compose_range(0, n), _stable_language(tilde, n, max_len), notes


def covering_symbol_profile(prefix, y_word, lxn):
    """Profile the fibers over one word by enumerating factorizations.

    A factorization anchors some image block of the prefix morphism
    over the start of y_word, at any offset inside that block, then
    extends rightward with blocks whose letter sequence stays
    consistent with lxn (every window of it up to the table's length
    must be a language word).  The left context beyond the anchor is
    unseen and free, so every way the word sits inside the generated
    system at this depth is found.  Anchors are independent of one
    another and the per-position symbol sets are merged order-free,
    so the profile does not depend on enumeration order.
    """
    if not isinstance(lxn, LanguageTable):
        raise HypothesisError("lxn must be a language table for the prefix source level")
    blocks = {a: prefix.image(a) for a in prefix.source}
    longest = max(len(b) for b in blocks.values())
    y = as_word(y_word)
    if len(y) < 2 * longest:
        raise HypothesisError(
            f"word of length {len(y)} is too short to profile: need at "
            f"least twice the longest image block ({2 * longest} letters)"
        )
    lang = lxn.words
    cap = lxn.max_len

    def consistent(xs):
        for n in range(1, min(len(xs), cap) + 1):
            if xs[-n:] not in lang:
                return False
        return True

    symbols = [set() for _ in range(len(y))]
    found = 0

    def note(xs, offset):
        pos = -offset
        for a in xs:
            for i in range(len(blocks[a])):
                where = pos + i
                if 0 <= where < len(y):
                    symbols[where].add((i, a))
            pos += len(blocks[a])

    def grow(xs, covered, offset):
        nonlocal found
        if covered >= len(y):
            note(xs, offset)
            found += 1
            return
        for b in prefix.source:
            block = blocks[b]
            take = min(len(block), len(y) - covered)
            if block[:take] != y[covered : covered + take]:
                continue
            extended = xs + (b,)
            if not consistent(extended):
                continue
            grow(extended, covered + len(block), offset)

    for a in prefix.source:
        if (a,) not in lang:
            continue
        block = blocks[a]
        for offset in range(len(block)):
            take = min(len(block) - offset, len(y))
            if block[offset : offset + take] != y[:take]:
                continue
            grow((a,), len(block) - offset, offset)

    if found == 0:
        raise HypothesisError("not in generated language at this depth")
    counts = tuple(len(s) for s in symbols)
    low = min(counts)
    return FiberProfile(
        window_len=len(y),
        per_position_symbols=tuple(frozenset(s) for s in symbols),
        per_position_counts=counts,
        min_count=low,
        argmin_position=counts.index(low),
    )


def sample_fiber_words(dseq, count, length, seed=0):
    """Deterministic sample of level-0 words of a given length.

    Windows are cut from letter expansions at the first depth where
    every letter expands past the requested length, with a seeded
    generator so reruns agree.
    """
    if count < 1:
        raise HypothesisError(f"need at least one word, got {count}")
    if length < 1:
        raise HypothesisError(f"need a positive length, got {length}")
    rng = random.Random(seed)
    expansions = None
    for depth in range(1, dseq.declared_depth + 1):
        expansions = [dseq.expand(0, depth, (a,)) for a in sorted(dseq.alphabet(depth))]
        if min(len(x) for x in expansions) >= length:
            break
    else:
        raise InsufficientDepthError(
            f"no level within depth {dseq.declared_depth} expands every "
            f"letter to {length} letters"
        )
    out = []
    for k in range(count):
        x = expansions[k % len(expansions)]
        start = rng.randrange(len(x) - length + 1)
        out.append(x[start : start + length])
    return out


def asymptotic_candidates(lx, m, side):
    """Pairs of (m+1)-words that witness one-sided closeness: equal
    except at the outermost position on the given side.

    side="right" pairs words equal on positions 2 through m+1, so the
    two share their length-m suffix and differ in the first letter;
    side="left" is the mirror image.  Candidates are read off one
    stabilized table and reported with its depth; no limit is claimed.
    """
    if side not in ("left", "right"):
        raise HypothesisError(f"side must be 'left' or 'right', got {side!r}")
    if m < 1:
        raise HypothesisError(f"window parameter must be at least 1, got {m}")
    if lx.max_len < m + 1:
        raise HypothesisError(
            f"language table holds words up to length {lx.max_len}, need {m + 1}"
        )
    if not lx.stabilized:
        raise InsufficientDepthError(
            f"language table at depth {lx.depth} has not stabilized; "
            f"candidate enumeration would be incomplete"
        )
    groups = {}
    for w in lx.of_length(m + 1):
        key = w[1:] if side == "right" else w[:-1]
        groups.setdefault(key, []).append(w)
    pairs = []
    for key in sorted(groups):
        members = sorted(groups[key])
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                pairs.append((members[i], members[j]))
    return tuple(sorted(pairs))


# ---------------------------------------------------------------------------
# plain-text format

def format_local_code(code):
    """Canonical text: radius header, then windows in sorted order."""
    lines = [f"radius: {code.radius}"]
    for w in sorted(code.table):
        lines.append(f"{format_word(w)} -> {code.table[w]}")
    return "\n".join(lines) + "\n"


def parse_local_code(text):
    """Parse a window table: a `radius: r` header, then `w -> c` rule
    lines; full-line # comments allowed."""
    radius = None
    table = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("radius:"):
            if radius is not None:
                raise FormatError(f"line {lineno}: duplicate radius header")
            rest = line[len("radius:") :].strip()
            if not rest.isdigit():
                raise FormatError(f"line {lineno}: radius must be a nonnegative integer")
            radius = int(rest)
            continue
        if "->" not in line:
            raise FormatError(f"line {lineno}: expected `window -> letter`")
        if radius is None:
            raise FormatError(f"line {lineno}: rule before the radius header")
        lhs, rhs = line.split("->", 1)
        try:
            w = parse_word(lhs)
        except FormatError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        if len(w) != 2 * radius + 1:
            raise FormatError(
                f"line {lineno}: window {format_word(w)} has {len(w)} "
                f"letters, radius {radius} needs {2 * radius + 1}"
            )
        value = rhs.split()
        if len(value) != 1:
            raise FormatError(f"line {lineno}: code value must be a single letter")
        if w in table:
            raise FormatError(f"line {lineno}: duplicate window {format_word(w)}")
        table[w] = value[0]
    if radius is None:
        raise FormatError("missing radius header")
    if not table:
        raise FormatError("no windows found")
    return LocalCode(radius, table)
