"""Free-semigroup morphisms: the value type, metrics, classification
flags, elementary morphisms, single-step peel decompositions, and the
shared plain-text format.

Letters are opaque str tokens. Words are tuples of letters; `apply`
also accepts str words (each character one letter) and returns tuples.
Images are always nonempty: these are morphisms A+ -> B+.
"""

from .errors import FormatError, HypothesisError


def as_word(w):
    """Normalize str or iterable-of-letters to a tuple word."""
    if isinstance(w, tuple):
        return w
    if isinstance(w, str):
        return tuple(w)
    return tuple(w)


def covers_alphabet(word, letters):
    """True when every letter of the alphabet occurs in the word."""
    return set(letters) <= set(word)


def fresh_letter(base, used):
    """Smallest unused decorated name base~1, base~2, ..."""
    k = 1
    while f"{base}~{k}" in used:
        k += 1
    return f"{base}~{k}"


class Morphism:
    """Total map letter -> nonempty word, extended by concatenation.

    source and target are ordered alphabets (tuples of distinct
    letters). The target may declare letters no image uses; the source
    is exactly the set of rule keys.
    """

    __slots__ = ("source", "target", "_images")

    def __init__(self, rules, source=None, target=None):
        images = {a: as_word(w) for a, w in rules.items()}
        if not images:
            raise ValueError("no rules")
        if source is None:
            source = tuple(images)
        else:
            source = tuple(source)
            if set(source) != set(images) or len(source) != len(images):
                raise ValueError("source alphabet does not match rule keys")
        for a, w in images.items():
            if not w:
                raise ValueError(f"empty image for letter {a!r}")
        used = []
        seen = set()
        for a in source:
            for x in images[a]:
                if x not in seen:
                    seen.add(x)
                    used.append(x)
        if target is None:
            target = tuple(used)
        else:
            target = tuple(target)
            if len(set(target)) != len(target):
                raise ValueError("duplicate target letters")
            if not seen <= set(target):
                stray = sorted(seen - set(target))
                raise ValueError(f"image letters outside target: {stray}")
        self.source = source
        self.target = target
        self._images = images

    def image(self, a):
        try:
            return self._images[a]
        except KeyError:
            raise HypothesisError(f"letter not in source alphabet: {a!r}") from None

    def rules(self):
        """Images in source order, as a fresh dict."""
        return {a: self._images[a] for a in self.source}

    def __call__(self, w):
        out = []
        for a in as_word(w):
            out.extend(self.image(a))
        return tuple(out)

    def __eq__(self, other):
        if not isinstance(other, Morphism):
            return NotImplemented
        return (
            self.source == other.source
            and self.target == other.target
            and self._images == other._images
        )

    def __hash__(self):
        return hash((self.source, self.target, tuple(self._images[a] for a in self.source)))

    def __repr__(self):
        body = ", ".join(f"{a}->{''.join(self._images[a])}" for a in self.source)
        return f"Morphism({body})"


def apply(m, w):
    return m(w)


def identity(alphabet):
    letters = tuple(alphabet)
    return Morphism({a: (a,) for a in letters}, source=letters, target=letters)


def compose(outer, inner):
    """outer o inner: apply inner first. Targets/sources must match."""
    if inner.target != outer.source:
        raise HypothesisError(
            f"alphabet mismatch: inner target {inner.target} != outer source {outer.source}"
        )
    rules = {a: outer(inner.image(a)) for a in inner.source}
    return Morphism(rules, source=inner.source, target=outer.target)


def compose_chain(morphisms):
    """compose([m0, m1, m2]) = m0 o m1 o m2 (m2 applied first)."""
    ms = list(morphisms)
    if not ms:
        raise ValueError("empty composition")
    out = ms[0]
    for m in ms[1:]:
        out = compose(out, m)
    return out


def metrics(m):
    lens = [len(m.image(a)) for a in m.source]
    return {"min_len": min(lens), "max_len": max(lens), "total_len": sum(lens)}


def _common_prefix_len(words):
    out = min(len(w) for w in words)
    first = words[0]
    for w in words[1:]:
        k = 0
        while k < out and w[k] == first[k]:
            k += 1
        out = min(out, k)
    return out


def common_prefix_len(m):
    return _common_prefix_len([m.image(a) for a in m.source])


def common_suffix_len(m):
    return _common_prefix_len([m.image(a)[::-1] for a in m.source])


def properness(m):
    """Largest r such that the morphism is r-proper."""
    return min(common_prefix_len(m), common_suffix_len(m))


def classify(m, r):
    """Flags {r_proper, proper, letter_onto, positive}; r = 0 is trivially r-proper."""
    if r < 0:
        raise ValueError("negative radius")
    images = [m.image(a) for a in m.source]
    prop = properness(m)
    occurring = set()
    for w in images:
        occurring.update(w)
    return {
        "r_proper": prop >= r,
        "proper": prop >= 1,
        "letter_onto": set(m.target) <= occurring,
        "positive": all(set(m.target) <= set(w) for w in images),
    }


def restrict_source(m, letters):
    """Drop source letters outside `letters`, keeping source order."""
    kept = tuple(a for a in m.source if a in set(letters))
    if not kept:
        raise HypothesisError("restriction empties the source alphabet")
    return Morphism({a: m.image(a) for a in kept}, source=kept, target=m.target)


def elementary(kind, alphabet, a, b=None, fresh=None):
    """The three letter-onto elementary morphisms.

    erase(a,b): b -> a, others fixed; the target drops b.
    cut(a,b):   b -> ab, others fixed; same alphabet.
    split(a):   a -> ~a a, others fixed; the target gains the fresh
                letter, inserted immediately before a.
    """
    letters = tuple(alphabet)
    present = set(letters)
    if a not in present:
        raise HypothesisError(f"letter not in alphabet: {a!r}")
    if kind == "erase":
        if b not in present:
            raise HypothesisError(f"letter not in alphabet: {b!r}")
        if a == b:
            raise HypothesisError("erase needs two distinct letters")
        target = tuple(x for x in letters if x != b)
        rules = {x: (a,) if x == b else (x,) for x in letters}
        return Morphism(rules, source=letters, target=target)
    if kind == "cut":
        if b not in present:
            raise HypothesisError(f"letter not in alphabet: {b!r}")
        if a == b:
            raise HypothesisError("cut needs two distinct letters")
        rules = {x: (a, b) if x == b else (x,) for x in letters}
        return Morphism(rules, source=letters, target=letters)
    if kind == "split":
        if fresh is None:
            fresh = fresh_letter(a, present)
        if fresh in present:
            raise HypothesisError(f"fresh letter already present: {fresh!r}")
        target = []
        for x in letters:
            if x == a:
                target.append(fresh)
            target.append(x)
        rules = {x: (fresh, a) if x == a else (x,) for x in letters}
        return Morphism(rules, source=letters, target=tuple(target))
    raise ValueError(f"unknown elementary kind: {kind!r}")


def peel(sigma, case, a, b=None, s_len=None):
    """One decomposition step sigma = sigma' o e with e elementary.

    case "equal":    needs sigma(a) == sigma(b), a != b; e = erase(a,b).
    case "prefix":   needs sigma(a) a strict prefix of sigma(b); e = cut(a,b).
    case "interior": needs sigma(a) = s t with |s| = s_len, both nonempty;
                     e = split(a).
    Returns (sigma', e); compose(sigma', e) == sigma letterwise.
    """
    if case == "equal":
        if a == b:
            raise HypothesisError("equal case needs two distinct letters")
        if sigma.image(a) != sigma.image(b):
            raise HypothesisError(f"images not equal: {a!r}, {b!r}")
        e = elementary("erase", sigma.source, a, b)
        prime = restrict_source(sigma, e.target)
        return prime, e
    if case == "prefix":
        wa, wb = sigma.image(a), sigma.image(b)
        if a == b or len(wa) >= len(wb) or wb[: len(wa)] != wa:
            raise HypothesisError(f"image of {a!r} is not a strict prefix of image of {b!r}")
        rules = sigma.rules()
        rules[b] = wb[len(wa):]
        prime = Morphism(rules, source=sigma.source, target=sigma.target)
        e = elementary("cut", sigma.source, a, b)
        return prime, e
    if case == "interior":
        wa = sigma.image(a)
        if s_len is None or not 1 <= s_len < len(wa):
            raise HypothesisError(f"split point not interior to image of {a!r}")
        e = elementary("split", sigma.source, a)
        fresh = e.target[e.target.index(a) - 1]
        rules = {}
        for x in e.target:
            if x == fresh:
                rules[x] = wa[:s_len]
            elif x == a:
                rules[x] = wa[s_len:]
            else:
                rules[x] = sigma.image(x)
        prime = Morphism(rules, source=e.target, target=sigma.target)
        return prime, e
    raise ValueError(f"unknown peel case: {case!r}")


def reverse_morphism(m):
    """Reverse every image; rev(p o q) = rev(p) o rev(q)."""
    return Morphism(
        {a: m.image(a)[::-1] for a in m.source}, source=m.source, target=m.target
    )


# ---------------------------------------------------------------------------
# plain-text format

def format_word(w):
    """Single token per letter, space-joined unless all single-char."""
    w = as_word(w)
    if all(len(x) == 1 for x in w):
        return "".join(w)
    return " ".join(w)


def parse_word(text, alphabet=None):
    """Inverse of format_word. With an alphabet, validates membership
    and accepts unspaced spellings only when all letters are single-char."""
    text = text.strip()
    if not text:
        raise FormatError("empty word")
    letters = tuple(text.split()) if " " in text or "\t" in text else tuple(text)
    if alphabet is not None:
        allowed = set(alphabet)
        if not set(letters) <= allowed:
            if " " not in text and not all(len(a) == 1 for a in alphabet):
                raise FormatError(
                    f"word {text!r} needs space-separated letters over this alphabet"
                )
            stray = next(x for x in letters if x not in allowed)
            raise FormatError(f"letter not in alphabet: {stray!r}")
    return letters


def format_morphism(m):
    """Canonical text: rules in source order; a target header only when
    the declared target differs from the letters the images use."""
    lines = []
    inferred = Morphism(m.rules(), source=m.source)
    if m.target != inferred.target:
        lines.append("target: " + " ".join(m.target))
    for a in m.source:
        lines.append(f"{a} -> " + " ".join(m.image(a)))
    return "\n".join(lines) + "\n"


def parse_morphism(text):
    """Parse the shared format: `a -> x y` rule lines, full-line #
    comments, optional `source:` / `target:` headers."""
    rules = {}
    order = []
    source_decl = None
    target_decl = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("source:"):
            if source_decl is not None:
                raise FormatError(f"line {lineno}: duplicate source header")
            source_decl = tuple(line[len("source:"):].split())
            continue
        if line.startswith("target:"):
            if target_decl is not None:
                raise FormatError(f"line {lineno}: duplicate target header")
            target_decl = tuple(line[len("target:"):].split())
            continue
        if "->" not in line:
            raise FormatError(f"line {lineno}: expected `letter -> letters`")
        lhs, rhs = line.split("->", 1)
        lhs = lhs.strip()
        if not lhs or " " in lhs:
            raise FormatError(f"line {lineno}: rule needs a single source letter")
        if lhs in rules:
            raise FormatError(f"line {lineno}: duplicate rule for {lhs!r}")
        image = tuple(rhs.split())
        if not image:
            raise FormatError(f"line {lineno}: empty image for {lhs!r} (images must be nonempty)")
        rules[lhs] = image
        order.append(lhs)
    if not rules:
        raise FormatError("no rules found")
    if source_decl is not None and (set(source_decl) != set(order) or len(source_decl) != len(order)):
        raise FormatError("source header does not match rule keys")
    try:
        return Morphism(rules, source=source_decl or tuple(order), target=target_decl)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


# ---------------------------------------------------------------------------
# dense single-char encoding for fast scanning

class TokenCodec:
    """Bijection letters <-> printable chars, for C-speed str scanning.

    Encoded morphism application uses str.translate, so deep expansions
    run at native speed regardless of token length.
    """

    def __init__(self, letters):
        self.letters = tuple(letters)
        if len(self.letters) > 90:
            raise HypothesisError("alphabet too large to encode (max 90 letters)")
        self._char = {a: chr(33 + i) for i, a in enumerate(self.letters)}
        self._letter = {chr(33 + i): a for i, a in enumerate(self.letters)}

    def char(self, letter):
        return self._char[letter]

    def encode(self, word):
        return "".join(self._char[a] for a in as_word(word))

    def decode(self, s):
        return tuple(self._letter[c] for c in s)

    def translate_table(self, m, target_codec):
        """str.translate table applying m to words encoded by self;
        images come out encoded by target_codec."""
        return {
            ord(self._char[a]): target_codec.encode(m.image(a)) for a in m.source
        }
