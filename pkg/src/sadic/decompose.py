"""Rank-lowering decompositions of morphisms.

Three constructions, each returning a verified Decomposition:

- lower_rank_aligned: a family with member-independent image lengths,
  plus a witness pair (u, v) whose images nest, factors through a
  strictly smaller alphabet.
- lower_rank_split: a single morphism whose witness images nest after
  an offset s factors through an alphabet that is no larger, with
  |p|_1 strictly below |sigma|_1.
- factorize_through: given phi(u) = tau(w) with tau hugely proper and
  w covering its alphabet, tau itself factors as p o q with q
  letter-onto and proper over at most #source(phi) letters.

All recursions from the underlying arguments are materialized as
reduction loops with explicit termination measures, and every output
is re-verified letterwise before it is returned.
"""

from bisect import bisect_right
from dataclasses import dataclass, field

from .errors import HypothesisError
from .morphism import (
    Morphism,
    as_word,
    classify,
    compose,
    compose_chain,
    covers_alphabet,
    elementary,
    metrics,
    peel,
    properness,
    restrict_source,
    reverse_morphism,
)


class AlignedFamily:
    """Morphisms sigma_j: A+ -> B_j+ with |sigma_j(a)| independent of j."""

    def __init__(self, morphisms):
        ms = tuple(morphisms)
        if not ms:
            raise HypothesisError("empty family")
        src = ms[0].source
        for j, m in enumerate(ms[1:], 1):
            if m.source != src:
                raise HypothesisError(f"family sources differ at member {j}")
        lengths = {a: len(ms[0].image(a)) for a in src}
        for j, m in enumerate(ms[1:], 1):
            for a in src:
                if len(m.image(a)) != lengths[a]:
                    raise HypothesisError(
                        f"image lengths not aligned at letter {a!r} (member {j})"
                    )
        self.morphisms = ms
        self.lengths = lengths

    @property
    def source(self):
        return self.morphisms[0].source

    def total_length(self):
        return sum(self.lengths.values())


@dataclass(frozen=True)
class Decomposition:
    """sigma_j = ps[j] o q for every member, checked on construction."""

    q: Morphism
    ps: tuple
    certificate: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.q, self.ps))


def _checked(q, ps, originals, extra=None):
    ps = tuple(ps)
    for j, (p, orig) in enumerate(zip(ps, originals)):
        if compose(p, q) != orig:
            raise AssertionError(f"recomposition check failed at member {j}")
    cert = {
        "recomposition": "exact",
        "q_letter_onto": classify(q, 0)["letter_onto"],
        "q_source_size": len(q.source),
        "q_target_size": len(q.target),
    }
    if extra:
        cert.update(extra)
    return Decomposition(q, ps, cert)


def _is_prefix(shorter, longer):
    return len(shorter) <= len(longer) and longer[: len(shorter)] == shorter


def _lcp_len(x, y):
    k = 0
    n = min(len(x), len(y))
    while k < n and x[k] == y[k]:
        k += 1
    return k


# ---------------------------------------------------------------------------
# aligned families

def lower_rank_aligned(fam, u, v, side="prefix"):
    """Factor an aligned family through a strictly smaller alphabet.

    Needs: u and v start (side="prefix") or end (side="suffix") with
    different letters, every sigma_j(u) is a prefix (resp. suffix) of
    sigma_j(v), and |u| is at least the summed image lengths.
    """
    if not isinstance(fam, AlignedFamily):
        fam = AlignedFamily(fam)
    u = as_word(u)
    v = as_word(v)
    if side == "suffix":
        rev = AlignedFamily([reverse_morphism(m) for m in fam.morphisms])
        dec = _aligned_prefix(rev, u[::-1], v[::-1], flavor="suffix")
        q = reverse_morphism(dec.q)
        ps = [reverse_morphism(p) for p in dec.ps]
        return _checked(q, ps, fam.morphisms, {"alphabet_drop": dec.certificate["alphabet_drop"]})
    if side != "prefix":
        raise ValueError(f"unknown side: {side!r}")
    return _aligned_prefix(fam, u, v, flavor="prefix")


def _aligned_prefix(fam, u, v, flavor):
    start, rel = ("start", "prefix") if flavor == "prefix" else ("end", "suffix")
    src = set(fam.source)
    if not u or not v:
        raise HypothesisError("witness words must be nonempty")
    for x in u + v:
        if x not in src:
            raise HypothesisError(f"witness letter not in the family alphabet: {x!r}")
    if u[0] == v[0]:
        raise HypothesisError(f"leading letters: u and v {start} with the same letter")
    total = fam.total_length()
    if len(u) < total:
        raise HypothesisError(
            f"witness length: |u| = {len(u)} < {total} = total aligned image length"
        )
    for j, m in enumerate(fam.morphisms):
        if not _is_prefix(m(u), m(v)):
            raise HypothesisError(
                f"nesting: sigma_{j}(u) is not a {rel} of sigma_{j}(v)"
            )

    ms = list(fam.morphisms)
    originals = fam.morphisms
    lengths = dict(fam.lengths)
    peels = []
    for _ in range(total):
        for m in ms:
            if not _is_prefix(m(u), m(v)):
                raise AssertionError("invariant broken: nesting lost during reduction")
        a, b = u[0], v[0]
        la, lb = lengths[a], lengths[b]
        if la == lb:
            for j, m in enumerate(ms):
                if m.image(a) != m.image(b):
                    raise AssertionError(
                        f"invariant broken: equal-length images differ at member {j}"
                    )
            e = elementary("erase", ms[0].source, a, b)
            primes = [restrict_source(m, e.target) for m in ms]
            q = compose_chain([e] + peels[::-1]) if peels else e
            if len(q.target) >= len(q.source):
                raise AssertionError("contract broken: alphabet did not shrink")
            return _checked(
                q,
                primes,
                originals,
                {"alphabet_drop": (len(q.source), len(q.target))},
            )
        if la < lb:
            stepped = [peel(m, "prefix", a, b) for m in ms]
            e = stepped[0][1]
            ms = [pr for pr, _ in stepped]
            lengths[b] = lb - la
            u, v = e(u[1:]), (b,) + e(v[1:])
        else:
            stepped = [peel(m, "prefix", b, a) for m in ms]
            e = stepped[0][1]
            ms = [pr for pr, _ in stepped]
            lengths[a] = la - lb
            u, v = (a,) + e(u[1:]), e(v[1:])
        peels.append(e)
        if not u or not v:
            raise AssertionError("invariant broken: witness emptied during reduction")
    raise AssertionError("reduction exceeded its termination measure")


# ---------------------------------------------------------------------------
# single morphism, offset witness

def lower_rank_split(sigma, u, v, s_len, side="prefix"):
    """Factor sigma = p o q with #target(q) <= #source and |p|_1 < |sigma|_1.

    Prefix side: with a, b the first letters of u, v, the image
    sigma(a) = s t splits at s_len with t nonempty, sigma(u) is a
    prefix of s * sigma(v), |u| >= |sigma|_1 + |s|, and s may be empty
    only when a != b. Suffix side is the mirror image (s and t swap
    roles; s_len still counts |s| inside sigma(a) = s t).
    """
    u = as_word(u)
    v = as_word(v)
    if side == "suffix":
        if not u:
            raise HypothesisError("witness words must be nonempty")
        a = u[-1]
        img_len = len(sigma.image(a))
        if not 0 <= s_len <= img_len:
            raise HypothesisError(f"split length outside image of {a!r}")
        dec = _split_prefix(reverse_morphism(sigma), u[::-1], v[::-1], img_len - s_len)
        q = reverse_morphism(dec.q)
        p = reverse_morphism(dec.ps[0])
        return _checked(q, [p], [sigma], {"p_total_len": dec.certificate["p_total_len"]})
    if side != "prefix":
        raise ValueError(f"unknown side: {side!r}")
    return _split_prefix(sigma, u, v, s_len)


def _split_prefix(sigma, u, v, s_len):
    if not u or not v:
        raise HypothesisError("witness words must be nonempty")
    src = set(sigma.source)
    for x in u + v:
        if x not in src:
            raise HypothesisError(f"witness letter not in the source alphabet: {x!r}")
    a, b = u[0], v[0]
    img_a = sigma.image(a)
    if not 0 <= s_len < len(img_a):
        raise HypothesisError(
            f"split length: need 0 <= s_len < |sigma({a!r})| so the tail stays nonempty"
        )
    if s_len == 0 and a == b:
        raise HypothesisError("degenerate split: empty s requires distinct leading letters")
    s = img_a[:s_len]
    total1 = metrics(sigma)["total_len"]
    if len(u) < total1 + s_len:
        raise HypothesisError(
            f"witness length: |u| = {len(u)} < {total1 + s_len} = |sigma|_1 + |s|"
        )
    if not _is_prefix(sigma(u), s + sigma(v)):
        raise HypothesisError("nesting: sigma(u) is not a prefix of s * sigma(v)")

    if s_len == 0:
        sub = lower_rank_aligned([sigma], u, v)
        q, p = sub.q, sub.ps[0]
    else:
        prime, e = peel(sigma, "interior", a, s_len=s_len)
        sub = lower_rank_aligned([prime], (a,) + e(u[1:]), e(v))
        q = compose(sub.q, e)
        p = sub.ps[0]

    p_total = metrics(p)["total_len"]
    if p_total >= total1:
        raise AssertionError("contract broken: |p|_1 did not decrease")
    if len(q.target) > len(sigma.source):
        raise AssertionError("contract broken: alphabet grew")
    return _checked(q, [p], [sigma], {"p_total_len": p_total, "sigma_total_len": total1})


# ---------------------------------------------------------------------------
# factoring tau through phi

def factorize_through(phi, tau, u, w, require_margin=True):
    """Given phi(u) = tau(w), factor tau = p o q with q letter-onto,
    proper, over at most #source(phi) letters.

    The properness precondition ell >= |phi|_1^4 is enforced unless
    require_margin is False, in which case the reduction loop runs on
    the measured properness and fails with a named error if a witness
    comes up short.
    """
    u = as_word(u)
    w = as_word(w)
    if phi.target != tau.target:
        raise HypothesisError("targets differ: phi and tau must map into the same alphabet")
    ell = properness(tau)
    need = metrics(phi)["total_len"] ** 4
    if require_margin and ell < need:
        raise HypothesisError(
            f"properness margin: tau is {ell}-proper, need >= |phi|_1^4 = {need}"
        )
    if not covers_alphabet(w, tau.source):
        raise HypothesisError("covering witness: w does not contain every tau-source letter")
    if not w or not u:
        raise HypothesisError("witness words must be nonempty")
    if phi(u) != tau(w):
        raise HypothesisError("witness equation: phi(u) != tau(w)")
    orig_source_size = len(phi.source)

    if len(tau.source) == 1:
        # one source letter: its image, spelled over its own letters,
        # is already the decomposition
        b0 = tau.source[0]
        img = tau.image(b0)
        inner = []
        seen = set()
        for x in img:
            if x not in seen:
                seen.add(x)
                inner.append(x)
        inner = tuple(inner)
        q = Morphism({b0: img}, source=tau.source, target=inner)
        p = Morphism({d: (d,) for d in inner}, source=inner, target=tau.target)
        return _checked(
            q,
            [p],
            [tau],
            {
                "q_proper": classify(q, 1)["proper"],
                "inner_alphabet_size": len(inner),
                "phi_source_size": len(phi.source),
                "path": "single-source",
            },
        )

    guard = metrics(phi)["total_len"]
    for _ in range(guard + 1):
        trigger = _find_misalignment(phi, u, tau, w)
        if trigger is None:
            break
        phi, u = _reduce(phi, u, tau, w, trigger)
    else:
        raise AssertionError("reduction loop exceeded its termination measure")

    # assembly: cuts are aligned and anchored; read each q(b) off the
    # first occurrence of b in w
    q_len = [len(phi.image(x)) for x in u]
    starts = [0]
    for n in q_len:
        starts.append(starts[-1] + n)
    block_at = {pos: j for j, pos in enumerate(starts)}
    cut = 0
    cut_block = [0]
    for b in w:
        cut += len(tau.image(b))
        if cut not in block_at:
            raise AssertionError("contract broken: unaligned cut survived the reduction loop")
        cut_block.append(block_at[cut])
    rules = {}
    for k, b in enumerate(w):
        if b not in rules:
            rules[b] = u[cut_block[k] : cut_block[k + 1]]
    order = [b for b in tau.source if b in rules]
    used = []
    seen = set()
    for b in order:
        for x in rules[b]:
            if x not in seen:
                seen.add(x)
                used.append(x)
    sub_alpha = tuple(x for x in phi.source if x in seen)
    q = Morphism({b: rules[b] for b in order}, source=tuple(order), target=sub_alpha)
    p = restrict_source(phi, sub_alpha)
    flags = classify(q, 1)
    if not flags["proper"]:
        raise AssertionError("contract broken: q is not proper after anchoring")
    if len(sub_alpha) > orig_source_size:
        raise AssertionError("contract broken: inner alphabet outgrew phi's source")
    return _checked(
        q,
        [p],
        [tau],
        {
            "q_proper": True,
            "inner_alphabet_size": len(sub_alpha),
            "phi_source_size": orig_source_size,
        },
    )


def _find_misalignment(phi, u, tau, w):
    """Lowest tau-cut that is unaligned or mis-anchored, or None."""
    starts = [0]
    for x in u:
        starts.append(starts[-1] + len(phi.image(x)))
    first, last = u[0], u[-1]
    pos = 0
    for k in range(1, len(w)):
        pos += len(tau.image(w[k - 1]))
        j = bisect_right(starts, pos) - 1
        off = pos - starts[j]
        if off > 0:
            return ("split", k, j, off)
        if u[j] != first:
            return ("head-anchor", k, j)
        if u[j - 1] != last:
            return ("tail-anchor", k, j)
    return None


def _take_prefix_blocks(phi, word, budget):
    """Longest prefix of word whose phi-image stays within budget."""
    out = 0
    used = 0
    for x in word:
        used += len(phi.image(x))
        if used > budget:
            break
        out += 1
    return word[:out]


def _reduce(phi, u, tau, w, trigger):
    kind, k, j = trigger[0], trigger[1], trigger[2]
    total1 = metrics(phi)["total_len"]
    if kind == "split":
        s_len = trigger[3]
        agree = _lcp_len(tau(w[k:]), phi(u))
        wit = _take_prefix_blocks(phi, u[j:], s_len + agree)
        if len(wit) < total1 + s_len:
            raise HypothesisError(
                f"reduction witness too short at cut {k}: {len(wit)} letters available, "
                f"{total1 + s_len} needed (tau properness insufficient)"
            )
        dec = lower_rank_split(phi, wit, u, s_len)
    elif kind == "head-anchor":
        agree = _lcp_len(tau(w[k:]), phi(u))
        wit = _take_prefix_blocks(phi, u[j:], agree)
        if len(wit) < total1:
            raise HypothesisError(
                f"reduction witness too short at cut {k}: {len(wit)} letters available, "
                f"{total1} needed (tau properness insufficient)"
            )
        dec = lower_rank_split(phi, wit, u, 0)
    else:
        rev_agree = _lcp_len(tau(w[:k])[::-1], phi(u)[::-1])
        head = u[:j]
        wit = _take_prefix_blocks(
            reverse_morphism(phi), head[::-1], rev_agree
        )[::-1]
        if len(wit) < total1:
            raise HypothesisError(
                f"reduction witness too short at cut {k}: {len(wit)} letters available, "
                f"{total1} needed (tau properness insufficient)"
            )
        a = wit[-1]
        dec = lower_rank_split(phi, wit, u, len(phi.image(a)), side="suffix")
    new_phi = dec.ps[0]
    if metrics(new_phi)["total_len"] >= total1:
        raise AssertionError("contract broken: reduction did not shrink |phi|_1")
    return new_phi, dec.q(u)


# ---------------------------------------------------------------------------
# sequence-level pushthrough

@dataclass(frozen=True)
class PushedStructure:
    nu_levels: tuple
    psi_levels: tuple
    certificates: dict

    def __iter__(self):
        return iter((self.nu_levels, self.psi_levels))


def push_rank_through(
    sigma_levels, tau_levels, phi_levels, require_margin=True, level0=None
):
    """Transport a factor of directive-sequence prefixes to a smaller-
    alphabet equivalent: factorize each tau_n through phi_n, then set
    nu_0 = p_0, nu_n = q_n p_n, psi_0 = phi_0, psi_n = q_n phi_n.

    Inputs must satisfy phi_0 = tau_0 o phi_1 and
    phi_n o sigma_{n-1} = tau_n o phi_{n+1} exactly (one sigma fewer
    than taus, one phi more).

    level0, when given, is a triple (phi_star, u, w): tau_0 is
    factorized through phi_star with that witness instead of through
    phi_0 with a synthesized one.  phi_0 = tau_0 o phi_1 makes |phi_0|_1
    scale with |tau_0|_1, so its properness demand can exceed what any
    tau_0 offers; a caller holding a smaller morphism with an exact
    witness routes around that.  The identity nu_0 psi_1 = psi_0 only
    uses p_0 q_1 = tau_0, so every postcondition is still checked.
    """
    sigmas = list(sigma_levels)
    taus = list(tau_levels)
    phis = list(phi_levels)
    if len(phis) != len(taus) + 1:
        raise HypothesisError("level counts: need exactly one more phi than tau")
    if len(sigmas) != len(taus) - 1:
        raise HypothesisError("level counts: need exactly one fewer sigma than tau")
    try:
        ok = compose(taus[0], phis[1]) == phis[0]
    except HypothesisError as exc:
        raise HypothesisError(f"commutation failure at level 0: {exc}") from None
    if not ok:
        raise HypothesisError("commutation failure at level 0: phi_0 != tau_0 o phi_1")
    for n in range(1, len(taus)):
        try:
            ok = compose(phis[n], sigmas[n - 1]) == compose(taus[n], phis[n + 1])
        except HypothesisError as exc:
            raise HypothesisError(f"commutation failure at level {n}: {exc}") from None
        if not ok:
            raise HypothesisError(
                f"commutation failure at level {n}: "
                f"phi_{n} o sigma_{n} != tau_{n} o phi_{n + 1}"
            )
    for n, m in enumerate(phis):
        if not classify(m, 0)["letter_onto"]:
            raise HypothesisError(f"phi_{n} is not letter-onto")
    for n, m in enumerate(taus):
        if not classify(m, 0)["letter_onto"]:
            raise HypothesisError(f"tau_{n} is not letter-onto")
    if level0 is not None:
        star, u0, w0 = level0
        flags = classify(star, 1)
        if not flags["letter_onto"]:
            raise HypothesisError("level0 witness: phi_star is not letter-onto")
        if not flags["proper"]:
            raise HypothesisError("level0 witness: phi_star is not proper")

    qs = {}
    ps = {}
    caps = {}
    for n in range(len(taus)):
        if n == 0 and level0 is not None:
            try:
                dec = factorize_through(
                    star, taus[0], u0, w0, require_margin=require_margin
                )
            except HypothesisError as exc:
                raise HypothesisError(f"level 0: {exc}") from None
            caps[0] = len(star.source)
        else:
            dec = _factorize_level(sigmas, taus, phis, n, require_margin)
            caps[n] = len(phis[n].source)
        qs[n + 1] = dec.q
        ps[n] = dec.ps[0]

    nus = [ps[0]]
    for n in range(1, len(taus)):
        nus.append(compose(qs[n], ps[n]))
    psis = [phis[0]]
    for n in range(1, len(phis)):
        psis.append(compose(qs[n], phis[n]))

    if compose(nus[0], psis[1]) != psis[0]:
        raise AssertionError("postcondition failed: nu_0 o psi_1 != psi_0")
    for n in range(1, len(taus)):
        if compose(psis[n], sigmas[n - 1]) != compose(nus[n], psis[n + 1]):
            raise AssertionError(f"postcondition failed at level {n}")
    cert = {"levels": len(nus), "alphabet_sizes": [], "proper": [], "letter_onto": []}
    for n, nu in enumerate(nus):
        flags = classify(nu, 1)
        cert["alphabet_sizes"].append((len(nu.source), len(nu.target)))
        cert["proper"].append(flags["proper"])
        cert["letter_onto"].append(flags["letter_onto"])
        if not flags["letter_onto"]:
            raise AssertionError(f"postcondition failed: nu_{n} not letter-onto")
        if not flags["proper"]:
            raise AssertionError(f"postcondition failed: nu_{n} not proper")
    bounds = []
    for n in range(len(taus)):
        got = len(qs[n + 1].target)
        bounds.append((got, caps[n]))
        if got > caps[n]:
            raise AssertionError(f"postcondition failed: pushed alphabet exceeds bound at level {n}")
    cert["pushed_alphabet_bounds"] = bounds
    cert["level0_supplied"] = level0 is not None
    return PushedStructure(tuple(nus), tuple(psis), cert)


def _factorize_level(sigmas, taus, phis, n, require_margin):
    base = phis[n + 1].source
    last_err = None
    for repeat in (1, 2, 4, 8, 16, 32):
        x = tuple(base) * repeat
        w = phis[n + 1](x)
        u = x if n == 0 else sigmas[n - 1](x)
        try:
            return factorize_through(phis[n], taus[n], u, w, require_margin=require_margin)
        except HypothesisError as exc:
            last_err = exc
            if "witness too short" not in str(exc) and "witness length" not in str(exc):
                raise HypothesisError(f"level {n}: {exc}") from None
    raise HypothesisError(f"level {n}: {last_err}") from None
