import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from sadic.errors import FormatError, HypothesisError, InsufficientDepthError
from sadic.factors import (
    FiberProfile,
    LocalCode,
    asymptotic_candidates,
    covering_symbol_profile,
    format_local_code,
    parse_local_code,
    sample_fiber_words,
    sliding_block_to_morphism,
    transported_structure,
)
from sadic.language import DirectiveSequence, level_language, load_corpus
from sadic.morphism import Morphism, classify, compose, properness
from oracles import (
    oracle_asymptotic_pairs,
    oracle_covering_symbols,
    oracle_interior_code,
)

AB = tuple("ab")
WINDOWS3 = [(x, y, z) for x in "ab" for y in "ab" for z in "ab"]

# majority vote over the window; a wins ties
MAJORITY = LocalCode(1, {w: ("a" if w.count("a") >= 2 else "b") for w in WINDOWS3})

# square of the rotation conjugate of the golden-mean substitution,
# 4-proper, and its single-step form, which is only 1-proper
ROT2 = Morphism({"a": tuple("babaabaa"), "b": tuple("babaa")}, target=AB)
ROT = Morphism({"a": tuple("baa"), "b": tuple("ba")}, target=AB)

seeds = st.integers(0, 10**9)


def stable_table(dseq, level, max_len):
    for depth in range(level + 1, 64):
        t = level_language(dseq, level, max_len, depth)
        if t.stabilized:
            return t
    raise AssertionError("table never stabilized")


def stationary(m):
    return DirectiveSequence([m], repeat="stationary")


# ---------------------------------------------------------------------------
# local codes

def test_relabeling_code():
    code = LocalCode.relabeling({"a": "0", "b": "1"})
    assert code.radius == 0
    assert code.window_len == 1
    assert code.letters == ("0", "1")
    assert code.apply(("a",)) == "0"
    assert code.scan(tuple("abba")) == ("0", "1", "1", "0")


def test_majority_code_windows():
    assert MAJORITY.window_len == 3
    assert MAJORITY.apply(tuple("aab")) == "a"
    assert MAJORITY.apply(tuple("bab")) == "b"
    assert MAJORITY.scan(tuple("aabb")) == ("a", "b")


def test_missing_window_is_named():
    code = LocalCode(1, {("a", "a", "a"): "a"})
    with pytest.raises(HypothesisError, match="no entry for window aab"):
        code.apply(tuple("aab"))


def test_window_length_is_checked():
    with pytest.raises(HypothesisError, match="radius 1 needs 3"):
        LocalCode(1, {("a", "a"): "a"})
    with pytest.raises(HypothesisError, match="radius 0 needs 1"):
        MAJORITY and LocalCode(0, {("a", "b"): "a"})
    with pytest.raises(HypothesisError, match="radius 1 needs 3"):
        MAJORITY.apply(tuple("aaaa"))


def test_scan_needs_one_window():
    with pytest.raises(HypothesisError, match="shorter than one window"):
        MAJORITY.scan(tuple("ab"))


def test_code_value_must_be_a_letter():
    with pytest.raises(HypothesisError, match="single letter"):
        LocalCode(0, {("a",): "x y"})
    with pytest.raises(HypothesisError, match="single letter"):
        LocalCode(0, {("a",): ("x",)})


def test_code_rejects_negative_radius_and_empty_table():
    with pytest.raises(HypothesisError, match="nonnegative"):
        LocalCode(-1, {})
    with pytest.raises(HypothesisError, match="at least one window"):
        LocalCode(0, {})


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_scan_matches_interior_oracle(seed):
    rng = random.Random(seed)
    text = "".join(rng.choice("ab") for _ in range(rng.randint(3, 40)))
    table = {"".join(w): MAJORITY.table[w] for w in WINDOWS3}
    assert "".join(MAJORITY.scan(tuple(text))) == oracle_interior_code(text, 1, table)


# ---------------------------------------------------------------------------
# code text format

def test_local_code_roundtrip():
    text = format_local_code(MAJORITY)
    assert text.splitlines()[0] == "radius: 1"
    assert parse_local_code(text) == MAJORITY


def test_parse_local_code_comments_and_spacing():
    code = parse_local_code("# majority-ish\nradius: 0\n\na -> x\nb -> y\n")
    assert code.radius == 0
    assert code.apply(("b",)) == "y"
    spaced = parse_local_code("radius: 1\na a b -> c\n")
    assert spaced.apply(tuple("aab")) == "c"


def test_parse_local_code_errors():
    with pytest.raises(FormatError, match="missing radius header"):
        parse_local_code("# nothing\n")
    with pytest.raises(FormatError, match="line 1: rule before the radius"):
        parse_local_code("a -> b\nradius: 0\n")
    with pytest.raises(FormatError, match="line 1: radius must be"):
        parse_local_code("radius: -2\n")
    with pytest.raises(FormatError, match="line 2: expected"):
        parse_local_code("radius: 0\njunk\n")
    with pytest.raises(FormatError, match="line 3: duplicate window aaa"):
        parse_local_code("radius: 1\naaa -> a\naaa -> b\n")
    with pytest.raises(FormatError, match="line 2: window ab has 2"):
        parse_local_code("radius: 1\nab -> a\n")
    with pytest.raises(FormatError, match="line 2: code value"):
        parse_local_code("radius: 0\na -> b c\n")
    with pytest.raises(FormatError, match="no windows"):
        parse_local_code("radius: 0\n")


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_format_roundtrip_random_tables(seed):
    rng = random.Random(seed)
    code = LocalCode(1, {w: rng.choice("xyz") for w in WINDOWS3})
    assert parse_local_code(format_local_code(code)) == code


# ---------------------------------------------------------------------------
# sliding-block conversion

def test_relabeling_on_fibonacci():
    fib = load_corpus("fibonacci")
    code = LocalCode.relabeling({"a": "0", "b": "1"})
    tau = sliding_block_to_morphism(fib.level(0), code, stable_table(fib, 1, 3))
    assert tau.image("a") == ("0", "1")
    assert tau.image("b") == ("0",)
    # a radius-0 code can merge first letters: this one is not proper,
    # and that is reported by classify rather than rejected
    assert not classify(tau, 1)["proper"]


def test_majority_on_four_proper_square():
    tau = sliding_block_to_morphism(ROT2, MAJORITY, stable_table(stationary(ROT2), 1, 3))
    assert "".join(tau.image("a")) == "abaaaaaa"
    assert "".join(tau.image("b")) == "abaaa"
    assert classify(tau, 1)["proper"]
    assert all(len(tau.image(a)) == len(ROT2.image(a)) for a in AB)


def test_majority_on_barely_proper_level():
    # one shared letter of padding is enough to build tau, not enough
    # to make it proper
    tau = sliding_block_to_morphism(ROT, MAJORITY, stable_table(stationary(ROT), 1, 3))
    assert "".join(tau.image("a")) == "aaa"
    assert "".join(tau.image("b")) == "ab"
    assert not classify(tau, 1)["proper"]


def test_radius_hypothesis_is_checked():
    fib = load_corpus("fibonacci")
    with pytest.raises(HypothesisError, match="not 1-proper"):
        sliding_block_to_morphism(fib.level(0), MAJORITY, stable_table(fib, 1, 3))


def test_language_table_letters_are_checked():
    bad = level_language(stationary(Morphism({"c": "cc"})), 1, 2, 3)
    with pytest.raises(HypothesisError, match="outside sigma's source"):
        sliding_block_to_morphism(ROT2, MAJORITY, bad)


def test_commuting_square_against_oracle():
    lx = stable_table(stationary(ROT2), 1, 3)
    tau = sliding_block_to_morphism(ROT2, MAJORITY, lx)
    table = {"".join(w): MAJORITY.table[w] for w in WINDOWS3}
    for w in lx.sorted_words():
        s = "".join(ROT2(w))
        assert oracle_interior_code(s, 1, table) == "".join(tau(w))[1 : len(s) - 1]


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_lengths_preserved_for_random_codes(seed):
    # the internal commuting check also runs on every build
    rng = random.Random(seed)
    code = LocalCode(1, {w: rng.choice("ab") for w in WINDOWS3})
    tau = sliding_block_to_morphism(ROT2, code, stable_table(stationary(ROT2), 1, 3))
    assert all(len(tau.image(a)) == len(ROT2.image(a)) for a in AB)


# ---------------------------------------------------------------------------
# transported structure

def test_identity_transport_on_fibonacci():
    fib = load_corpus("fibonacci")
    code = LocalCode.relabeling({"a": "a", "b": "b"})
    ts = transported_structure(fib, code, 2)
    assert ts.tau == fib.level(0)
    assert ts.certificates["normalization"] == "rotation conjugate (power 2, shift 1)"
    nu0, nu1 = ts.nu_sequence.level(0), ts.nu_sequence.level(1)
    assert "".join(nu0.image("a")) == "baa"
    assert "".join(nu0.image("b")) == "ba"
    assert "".join(nu1.image("a")) == "babaababaabaababaababaabaababaabaababaababaabaababaabaa"
    assert "".join(nu1.image("b")) == "babaababaabaababaababaabaababaabaa"
    assert ts.certificates["pushed_alphabet_bounds"] == [(2, 2), (2, 2)]
    assert ts.certificates["alphabet_cap"] == 2


def test_relabel_transport_on_fibonacci():
    fib = load_corpus("fibonacci")
    code = LocalCode.relabeling({"a": "0", "b": "1"})
    ts = transported_structure(fib, code, 2)
    certs = ts.certificates
    assert certs["normalization"] == "tail rotation conjugate (power 2, shift 1)"
    assert certs["tower_cuts"] == [1, 3, 5, 7, 9]
    assert certs["first_coordinate"] == {"agrees": True, "lengths": {"a": 2, "b": 1}}
    nu0, nu1 = ts.nu_sequence.level(0), ts.nu_sequence.level(1)
    assert "".join(nu0.image("a")) == "00101"
    assert "".join(nu0.image("b")) == "001"
    assert "".join(nu1.image("a")) == "babaababaabaababaabaa"
    assert "".join(nu1.image("b")) == "babaababaabaa"
    assert certs["pushed_alphabet_bounds"] == [(2, 2), (2, 2)]
    # the first push attempt runs out of witness room and the loop
    # deepens the tower once
    assert certs["push_attempts"][0]["tower_levels"] == 2
    assert "witness too short" in certs["push_attempts"][0]["error"]
    assert certs["push_attempts"][1] == {"tower_levels": 3, "ok": True}
    # factor identity at level 0 of the pushed column
    assert compose(nu0, ts.psi_levels[1]) == ts.psi_levels[0]
    for n, size in certs["coding_alphabet_sizes"].items():
        assert size <= 2


def test_majority_transport_on_stationary_square():
    ts = transported_structure(stationary(ROT2), MAJORITY, 2)
    assert ts.certificates["normalization"] == "input already proper"
    assert ts.certificates["preparation"] == []
    assert ts.certificates["pushed_alphabet_bounds"] == [(2, 2), (2, 2)]
    assert ts.certificates["nu_alphabet_sizes"] == [(2, 2), (2, 2)]


def test_majority_transport_keeps_proper_tail():
    # the coded level is not proper here, but the stationary tail is,
    # so normalization keeps the head and leaves the tail alone
    ts = transported_structure(stationary(ROT), MAJORITY, 2)
    assert ts.certificates["normalization"] == "tail already proper (head kept)"
    assert "".join(ts.nu_sequence.level(0).image("a")) == "abaaaaaa"
    assert "".join(ts.nu_sequence.level(0).image("b")) == "abaaa"
    assert ts.certificates["pushed_alphabet_bounds"] == [(2, 2), (2, 2)]


def test_majority_transport_rotates_fibonacci_first():
    fib = load_corpus("fibonacci")
    ts = transported_structure(fib, MAJORITY, 2)
    assert ts.certificates["preparation"] == ["rotation conjugate (power 2, shift 1)"]
    assert "".join(ts.tau.image("a")) == "aaa"
    assert "".join(ts.tau.image("b")) == "ab"
    assert ts.certificates["pushed_alphabet_bounds"] == [(2, 2), (2, 2)]


def test_thue_morse_relabel_transport_exhausts_budget():
    # the coded sequence needs the pair recoding, whose contraction
    # cuts outgrow any reasonable expansion budget before the push has
    # witness room; the failure is reported, not patched over
    tmo = load_corpus("thue-morse")
    code = LocalCode.relabeling({"a": "0", "b": "1"})
    with pytest.raises(HypothesisError, match="contraction budget exhausted"):
        transported_structure(tmo, code, 2, budget=2_000_000)


def test_transport_validates_levels():
    fib = load_corpus("fibonacci")
    code = LocalCode.relabeling({"a": "a", "b": "b"})
    with pytest.raises(HypothesisError, match="at least one tower level"):
        transported_structure(fib, code, 0)


# ---------------------------------------------------------------------------
# covering-symbol profiles

def test_fibonacci_covering_profiles():
    fib = load_corpus("fibonacci")
    P3 = fib.compose_range(0, 3)
    lx3 = stable_table(fib, 3, 8)
    for y in sample_fiber_words(fib, 10, 80, seed=0):
        prof = covering_symbol_profile(P3, y, lx3)
        assert prof.window_len == 80
        assert prof.min_count == 1
        assert all(c >= 1 for c in prof.per_position_counts)
        assert prof.per_position_counts[prof.argmin_position] == 1


def test_thue_morse_covering_profiles():
    tmo = load_corpus("thue-morse")
    P2 = tmo.compose_range(0, 2)
    lx2 = stable_table(tmo, 2, 8)
    for y in sample_fiber_words(tmo, 10, 64, seed=0):
        prof = covering_symbol_profile(P2, y, lx2)
        assert prof.min_count <= 2


def test_covering_symbols_contain_occurrence_oracle():
    # symbols read off true occurrences inside one expansion must all
    # be found by the factorization enumeration
    fib = load_corpus("fibonacci")
    P3 = fib.compose_range(0, 3)
    lx3 = stable_table(fib, 3, 8)
    z = fib.expand(3, 9, ("a",))
    y = P3(z)[7:87]
    prof = covering_symbol_profile(P3, y, lx3)
    images = {a: "".join(P3.image(a)) for a in P3.source}
    oracle = oracle_covering_symbols(images, "".join(z), "".join(y))
    for pos in range(len(y)):
        assert oracle[pos]
        assert oracle[pos] <= set(prof.per_position_symbols[pos])


def test_covering_rejects_junk_word():
    fib = load_corpus("fibonacci")
    P3 = fib.compose_range(0, 3)
    lx3 = stable_table(fib, 3, 8)
    with pytest.raises(HypothesisError, match="not in generated language at this depth"):
        covering_symbol_profile(P3, tuple("ab" * 40), lx3)
    # bb never occurs; neither does any word containing it
    with pytest.raises(HypothesisError, match="not in generated language at this depth"):
        covering_symbol_profile(P3, tuple("abaababaabb" + "a" * 20), lx3)


def test_covering_rejects_short_word():
    fib = load_corpus("fibonacci")
    P3 = fib.compose_range(0, 3)
    lx3 = stable_table(fib, 3, 8)
    with pytest.raises(HypothesisError, match="too short to profile"):
        covering_symbol_profile(P3, P3(("a",)), lx3)


@given(seeds)
@settings(max_examples=15, deadline=None)
def test_covering_minimum_bounded_by_rank(seed):
    fib = load_corpus("fibonacci")
    P3 = fib.compose_range(0, 3)
    lx3 = stable_table(fib, 3, 8)
    (y,) = sample_fiber_words(fib, 1, 60, seed=seed)
    prof = covering_symbol_profile(P3, y, lx3)
    assert 1 <= prof.min_count <= 2


# ---------------------------------------------------------------------------
# fiber-word sampling

def test_sampler_is_deterministic():
    fib = load_corpus("fibonacci")
    first = sample_fiber_words(fib, 10, 80, seed=0)
    assert first == sample_fiber_words(fib, 10, 80, seed=0)
    assert first != sample_fiber_words(fib, 10, 80, seed=1)
    assert all(len(w) == 80 for w in first)
    big = "".join(fib.expand(0, 16, ("a",)))
    assert all("".join(w) in big for w in first)


def test_sampler_validates_inputs():
    fib = load_corpus("fibonacci")
    with pytest.raises(HypothesisError, match="at least one word"):
        sample_fiber_words(fib, 0, 10)
    with pytest.raises(HypothesisError, match="positive length"):
        sample_fiber_words(fib, 1, 0)
    shallow = DirectiveSequence([Morphism({"a": "ab", "b": "a"})])
    with pytest.raises(InsufficientDepthError, match="expands every letter"):
        sample_fiber_words(shallow, 3, 100)


# ---------------------------------------------------------------------------
# asymptotic candidates

def test_fibonacci_has_one_candidate_pair_per_side():
    fib = load_corpus("fibonacci")
    for m in range(2, 9):
        lx = stable_table(fib, 0, m + 1)
        for side in ("left", "right"):
            assert len(asymptotic_candidates(lx, m, side)) == 1


def test_fibonacci_m4_candidates_pinned():
    fib = load_corpus("fibonacci")
    lx = stable_table(fib, 0, 5)
    assert asymptotic_candidates(lx, 4, "left") == (
        (tuple("aabaa"), tuple("aabab")),
    )
    assert asymptotic_candidates(lx, 4, "right") == (
        (tuple("aabaa"), tuple("babaa")),
    )


def test_candidates_agree_with_grouping_oracle():
    fib = load_corpus("fibonacci")
    tmo = load_corpus("thue-morse")
    for dseq, tops in ((fib, range(2, 7)), (tmo, range(2, 6))):
        for m in tops:
            lx = stable_table(dseq, 0, m + 1)
            words = ["".join(w) for w in lx.of_length(m + 1)]
            for side in ("left", "right"):
                want = tuple(
                    sorted((tuple(p), tuple(q)) for p, q in
                           oracle_asymptotic_pairs(words, side))
                )
                assert asymptotic_candidates(lx, m, side) == want


def test_thue_morse_candidate_counts():
    tmo = load_corpus("thue-morse")
    counts = {}
    for m in range(2, 6):
        lx = stable_table(tmo, 0, m + 1)
        counts[m] = len(asymptotic_candidates(lx, m, "right"))
        assert counts[m] == len(asymptotic_candidates(lx, m, "left"))
    assert counts == {2: 2, 3: 4, 4: 2, 5: 4}


def test_candidates_differ_only_at_the_outer_position():
    tmo = load_corpus("thue-morse")
    lx = stable_table(tmo, 0, 4)
    for w, v in asymptotic_candidates(lx, 3, "right"):
        assert w[0] != v[0] and w[1:] == v[1:]
    for w, v in asymptotic_candidates(lx, 3, "left"):
        assert w[-1] != v[-1] and w[:-1] == v[:-1]


def test_candidate_count_bound():
    # pairs <= side-special words x unordered letter pairs x 2
    for name in ("fibonacci", "thue-morse", "tribonacci"):
        dseq = load_corpus(name)
        size = len(dseq.alphabet(0))
        for m in range(2, 6):
            lx = stable_table(dseq, 0, m + 1)
            for side in ("left", "right"):
                pairs = asymptotic_candidates(lx, m, side)
                affixes = {w[1:] if side == "right" else w[:-1] for w, _ in pairs}
                bound = max(1, len(affixes)) * math.comb(size, 2) * 2
                assert len(pairs) <= bound


def test_single_letter_language_has_no_candidates():
    single = stationary(Morphism({"a": "aa"}))
    lx = stable_table(single, 0, 4)
    assert asymptotic_candidates(lx, 3, "left") == ()


def test_asymptotic_validation():
    fib = load_corpus("fibonacci")
    lx = stable_table(fib, 0, 5)
    with pytest.raises(HypothesisError, match="side must be 'left' or 'right'"):
        asymptotic_candidates(lx, 4, "up")
    with pytest.raises(HypothesisError, match="at least 1"):
        asymptotic_candidates(lx, 0, "left")
    with pytest.raises(HypothesisError, match="need 6"):
        asymptotic_candidates(lx, 5, "left")
    shallow = level_language(fib, 0, 9, 2)
    assert not shallow.stabilized
    with pytest.raises(InsufficientDepthError, match="has not stabilized"):
        asymptotic_candidates(shallow, 8, "left")
