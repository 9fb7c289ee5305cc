import pytest
from hypothesis import given, settings, strategies as st

from sadic.errors import FormatError, HypothesisError, InsufficientDepthError
from sadic.language import (
    DirectiveSequence,
    LanguageTable,
    aligned_witness_from_table,
    contract,
    corpus_names,
    format_directive_sequence,
    growth_profile,
    level_language,
    load_corpus,
    min_period_profile,
    parse_directive_sequence,
    properize,
    rotate_to_proper,
    trim_letter_onto,
)
from sadic.morphism import Morphism, classify, compose, identity, metrics

from oracles import (
    oracle_check_aligned,
    oracle_expand,
    oracle_factor_set,
    oracle_least_period,
    oracle_level_words,
)

FIB_RULES = {"a": "ab", "b": "a"}
TM_RULES = {"a": "ab", "b": "ba"}


def strs(words):
    return {"".join(w) for w in words}


def junk_sequence():
    """Alternating two-level tower with an unused letter c at odd levels."""
    s0 = Morphism({"a": "ab", "b": "a", "c": "ab"}, source=("a", "b", "c"), target=("a", "b"))
    s1 = Morphism({"a": "ab", "b": "a"}, source=("a", "b"), target=("a", "b", "c"))
    return DirectiveSequence([s0, s1], repeat="cycle 2")


# ---------------------------------------------------------------------------
# DirectiveSequence basics


def test_sequence_validation():
    with pytest.raises(HypothesisError, match="at least one level"):
        DirectiveSequence([])
    m = Morphism({"a": "ab", "b": "a"})
    wide = Morphism({"x": "ab", "y": "ba"}, target=("a", "b"))
    with pytest.raises(HypothesisError, match="alphabet mismatch"):
        DirectiveSequence([m, m, wide, m])
    with pytest.raises(FormatError, match="unknown repeat rule"):
        DirectiveSequence([m], repeat="forever")
    with pytest.raises(HypothesisError, match="cycle 3 exceeds"):
        DirectiveSequence([m], repeat="cycle 3")
    with pytest.raises(HypothesisError, match="does not close"):
        DirectiveSequence([wide], repeat="stationary")


def test_repeat_rule_materializes_levels():
    d = junk_sequence()
    assert d.declared_depth == 32
    assert d.level(4) == d.level(0)
    assert d.level(5) == d.level(1)
    assert d.alphabet(3) == ("a", "b", "c")
    assert d.alphabet(4) == ("a", "b")
    d.level(31)
    with pytest.raises(InsufficientDepthError, match="insufficient materialized levels"):
        d.level(32)
    finite = DirectiveSequence([d.level(0), d.level(1)])
    assert finite.declared_depth == 2
    with pytest.raises(InsufficientDepthError, match="insufficient materialized levels"):
        finite.level(2)


def test_alphabet_rank_over_materialized_levels():
    assert load_corpus("fibonacci").alphabet_rank() == 2
    assert load_corpus("tribonacci").alphabet_rank() == 3
    assert junk_sequence().alphabet_rank() == 2


def test_compose_range_and_expand():
    fib = load_corpus("fibonacci")
    assert fib.compose_range(2, 2) == identity(("a", "b"))
    sq = fib.compose_range(0, 2)
    assert "".join(sq.image("a")) == oracle_expand(FIB_RULES, "a", 2)
    for n in range(6):
        for a in "ab":
            assert "".join(fib.expand(0, n, (a,))) == oracle_expand(FIB_RULES, a, n)
    with pytest.raises(InsufficientDepthError):
        fib.compose_range(0, 33)


# ---------------------------------------------------------------------------
# level languages


def test_level_language_fibonacci_frozen():
    fib = load_corpus("fibonacci")
    t = level_language(fib, 0, 3, 6)
    assert strs(t.words) == {"a", "b", "aa", "ab", "ba", "aab", "aba", "baa", "bab"}
    assert strs(t.words) == oracle_level_words(FIB_RULES, 6, 3)
    assert t.stabilized
    assert t.level == 0 and t.max_len == 3 and t.depth == 6


def test_level_language_thue_morse_frozen():
    tm = load_corpus("thue-morse")
    t = level_language(tm, 0, 2, 4)
    assert strs(t.words) == {"a", "b", "aa", "ab", "ba", "bb"}
    assert strs(t.words) == oracle_level_words(TM_RULES, 4, 2)


def test_level_language_positive_step_sees_all_letters():
    tm = load_corpus("thue-morse")
    assert classify(tm.level(0), 0)["positive"]
    t = level_language(tm, 0, 1, 1)
    assert strs(t.words) == {"a", "b"}
    assert not t.stabilized  # no shallower depth to compare against


def test_level_language_is_factor_closed():
    t = level_language(load_corpus("chacon"), 0, 4, 5)
    for w in t.words:
        for i in range(len(w)):
            for j in range(i + 1, len(w) + 1):
                assert w[i:j] in t.words


def test_level_language_rejects_bad_arguments():
    fib = load_corpus("fibonacci")
    with pytest.raises(HypothesisError, match="at least 1"):
        level_language(fib, 0, 0, 4)
    with pytest.raises(HypothesisError, match="0 <= n < N"):
        level_language(fib, 4, 3, 4)
    with pytest.raises(InsufficientDepthError, match="insufficient materialized levels"):
        level_language(fib, 0, 3, 40)


def test_level_language_shrinking_depth_is_reported():
    # the deepest morphism drops letter c, whose image was the only
    # source of the word bb
    m0 = Morphism({"a": "ab", "b": "a", "c": "bb"}, source=("a", "b", "c"), target=("a", "b"))
    m1 = Morphism({"a": "ab", "b": "a"}, source=("a", "b"), target=("a", "b", "c"))
    d = DirectiveSequence([m0, m1])
    with pytest.raises(HypothesisError, match="not letter-onto"):
        level_language(d, 0, 2, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_level_language_properties_random(seed):
    """Tables of random letter-onto substitutions are factor-closed and
    grow monotonically with depth."""
    import random

    rnd = random.Random(seed)
    letters = ("a", "b")
    while True:
        rules = {
            x: "".join(rnd.choice(letters) for _ in range(rnd.randint(1, 3)))
            for x in letters
        }
        if set(rules["a"] + rules["b"]) == {"a", "b"}:
            break
    m = Morphism(rules, source=letters, target=letters)
    d = DirectiveSequence([m], repeat="stationary")
    L = rnd.randint(1, 4)
    n = rnd.randint(0, 2)
    N = rnd.randint(n + 1, 8)
    t = level_language(d, n, L, N)
    for w in t.words:
        assert all(w[i:j] in t.words for i in range(len(w)) for j in range(i + 1, len(w) + 1))
    if N - 1 > n:
        prev = level_language(d, n, L, N - 1)
        assert prev.words <= t.words
        assert t.stabilized == (prev.words == t.words)


# ---------------------------------------------------------------------------
# profiles


def test_growth_profiles():
    assert growth_profile(load_corpus("fibonacci"), 5) == [1, 1, 2, 3, 5]
    assert growth_profile(load_corpus("thue-morse"), 4) == [1, 2, 4, 8]
    ident = DirectiveSequence([identity(("a", "b"))], repeat="stationary")
    assert growth_profile(ident, 6) == [1] * 6
    fib5 = [
        min(len(oracle_expand(FIB_RULES, a, n)) for a in "ab") for n in range(5)
    ]
    assert growth_profile(load_corpus("fibonacci"), 5) == fib5


def test_growth_profile_nondecreasing_on_corpus():
    for name in corpus_names():
        prof = growth_profile(load_corpus(name), 10)
        assert all(x <= y for x, y in zip(prof, prof[1:]))


def test_min_period_profiles():
    fib = load_corpus("fibonacci")
    got = min_period_profile(fib, 5)
    assert got == [
        min(oracle_least_period(oracle_expand(FIB_RULES, a, n)) for a in "ab")
        for n in range(5)
    ]
    assert got == [1, 1, 2, 2, 3]
    assert got[4] >= 3
    tm_got = min_period_profile(load_corpus("thue-morse"), 4)
    assert tm_got == [1, 2, 3, 6]
    assert tm_got[3] >= 4
    doubler = DirectiveSequence([Morphism({"a": "aa"})], repeat="stationary")
    assert min_period_profile(doubler, 6) == [1] * 6


# ---------------------------------------------------------------------------
# contraction


def test_contract_unit_cuts_change_nothing():
    fib = load_corpus("fibonacci")
    c = contract(fib, [0, 1, 2, 3])
    assert all(m == fib.level(0) for m in c.levels)
    assert c.repeat_rule == "stationary"


def test_contract_fibonacci_to_squares():
    fib = load_corpus("fibonacci")
    c = contract(fib, [0, 2, 4])
    assert c.repeat_rule == "stationary"
    for m in c.levels:
        assert {a: "".join(m.image(a)) for a in m.source} == {
            a: oracle_expand(FIB_RULES, a, 2) for a in "ab"
        }
    mine = level_language(c, 0, 4, 2).words
    theirs = level_language(fib, 0, 4, 4).words
    assert mine == theirs
    assert strs(mine) == oracle_level_words(FIB_RULES, 4, 4)


def test_contract_rejects_bad_cut_points():
    fib = load_corpus("fibonacci")
    for cuts in ([], [0], [1, 2], [0, 3, 2], [0, 0, 1]):
        with pytest.raises(HypothesisError, match="invalid cut points"):
            contract(fib, cuts)
    with pytest.raises(HypothesisError, match="invalid cut points"):
        contract(fib, [0, 40])


def test_contract_drops_repeat_when_unaligned():
    d = junk_sequence()
    c = contract(d, [0, 1, 3])  # uneven spacing
    assert c.repeat_rule is None
    assert len(c.levels) == 2
    # aligned spacing across the two-level cycle keeps a rule
    c2 = contract(d, [0, 2, 4])
    assert c2.repeat_rule in ("stationary", "cycle 1")
    assert c2.level(5) == c2.level(1)


# ---------------------------------------------------------------------------
# trimming


def test_trim_removes_junk_letter():
    d = junk_sequence()
    before = level_language(d, 0, 3, 4).words
    t = trim_letter_onto(d, 4)
    assert [t.alphabet(n) for n in range(4)] == [("a", "b")] * 4
    assert all(classify(m, 0)["letter_onto"] for m in t.levels)
    assert level_language(t, 0, 3, 4).words == before


def test_trim_keeps_letter_onto_sequence_unchanged():
    fib = load_corpus("fibonacci")
    t = trim_letter_onto(fib, 3)
    assert len(t.levels) == 3
    assert all(m == fib.level(0) for m in t.levels)


# ---------------------------------------------------------------------------
# properization


def test_properize_fibonacci_yields_proper_levels():
    fib = load_corpus("fibonacci")
    out = properize(fib, 24)
    assert len(out.levels) >= 2
    for m in out.levels:
        flags = classify(m, 1)
        assert flags["proper"]
        assert metrics(m)["min_len"] >= 2
    for n in range(1, len(out.levels) + 1):
        assert len(out.alphabet(n)) <= len(fib.alphabet(0)) ** 2
    assert out.alphabet(0) == ("a", "b")


def test_properize_fibonacci_language_contained():
    fib = load_corpus("fibonacci")
    out = properize(fib, 24)
    ref = level_language(fib, 0, 5, 20)
    assert ref.stabilized
    table = None
    for N in range(1, len(out.levels) + 1):
        table = level_language(out, 0, 5, N)
        if table.stabilized:
            break
    assert table is not None and table.stabilized
    assert table.words <= ref.words


def test_properize_two_letter_pair_alphabets_within_square():
    d = DirectiveSequence([Morphism({"a": "aab", "b": "ab"})], repeat="stationary")
    out = properize(d, 16)
    for n in range(1, len(out.levels) + 1):
        assert len(out.alphabet(n)) <= 4
    for m in out.levels:
        assert classify(m, 1)["proper"]
        assert metrics(m)["min_len"] >= 2


def test_properize_accepts_already_proper_input():
    d = DirectiveSequence([Morphism({"a": "aba", "b": "abba"})], repeat="stationary")
    assert classify(d.level(0), 1)["proper"]
    out = properize(d, 12)
    assert all(classify(m, 1)["proper"] for m in out.levels)


def test_properize_insufficient_depth():
    fib = load_corpus("fibonacci")
    with pytest.raises(InsufficientDepthError, match="insufficient depth for properization"):
        properize(fib, 6)


# ---------------------------------------------------------------------------
# rotation conjugates


def test_rotation_conjugate_fibonacci():
    fib = load_corpus("fibonacci")
    got = rotate_to_proper(fib.level(0))
    assert got is not None
    cand, k, t = got
    assert (k, t) == (2, 1)
    assert {a: "".join(cand.image(a)) for a in cand.source} == {"a": "baa", "b": "ba"}
    assert classify(cand, 1)["proper"]
    # conjugation identity against the plain string oracle
    for a in "ab":
        assert "a" + "".join(cand.image(a)) == oracle_expand(FIB_RULES, a, 2) + "a"


def test_rotation_conjugate_absent_for_thue_morse():
    tm = load_corpus("thue-morse")
    assert rotate_to_proper(tm.level(0)) is None


def test_rotation_conjugate_needs_matching_alphabets():
    m = Morphism({"a": "xy", "b": "x"}, target=("x", "y"))
    with pytest.raises(HypothesisError, match="source == target"):
        rotate_to_proper(m)


# ---------------------------------------------------------------------------
# witness lookup


def test_witness_helper_reads_pair_from_table():
    carrier = DirectiveSequence(
        [Morphism({"z": ("b", "a", "a", "a", "a")}, source=("z",), target=("a", "b"))]
    )
    table = level_language(carrier, 0, 5, 1)
    fam = [Morphism({"a": "xx", "b": "x"})]
    got = aligned_witness_from_table(fam, table)
    assert got == (("a", "a", "a"), ("b", "a", "a", "a"))
    u, v = got
    oracle_check_aligned(fam, u, v)


def test_witness_helper_returns_none_without_pair():
    fib = load_corpus("fibonacci")
    table = level_language(fib, 0, 6, 10)
    assert aligned_witness_from_table([fib.level(0)], table) is None


# ---------------------------------------------------------------------------
# files and corpus


def test_directive_sequence_roundtrip():
    d = junk_sequence()
    text = format_directive_sequence(d)
    back = parse_directive_sequence(text)
    assert back.repeat_rule == "cycle 2"
    assert all(back.level(n) == d.level(n) for n in range(6))


def test_parse_directive_sequence_errors():
    good = "a -> a b\nb -> a\n"
    with pytest.raises(FormatError, match="duplicate repeat"):
        parse_directive_sequence(good + "repeat: stationary\nrepeat: stationary\n")
    with pytest.raises(FormatError, match="no rules"):
        parse_directive_sequence("# only a comment\n")
    with pytest.raises(FormatError, match="contains no rules"):
        parse_directive_sequence(good + "---\n# empty\n")
    with pytest.raises(FormatError, match="unknown repeat rule"):
        parse_directive_sequence(good + "repeat: sometimes\n")


def test_corpus_entries_load():
    assert corpus_names() == ("fibonacci", "thue-morse", "chacon", "tribonacci")
    sizes = {}
    for name in corpus_names():
        d = load_corpus(name)
        assert d.repeat_rule == "stationary"
        sizes[name] = len(d.alphabet(0))
    assert sizes == {"fibonacci": 2, "thue-morse": 2, "chacon": 3, "tribonacci": 3}
    with pytest.raises(FormatError, match="unknown corpus id"):
        load_corpus("riddle")


def test_corpus_dir_override(tmp_path, monkeypatch):
    (tmp_path / "fibonacci.dseq").write_text("a -> a a b\nb -> b a\nrepeat: stationary\n")
    monkeypatch.setenv("SADIC_CORPUS_DIR", str(tmp_path))
    shadowed = load_corpus("fibonacci")
    assert "".join(shadowed.level(0).image("a")) == "aab"
    # names without an override file still come from the package
    tm = load_corpus("thue-morse")
    assert "".join(tm.level(0).image("b")) == "ba"
    with pytest.raises(FormatError, match="unknown corpus id"):
        load_corpus("riddle")
