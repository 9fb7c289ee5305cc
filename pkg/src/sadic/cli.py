"""Command-line front end.

Every invocation runs one analysis and emits one report object:
{command, inputs, parameters, results, certificates, version}, as a
single JSON line with sorted keys (--pretty switches to an indented
document).  Reports are deterministic: identical arguments and seeds
give byte-identical output.

Exit codes: 0 when every certificate passes, 3 when the analysis ran
but a certificate failed, 2 when a mathematical hypothesis was
violated, 1 for usage, format, and I/O errors.  Error output is itself
a JSON line carrying the module error text verbatim.
"""

import argparse
import json
import os
import sys

from . import __version__
from .coding import Marker, recognizable_tower, return_words
from .decompose import factorize_through, lower_rank_split
from .errors import FormatError, HypothesisError, InsufficientDepthError
from .factors import (
    asymptotic_candidates,
    coded_prefix,
    covering_symbol_profile,
    parse_local_code,
    sample_fiber_words,
    transported_structure,
)
from .language import (
    corpus_names,
    level_language,
    load_corpus,
    parse_directive_sequence,
)
from .morphism import (
    classify,
    compose,
    compose_chain,
    format_word,
    metrics,
    parse_morphism,
    parse_word,
    peel,
    properness,
)
from .recognize import find_constant, recognizability_check, window_cover_length
from .words import critical_positions, least_period, local_period

VERSION = {"tool": __version__, "format": "v1"}


# ---------------------------------------------------------------------------
# serialization

def _word(w):
    return format_word(w)


def _mor(m):
    return {
        "rules": {a: _word(m.image(a)) for a in m.source},
        "source": list(m.source),
        "target": list(m.target),
    }


def _cert(name, ok, witness):
    return {"name": name, "pass": bool(ok), "witness": witness}


def _report(command, inputs, parameters, results, certificates):
    return {
        "command": command,
        "inputs": inputs,
        "parameters": parameters,
        "results": results,
        "certificates": certificates,
        "version": VERSION,
    }


def _emit(obj, pretty):
    if pretty:
        text = json.dumps(obj, sort_keys=True, indent=2)
    else:
        text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    sys.stdout.write(text + "\n")


# ---------------------------------------------------------------------------
# argument resolution

def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _resolve_dseq(token):
    if os.path.exists(token):
        return parse_directive_sequence(_read(token)), {"kind": "file", "path": token}
    return load_corpus(token), {"kind": "corpus", "id": token}


def _resolve_morphism(token):
    """A morphism file, or the level-0 morphism of a corpus entry."""
    if os.path.exists(token):
        return parse_morphism(_read(token)), {"kind": "file", "path": token}
    if token in corpus_names():
        return load_corpus(token).level(0), {"kind": "corpus", "id": token, "level": 0}
    raise FormatError(
        f"no such file or corpus id: {token!r} (built-in: {', '.join(corpus_names())})"
    )


def _resolve_code(token):
    return parse_local_code(_read(token)), {"kind": "file", "path": token}


def _parse_marker(text):
    parts = text.split(".")
    if len(parts) != 2:
        raise FormatError(
            f"marker must be written left.right (either side may be empty), got {text!r}"
        )
    return Marker(parts[0], parts[1])


def _stable_table(dseq, level, max_len):
    table = None
    for depth in range(level + 1, dseq.declared_depth + 1):
        table = level_language(dseq, level, max_len, depth)
        if table.stabilized:
            return table
    if table is None:
        raise InsufficientDepthError(f"no materializable depth beyond level {level}")
    return table


# ---------------------------------------------------------------------------
# subcommands

def _cmd_period(args):
    w = parse_word(args.word)
    return _report(
        "period",
        {"word": args.word},
        {},
        {"word": _word(w), "length": len(w), "least_period": least_period(w)},
        [],
    )


def _cmd_critical(args):
    w = parse_word(args.word)
    period = least_period(w)
    positions = critical_positions(w)
    local = {str(p): local_period(w, p) for p in positions}
    certs = [
        _cert("critical-positions-nonempty", len(positions) > 0, {"count": len(positions)}),
        _cert(
            "local-period-bounded",
            all(v <= period for v in local.values()),
            {"least_period": period, "local_periods": local},
        ),
    ]
    return _report(
        "critical",
        {"word": args.word},
        {},
        {
            "word": _word(w),
            "least_period": period,
            "critical_positions": list(positions),
            "local_periods": local,
        },
        certs,
    )


def _cmd_compose(args):
    mors = []
    inputs = []
    for token in args.morphism:
        m, where = _resolve_morphism(token)
        mors.append(m)
        inputs.append(where)
    composed = compose_chain(mors) if len(mors) > 1 else mors[0]
    return _report(
        "compose",
        {"morphisms": inputs},
        {"order": "outermost first"},
        {"composition": _mor(composed), "metrics": metrics(composed)},
        [],
    )


def _cmd_classify(args):
    m, where = _resolve_morphism(args.morphism)
    flags = classify(m, args.r)
    return _report(
        "classify",
        {"morphism": where},
        {"r": args.r},
        {
            "flags": flags,
            "properness": properness(m),
            "metrics": metrics(m),
            "morphism": _mor(m),
        },
        [],
    )


def _cmd_peel(args):
    m, where = _resolve_morphism(args.morphism)
    prime, elem = peel(m, args.case, args.a, b=args.b, s_len=args.s_len)
    ok = compose(prime, elem) == m
    return _report(
        "peel",
        {"morphism": where},
        {"case": args.case, "a": args.a, "b": args.b, "s_len": args.s_len},
        {"prime": _mor(prime), "elementary": _mor(elem)},
        [_cert("recomposition", ok, {"checked": "compose(prime, elementary) == input"})],
    )


def _decomposition_report(command, inputs, parameters, dec, extra_certs):
    cert = dec.certificate
    certs = [
        _cert("recomposition", cert["recomposition"] == "exact", {"mode": cert["recomposition"]}),
        _cert("q-letter-onto", cert["q_letter_onto"], {"q_source": cert["q_source_size"]}),
    ] + extra_certs(cert)
    return _report(
        command,
        inputs,
        parameters,
        {
            "q": _mor(dec.q),
            "ps": [_mor(p) for p in dec.ps],
            "certificate": cert,
        },
        certs,
    )


def _cmd_lower_rank(args):
    m, where = _resolve_morphism(args.morphism)
    dec = lower_rank_split(m, parse_word(args.u), parse_word(args.v), args.s_len, side=args.side)
    source = len(m.source)

    def extra(cert):
        return [
            _cert(
                "alphabet-bound",
                cert["q_target_size"] <= source,
                {"q_target": cert["q_target_size"], "source": source},
            )
        ]

    return _decomposition_report(
        "lower-rank",
        {"morphism": where},
        {"u": args.u, "v": args.v, "s_len": args.s_len, "side": args.side},
        dec,
        extra,
    )


def _cmd_factorize_through(args):
    phi, where_phi = _resolve_morphism(args.phi)
    tau, where_tau = _resolve_morphism(args.tau)
    dec = factorize_through(
        phi, tau, parse_word(args.u), parse_word(args.w),
        require_margin=not args.no_margin,
    )

    def extra(cert):
        return [
            _cert("q-proper", cert["q_proper"], {}),
            _cert(
                "alphabet-bound",
                cert["inner_alphabet_size"] <= cert["phi_source_size"],
                {
                    "inner": cert["inner_alphabet_size"],
                    "phi_source": cert["phi_source_size"],
                },
            ),
        ]

    return _decomposition_report(
        "factorize-through",
        {"phi": where_phi, "tau": where_tau},
        {"u": args.u, "w": args.w, "require_margin": not args.no_margin},
        dec,
        extra,
    )


def _cmd_language(args):
    dseq, where = _resolve_dseq(args.dseq)
    table = level_language(dseq, args.level, args.len, args.depth)
    return _report(
        "language",
        {"dseq": where},
        {"level": args.level, "len": args.len, "depth": args.depth},
        {
            "words": [_word(w) for w in table.sorted_words()],
            "count": len(table.words),
            "stabilized": table.stabilized,
        },
        [],
    )


def _interp(i):
    return {
        "window": _word(i.window),
        "offset": i.offset,
        "letter": i.letter,
        "local_cuts": list(i.local_cuts),
    }


def _cmd_recognizable(args):
    m, where_m = _resolve_morphism(args.morphism)
    lang, where_lang = _resolve_dseq(args.lang)
    needed = window_cover_length(m, args.r if args.r is not None else args.cap)
    table = _stable_table(lang, 0, max(args.len, needed))
    if args.r is not None:
        rep = recognizability_check(m, table, args.r)
    else:
        rep = find_constant(m, table, cap=args.cap)
    results = {
        "radius": rep.radius,
        "verdict": rep.verdict,
        "table_size": rep.table_size,
        "scope": rep.scope,
        "witness": [_interp(i) for i in rep.witness] if rep.witness else None,
    }
    certs = [
        _cert(
            "recognizable",
            rep.verdict == "recognizable_at_r",
            {"verdict": rep.verdict, "radius": rep.radius, "witness": results["witness"]},
        )
    ]
    return _report(
        "recognizable",
        {"morphism": where_m, "lang": where_lang},
        {"r": args.r, "cap": args.cap, "len": args.len},
        results,
        certs,
    )


def _cmd_return_words(args):
    dseq, where = _resolve_dseq(args.dseq)
    marker = _parse_marker(args.marker)
    words = return_words(dseq, marker, horizon=args.horizon)
    return _report(
        "return-words",
        {"dseq": where},
        {"marker": args.marker, "horizon": args.horizon},
        {
            "marker": marker.describe(),
            "return_words": sorted(_word(w) for w in words),
            "count": len(words),
        },
        [],
    )


def _tower_certs(tower):
    certs = []
    for entry in tower.certificates["identities"]:
        certs.append(
            _cert(
                f"{entry['kind']}-identity-level-{entry['level']}",
                entry["holds"],
                {"level": entry["level"]},
            )
        )
    for n, entry in sorted(tower.certificates["connecting"].items()):
        certs.append(
            _cert(
                f"connecting-level-{n}",
                entry["proper"] and entry["letter_onto"],
                {"level": n, "recognizability": entry.get("recognizability")},
            )
        )
    for n, cert in sorted(tower.certificates["levels"].items()):
        ok = (
            cert["decoding"]["reproduced"]
            and cert["cuts"]["agree"]
            and cert["bounds"]["properness"] >= cert["bounds"]["required_properness"]
        )
        certs.append(
            _cert(
                f"coding-level-{n}",
                ok,
                {
                    "decoding": cert["decoding"],
                    "cuts": cert["cuts"],
                    "bounds": cert["bounds"],
                },
            )
        )
    return certs


def _cmd_reco_tower(args):
    dseq, where = _resolve_dseq(args.dseq)
    tower = recognizable_tower(dseq, args.levels, budget=args.budget)
    results = {
        "normalization": tower.normalization,
        "cuts": list(tower.cuts),
        "nu": {str(n): _mor(tower.nu[n]) for n in sorted(tower.nu)},
        "tau": {str(n): _mor(tower.tau[n]) for n in sorted(tower.tau)},
        "phi": {str(n): _mor(tower.phi[n]) for n in sorted(tower.phi)},
        "connecting": {
            str(n): entry for n, entry in sorted(tower.certificates["connecting"].items())
        },
    }
    if "phi_top" in tower.certificates:
        results["phi_top"] = tower.certificates["phi_top"]
    return _report(
        "reco-tower",
        {"dseq": where},
        {"levels": args.levels, "budget": args.budget},
        results,
        _tower_certs(tower),
    )


def _cmd_properize(args):
    from .language import properize

    dseq, where = _resolve_dseq(args.dseq)
    depth = min(args.depth, dseq.declared_depth)
    prop = properize(dseq, depth)
    levels = list(prop.levels)
    props = [properness(m) for m in levels]
    growth = [metrics(m)["min_len"] for m in levels]
    before = _stable_table(dseq, 0, 5)
    after = _stable_table(prop, 0, 5)
    missing = sorted(after.words - before.words)
    certs = [
        _cert("all-levels-proper", all(p >= 1 for p in props), {"properness": props}),
        _cert("growth-at-least-2", all(g >= 2 for g in growth), {"min_lengths": growth}),
        _cert(
            "level0-language-preserved",
            not missing,
            {"extra_words": [_word(w) for w in missing[:5]]},
        ),
    ]
    return _report(
        "properize",
        {"dseq": where},
        {"depth": depth},
        {
            "levels": [_mor(m) for m in levels],
            "properness": props,
            "min_lengths": growth,
        },
        certs,
    )


def _cmd_factor(args):
    dseq, where = _resolve_dseq(args.dseq)
    code, where_code = _resolve_code(args.code)
    ts = transported_structure(dseq, code, args.levels, budget=args.budget)
    certs_in = ts.certificates
    cap = certs_in["alphabet_cap"]
    sizes = certs_in["nu_alphabet_sizes"]
    certs = [
        _cert(
            "alphabets-bounded",
            all(s <= cap for s, _ in sizes),
            {"sizes": [list(x) for x in sizes], "cap": cap},
        ),
        _cert(
            "first-coordinate-lengths",
            certs_in["first_coordinate"]["agrees"],
            certs_in["first_coordinate"],
        ),
        _cert(
            "pushed-alphabet-bounds",
            all(got <= bound for got, bound in certs_in["pushed_alphabet_bounds"]),
            {"bounds": [list(x) for x in certs_in["pushed_alphabet_bounds"]]},
        ),
    ]
    results = {
        "tau": _mor(ts.tau),
        "nu_levels": [
            _mor(ts.nu_sequence.level(n)) for n in range(len(ts.nu_sequence.levels))
        ],
        "psi_levels": [_mor(p) for p in ts.psi_levels],
        "normalization": certs_in["normalization"],
        "preparation": certs_in["preparation"],
        "tower_cuts": certs_in["tower_cuts"],
        "push_attempts": certs_in["push_attempts"],
        "recognizability": {
            str(n): entry for n, entry in sorted(certs_in["recognizability"].items())
        },
    }
    return _report(
        "factor",
        {"dseq": where, "code": where_code},
        {"levels": args.levels, "budget": args.budget},
        results,
        certs,
    )


def _cmd_fibers(args):
    dseq, where = _resolve_dseq(args.dseq)
    code, where_code = _resolve_code(args.code)
    tilde, prefix, table, notes = coded_prefix(dseq, code, args.n)
    words = sample_fiber_words(tilde, args.count, args.len, seed=args.seed)
    profiles = []
    rank = len(prefix.source)
    for y in words:
        prof = covering_symbol_profile(prefix, y, table)
        profiles.append(
            {
                "word": _word(y),
                "min_count": prof.min_count,
                "argmin_position": prof.argmin_position,
                "per_position_counts": list(prof.per_position_counts),
            }
        )
    results = {
        "level": args.n,
        "preparation": notes,
        "alphabet_rank": rank,
        "profiles": profiles,
    }
    if args.figures:
        results["figures"] = _fiber_figures(args.figures, profiles)
    certs = [
        _cert(
            "covering-minimum-bounded",
            all(p["min_count"] <= rank for p in profiles),
            {"rank": rank, "min_counts": [p["min_count"] for p in profiles]},
        )
    ]
    return _report(
        "fibers",
        {"dseq": where, "code": where_code},
        {"n": args.n, "len": args.len, "count": args.count, "seed": args.seed},
        results,
        certs,
    )


def _cmd_asymptotic(args):
    dseq, where = _resolve_dseq(args.dseq)
    table = _stable_table(dseq, 0, args.m + 1)
    pairs = asymptotic_candidates(table, args.m, args.side)
    affix = (lambda w: w[1:]) if args.side == "right" else (lambda w: w[:-1])
    specials = sorted({affix(w) for w, _ in pairs})
    size = len(dseq.alphabet(0))
    bound = 2 * max(1, len(specials)) * size * size
    results = {
        "m": args.m,
        "side": args.side,
        "pairs": [[_word(w), _word(v)] for w, v in pairs],
        "count": len(pairs),
        "specials": [_word(w) for w in specials],
        "alphabet_size": size,
        "table_depth": table.depth,
    }
    if args.figures:
        results["figures"] = _asymptotic_figures(args.figures, args, pairs, specials)
    certs = [
        _cert(
            "candidate-count-bound",
            len(pairs) <= bound,
            {"count": len(pairs), "bound": bound, "specials": len(specials)},
        )
    ]
    return _report(
        "asymptotic",
        {"dseq": where},
        {"m": args.m, "side": args.side},
        results,
        certs,
    )


def _cmd_corpus(args):
    if args.action != "list":
        raise FormatError(f"unknown corpus action {args.action!r} (try: list)")
    return _report(
        "corpus-list",
        {},
        {},
        {"names": list(corpus_names())},
        [],
    )


# ---------------------------------------------------------------------------
# figures

def _figure_axes(path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(path, exist_ok=True)
    return plt


def _fiber_figures(directory, profiles):
    plt = _figure_axes(directory)
    fig, ax = plt.subplots(figsize=(8, 4))
    for i, prof in enumerate(profiles):
        ax.plot(prof["per_position_counts"], drawstyle="steps-mid", label=f"word {i}")
    ax.set_xlabel("position")
    ax.set_ylabel("covering symbols")
    ax.set_title("distinct covering symbols per position")
    if len(profiles) <= 10:
        ax.legend(fontsize="small")
    name = os.path.join(directory, "fibers-profile.png")
    fig.savefig(name, dpi=100)
    plt.close(fig)
    return [name]


def _asymptotic_figures(directory, args, pairs, specials):
    plt = _figure_axes(directory)
    counts = {}
    affix = (lambda w: w[1:]) if args.side == "right" else (lambda w: w[:-1])
    for w, _ in pairs:
        key = format_word(affix(w))
        counts[key] = counts.get(key, 0) + 1
    fig, ax = plt.subplots(figsize=(6, 3.5))
    keys = sorted(counts)
    ax.bar(range(len(keys)), [counts[k] for k in keys])
    ax.set_xticks(range(len(keys)), keys, rotation=45, ha="right", fontsize="small")
    ax.set_ylabel("candidate pairs")
    ax.set_title(f"shared {args.side}-side affixes, m={args.m}")
    fig.tight_layout()
    name = os.path.join(directory, f"asymptotic-{args.side}-m{args.m}.png")
    fig.savefig(name, dpi=100)
    plt.close(fig)
    return [name]


# ---------------------------------------------------------------------------
# parser and entry point

def _parser():
    top = argparse.ArgumentParser(
        prog="sadic",
        description="analyses over words, morphisms, and directive sequences",
    )
    top.add_argument("--pretty", action="store_true", help="indented report output")
    top.add_argument("--seed", type=int, default=0, help="seed for all samplers")
    sub = top.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("period", help="least period of a word")
    p.add_argument("word")
    p.set_defaults(handler=_cmd_period)

    p = sub.add_parser("critical", help="critical positions and local periods")
    p.add_argument("word")
    p.set_defaults(handler=_cmd_critical)

    p = sub.add_parser("compose", help="compose morphisms, outermost first")
    p.add_argument("morphism", nargs="+")
    p.set_defaults(handler=_cmd_compose)

    p = sub.add_parser("classify", help="classification flags of a morphism")
    p.add_argument("morphism")
    p.add_argument("--r", type=int, default=1)
    p.set_defaults(handler=_cmd_classify)

    p = sub.add_parser("peel", help="one elementary decomposition step")
    p.add_argument("morphism")
    p.add_argument("--case", required=True, choices=["equal", "prefix", "interior"])
    p.add_argument("--a", required=True)
    p.add_argument("--b")
    p.add_argument("--s-len", type=int)
    p.set_defaults(handler=_cmd_peel)

    p = sub.add_parser("lower-rank", help="split a morphism through fewer letters")
    p.add_argument("morphism")
    p.add_argument("--u", required=True)
    p.add_argument("--v", required=True)
    p.add_argument("--s-len", type=int, required=True)
    p.add_argument("--side", choices=["prefix", "suffix"], default="prefix")
    p.set_defaults(handler=_cmd_lower_rank)

    p = sub.add_parser("factorize-through", help="factor tau through phi")
    p.add_argument("phi")
    p.add_argument("tau")
    p.add_argument("--u", required=True)
    p.add_argument("--w", required=True)
    p.add_argument("--no-margin", action="store_true")
    p.set_defaults(handler=_cmd_factorize_through)

    p = sub.add_parser("language", help="level language table")
    p.add_argument("dseq")
    p.add_argument("--level", type=int, default=0)
    p.add_argument("--len", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.set_defaults(handler=_cmd_language)

    p = sub.add_parser("recognizable", help="recognizability verdict at a radius")
    p.add_argument("morphism")
    p.add_argument("--lang", required=True)
    p.add_argument("--r", type=int)
    p.add_argument("--cap", type=int, default=8)
    p.add_argument("--len", type=int, default=12)
    p.set_defaults(handler=_cmd_recognizable)

    p = sub.add_parser("return-words", help="return words of a marker")
    p.add_argument("dseq")
    p.add_argument("--marker", required=True, help="left.right context")
    p.add_argument("--horizon", type=int)
    p.set_defaults(handler=_cmd_return_words)

    p = sub.add_parser("reco-tower", help="recognizable coding tower")
    p.add_argument("dseq")
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--budget", type=int, default=80_000_000)
    p.set_defaults(handler=_cmd_reco_tower)

    p = sub.add_parser("properize", help="rebuild a sequence with proper levels")
    p.add_argument("dseq")
    p.add_argument("--depth", type=int, default=32)
    p.set_defaults(handler=_cmd_properize)

    p = sub.add_parser("factor", help="transport structure through a window code")
    p.add_argument("dseq")
    p.add_argument("--code", required=True)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--budget", type=int, default=80_000_000)
    p.set_defaults(handler=_cmd_factor)

    p = sub.add_parser("fibers", help="covering-symbol profiles of sampled words")
    p.add_argument("dseq")
    p.add_argument("--code", required=True)
    p.add_argument("--len", type=int, required=True)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--figures", metavar="DIR")
    p.set_defaults(handler=_cmd_fibers)

    p = sub.add_parser("asymptotic", help="asymptotic candidate pairs")
    p.add_argument("dseq")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--side", required=True, choices=["left", "right"])
    p.add_argument("--figures", metavar="DIR")
    p.set_defaults(handler=_cmd_asymptotic)

    p = sub.add_parser("corpus", help="built-in corpus")
    p.add_argument("action")
    p.set_defaults(handler=_cmd_corpus)

    return top


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    pretty = args.pretty
    command = args.subcommand
    try:
        report = args.handler(args)
    except (HypothesisError, InsufficientDepthError) as exc:
        _emit(
            {"command": command, "error": str(exc), "kind": "hypothesis", "version": VERSION},
            pretty,
        )
        return 2
    except FormatError as exc:
        _emit(
            {"command": command, "error": str(exc), "kind": "format", "version": VERSION},
            pretty,
        )
        return 1
    except (OSError, ValueError) as exc:
        _emit(
            {"command": command, "error": str(exc), "kind": "usage", "version": VERSION},
            pretty,
        )
        return 1
    _emit(report, pretty)
    if all(c["pass"] for c in report["certificates"]):
        return 0
    return 3


if __name__ == "__main__":
    sys.exit(main())
