"""Periods of finite words: global, local, and the cuts where they agree.

Words are any sliceable sequences whose elements compare by equality,
so both str and tuple[str, ...] work. Positions are 1-based counts of
letters to the left of a cut; interior cuts of a length-n word are
1 .. n-1.
"""

# below this length, quadratic slice scanning beats the border table
_BORDER_CUTOVER = 128


def least_period(w):
    """Smallest p >= 1 such that w[i] == w[i + p] wherever both exist.

    A word with no shorter period returns its own length.
    """
    n = len(w)
    if n == 0:
        raise ValueError("empty word")
    if n <= _BORDER_CUTOVER:
        for p in range(1, n):
            if w[p:] == w[: n - p]:
                return p
        return n
    border = _border_table(w)
    return n - border[n - 1]


def _border_table(w):
    # border[i] = length of the longest proper border of w[: i + 1]
    n = len(w)
    border = [0] * n
    k = 0
    for i in range(1, n):
        while k > 0 and w[i] != w[k]:
            k = border[k - 1]
        if w[i] == w[k]:
            k += 1
        border[i] = k
    return border


def local_period(w, pos):
    """Length of the shortest repetition across the cut u|v, u = w[:pos].

    A repetition of length p is a word z occupying positions
    [pos - p, pos) and [pos, pos + p) that agrees with w wherever the
    two overlap; z may overhang either end of w, and its overhang past
    u or v may be empty. The shortest such z always has length
    <= len(w), and local_period(w, pos) <= least_period(w).
    """
    n = len(w)
    if not 1 <= pos <= n - 1:
        raise ValueError("not an interior position")
    u = w[:pos]
    v = w[pos:]
    lu = pos
    lv = n - pos
    for p in range(1, n + 1):
        if p <= lu and p <= lv:
            ok = u[lu - p :] == v[:p]
        elif p <= lv:
            # z = v[:p] overhangs the left end; its tail must spell u
            ok = v[p - lu : p] == u
        elif p <= lu:
            # z = u[lu - p:] overhangs the right end; its head spells v
            ok = u[lu - p : lu - p + lv] == v
        elif p >= lu + lv:
            # z overhangs both ends and its two copies never meet in w
            ok = True
        else:
            # overhangs both ends; the copies overlap inside z itself
            ok = v[p - lu :] == u[: lu + lv - p]
        if ok:
            return p
    raise AssertionError("unreachable: p = len(w) always admits a repetition")


def critical_positions(w):
    """Interior cuts whose local period equals the least period of w.

    Nonempty for every word of length >= 2.
    """
    if len(w) < 2:
        raise ValueError("word too short")
    p = least_period(w)
    return [i for i in range(1, len(w)) if local_period(w, i) == p]
