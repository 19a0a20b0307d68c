"""Word error rate via Levenshtein alignment."""

from dataclasses import dataclass


@dataclass
class Alignment:
    substitutions: int
    deletions: int
    insertions: int
    reference_length: int

    @property
    def errors(self):
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self):
        return self.errors / self.reference_length


def _words(x):
    return x.split() if isinstance(x, str) else list(x)


def edit_distance(a, b):
    a, b = _words(a), _words(b)
    prev = list(range(len(b) + 1))
    for i, wa in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, wb in enumerate(b, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (wa != wb))
        prev = cur
    return prev[-1]


def align(ref, hyp):
    """Minimum-edit alignment with substitution / deletion / insertion counts."""
    ref, hyp = _words(ref), _words(hyp)
    if not ref:
        raise ValueError("reference transcript is empty")
    n, m = len(ref), len(hyp)
    # cost, subs, dels, ins
    table = [[(j, 0, 0, j) for j in range(m + 1)]]
    for i in range(1, n + 1):
        row = [(i, 0, i, 0)]
        for j in range(1, m + 1):
            c, s, d, ins = table[i - 1][j - 1]
            same = ref[i - 1] == hyp[j - 1]
            diag = (c + (not same), s + (not same), d, ins)
            up = table[i - 1][j]
            up = (up[0] + 1, up[1], up[2] + 1, up[3])
            left = row[j - 1]
            left = (left[0] + 1, left[1], left[2], left[3] + 1)
            row.append(min(diag, up, left))
        table.append(row)
    _, s, d, ins = table[n][m]
    return Alignment(s, d, ins, n)


def wer(ref_words, hyp_words):
    return align(ref_words, hyp_words).wer
