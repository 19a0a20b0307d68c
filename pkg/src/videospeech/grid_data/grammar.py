"""The fixed six-slot GRID sentence grammar."""

from dataclasses import dataclass

COMMANDS = ("bin", "lay", "place", "set")
COLORS = ("blue", "green", "red", "white")
PREPOSITIONS = ("at", "by", "in", "with")
LETTERS = tuple(c for c in "abcdefghijklmnopqrstuvwxyz" if c != "w")
ADVERBS = ("again", "now", "please", "soon")
DIGIT_WORDS = ("zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine")

SLOTS = ("command", "color", "preposition", "letter", "digit", "adverb")


class GridGrammarError(ValueError):
    """A transcript does not follow the GRID grammar."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


@dataclass(frozen=True)
class GridSentence:
    command: str
    color: str
    preposition: str
    letter: str
    digit: int
    adverb: str

    def __post_init__(self):
        _check(0, self.command, COMMANDS)
        _check(1, self.color, COLORS)
        _check(2, self.preposition, PREPOSITIONS)
        _check(3, self.letter, LETTERS)
        if not isinstance(self.digit, int) or not 0 <= self.digit <= 9:
            raise GridGrammarError(f"position 4 (digit): {self.digit!r} not in 0-9", 4)
        _check(5, self.adverb, ADVERBS)

    def words(self):
        """Spoken word sequence, digits spelled out (what a recognizer returns)."""
        return [self.command, self.color, self.preposition, self.letter,
                DIGIT_WORDS[self.digit], self.adverb]

    def __str__(self):
        return " ".join(self.words())


def _check(position, token, domain):
    if token not in domain:
        extra = " (letter 'w' is excluded from the grammar)" if position == 3 and token == "w" else ""
        raise GridGrammarError(
            f"position {position} ({SLOTS[position]}): {token!r} not in {{{', '.join(domain)}}}{extra}",
            position,
        )


def parse_grid_sentence(tokens) -> GridSentence:
    """Validate six transcript tokens against their positional domains.

    ``tokens`` may be a list of strings or a single whitespace-separated
    string. Letters are case-insensitive; the digit may be written either as
    ``"9"`` or ``"nine"``.
    """
    if isinstance(tokens, str):
        tokens = tokens.split()
    tokens = [str(t).strip().lower() for t in tokens]
    if len(tokens) != 6:
        raise GridGrammarError(f"expected 6 tokens, got {len(tokens)}: {' '.join(tokens)!r}")
    command, color, prep, letter, digit, adverb = tokens
    if digit in DIGIT_WORDS:
        value = DIGIT_WORDS.index(digit)
    elif len(digit) == 1 and digit.isdigit():
        value = int(digit)
    else:
        raise GridGrammarError(f"position 4 (digit): {digit!r} is not a digit 0-9", 4)
    return GridSentence(command, color, prep, letter, value, adverb)
