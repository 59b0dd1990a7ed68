"""Rule-based Turkish text simplification.

Lines are tokenized on whitespace, case-folded with Turkish dotted/dotless I
rules, stripped of stopwords (word pairs first, then single words) and the
surviving words are reduced to stems by longest-first suffix stripping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import ConfigurationError

VOWELS = frozenset("aeıioöuüâîû")
_MEMO_LIMIT = 1 << 18


@dataclass(frozen=True)
class Token:
    surface: str
    normalized: str


@dataclass(frozen=True)
class SuffixRule:
    suffix: str
    min_stem_chars: int = 2

    def __post_init__(self):
        if not self.suffix:
            raise ConfigurationError("suffix must be non-empty")
        if self.min_stem_chars < 2:
            raise ConfigurationError(
                f"min_stem_chars must be >= 2 (suffix {self.suffix!r}: {self.min_stem_chars})"
            )


@dataclass(frozen=True)
class StopwordLexicon:
    unigrams: frozenset = frozenset()
    bigrams: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "unigrams", frozenset(turkish_lowercase(w) for w in self.unigrams))
        object.__setattr__(
            self,
            "bigrams",
            frozenset((turkish_lowercase(a), turkish_lowercase(b)) for a, b in self.bigrams),
        )


@dataclass(frozen=True)
class SimplifierConfig:
    lexicon: StopwordLexicon
    rules: tuple = ()
    max_strip_passes: int = 3
    # memo tables; outputs depend only on (input, config)
    _stems: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)
    _norms: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.max_strip_passes < 1:
            raise ConfigurationError("max_strip_passes must be >= 1")
        # stable sort keeps file order among equal lengths
        ordered = tuple(sorted(self.rules, key=lambda r: -len(r.suffix)))
        object.__setattr__(self, "rules", ordered)

    @property
    def min_token_chars(self) -> int:
        return min((r.min_stem_chars for r in self.rules), default=1)

    @classmethod
    def from_files(cls, stopwords=None, suffixes=None, max_strip_passes: int = 3):
        """Build a config from rule files; ``None`` selects the shipped file."""
        return cls(
            load_stopwords(stopwords),
            tuple(load_suffix_rules(suffixes)),
            max_strip_passes,
        )


def turkish_lowercase(text: str) -> str:
    return text.replace("I", "ı").replace("İ", "i").lower()


def _data_text(name: str) -> str:
    return resources.files("distnlp").joinpath("data").joinpath(name).read_text(encoding="utf-8")


def _content_lines(text: str):
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


def load_stopwords(path=None) -> StopwordLexicon:
    """Read a stopword file: one entry per line, two-word lines are bigrams."""
    text = _data_text("stopwords.txt") if path is None else Path(path).read_text(encoding="utf-8")
    unigrams, bigrams = set(), set()
    for line in _content_lines(text):
        words = line.split()
        if len(words) == 1:
            unigrams.add(words[0])
        elif len(words) == 2:
            bigrams.add((words[0], words[1]))
        else:
            raise ConfigurationError(f"stopword entry {line!r} has more than two words")
    return StopwordLexicon(frozenset(unigrams), frozenset(bigrams))


def load_suffix_rules(path=None) -> list[SuffixRule]:
    text = _data_text("suffixes.tsv") if path is None else Path(path).read_text(encoding="utf-8")
    rules = []
    for line in _content_lines(text):
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) != 2:
            raise ConfigurationError(f"suffix rule {line!r}: expected suffix<TAB>min_stem_chars")
        try:
            rules.append(SuffixRule(turkish_lowercase(parts[0].strip()), int(parts[1])))
        except ValueError as exc:
            raise ConfigurationError(f"suffix rule {line!r}: {exc}") from None
    return rules


_default_config = None


def default_config() -> SimplifierConfig:
    global _default_config
    if _default_config is None:
        _default_config = SimplifierConfig.from_files()
    return _default_config


def strip_edges(word: str) -> str:
    start, end = 0, len(word)
    while start < end and not word[start].isalnum():
        start += 1
    while end > start and not word[end - 1].isalnum():
        end -= 1
    return word[start:end]


def normalize(surface: str) -> str:
    return turkish_lowercase(strip_edges(surface))


def tokenize(line: str) -> list[Token]:
    tokens = []
    for surface in line.split():
        normalized = normalize(surface)
        if normalized:
            tokens.append(Token(surface, normalized))
    return tokens


def _normalized_words(line: str, config: SimplifierConfig) -> list[str]:
    cache = config._norms
    words = []
    for surface in line.split():
        norm = cache.get(surface)
        if norm is None:
            if len(cache) >= _MEMO_LIMIT:
                cache.clear()
            norm = cache[surface] = normalize(surface)
        if norm:
            words.append(norm)
    return words


def _is_numeric(word: str) -> bool:
    return any(ch.isdigit() for ch in word)


def _rule_applies(word: str, rule: SuffixRule) -> bool:
    if not word.endswith(rule.suffix):
        return False
    stem = word[: len(word) - len(rule.suffix)]
    if len(stem) < rule.min_stem_chars or not stem[-1].isalpha():
        return False
    if len(rule.suffix) == 1 and rule.suffix in VOWELS:
        # a bare vowel ending only follows a single consonant after a vowel
        if stem[-1] in VOWELS or stem[-2] not in VOWELS:
            return False
    return True


def stem(word: str, config: SimplifierConfig) -> str:
    """Strip the longest applicable suffix, up to ``config.max_strip_passes`` times.

    A rule applies when the word ends with it and the remaining stem keeps at
    least ``min_stem_chars`` characters, ending in a letter. Single-vowel
    suffixes additionally require a vowel-consonant stem ending, which keeps
    words like "işçi" or "karşı" intact.
    """
    cached = config._stems.get(word)
    if cached is not None:
        return cached
    result = word
    for _ in range(config.max_strip_passes):
        for rule in config.rules:
            if _rule_applies(result, rule):
                result = result[: len(result) - len(rule.suffix)]
                break
        else:
            break
    if len(config._stems) >= _MEMO_LIMIT:
        config._stems.clear()
    config._stems[word] = result
    return result


def _drop_bigrams(words: list[str], bigrams) -> list[str]:
    if not bigrams or len(words) < 2:
        return words
    kept = []
    i, n = 0, len(words)
    while i < n:
        if i + 1 < n and (words[i], words[i + 1]) in bigrams:
            i += 2
            continue
        kept.append(words[i])
        i += 1
    return kept


def _filter(words: list[str], config: SimplifierConfig, min_chars: int) -> list[str]:
    lexicon = config.lexicon
    while True:
        out = _drop_bigrams(words, lexicon.bigrams)
        out = [
            w for w in out
            if w not in lexicon.unigrams and (len(w) >= min_chars or _is_numeric(w))
        ]
        if out == words:
            return out
        words = out


def simplify_words(words: Iterable[str], config: SimplifierConfig) -> list[str]:
    lexicon = config.lexicon
    words = _drop_bigrams(list(words), lexicon.bigrams)
    words = [w for w in words if w not in lexicon.unigrams]
    stems = [w if _is_numeric(w) else stem(w, config) for w in words]
    # stems can themselves be stopwords or form new stopword pairs
    return _filter(stems, config, config.min_token_chars)


def simplify_line(line: str, config: SimplifierConfig | None = None) -> str:
    """Simplified form of one line: surviving stems joined by single spaces."""
    config = config or default_config()
    return " ".join(simplify_words(_normalized_words(line, config), config))
