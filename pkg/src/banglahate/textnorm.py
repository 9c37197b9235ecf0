"""Deterministic normalization pipeline for Bangla social-media text.

Six rules, applied by :func:`normalize` in a fixed order:

    strip_urls -> lowercase_latin -> emoji_to_bangla -> merge_comma_numbers
    -> canonical_normalize -> replace_percent -> whitespace collapse / trim

Every rule is also exposed on its own and is a pure function: equal inputs
yield byte-identical outputs on every platform.  The emoji glosses, the
percent gloss, the Bangla punctuation set and the optional-joiner rules are
shipped as versioned TSV files under ``banglahate/data`` so the exact
behaviour is auditable and replaceable without code changes.
"""

from __future__ import annotations

import re
import string
import unicodedata
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

RawText = str
NormalizedText = str

BANGLA_VIRAMA = "্"

_WS_RE = re.compile(r"\s+")

# A URL is a maximal non-whitespace token prefixed by a scheme or by "www.".
# The pattern also consumes the whitespace run in front of the token so the
# deletion leaves a single separating space behind.
_URL_RE = re.compile(r"\s*(?<!\S)(?:[a-z][a-z0-9+.\-]*://|www\.)\S*", re.IGNORECASE)

_ASCII_LOWER_TABLE = str.maketrans(string.ascii_uppercase, string.ascii_lowercase)

# ASCII digits plus Bangla digits; commas strictly between two of these merge.
_DIGIT_CLASS = "0-9০-৯"
_NUMBER_COMMA_RE = re.compile(f"(?<=[{_DIGIT_CLASS}]),(?=[{_DIGIT_CLASS}])")

# Code points treated as emoji when they carry no lexicon entry.  This is the
# shipped detector: the mainstream emoji blocks plus variation selectors,
# the combining keycap, and the handful of emoji scattered through the
# miscellaneous-symbol ranges.
_EMOJI_CHAR_CLASS = (
    "\U0001f000-\U0001f2ff"
    "\U0001f300-\U0001faff"
    "☀-➿"
    "⬅-⬇"
    "⬛⬜⭐⭕"
    "‼⁉"
    "⃣︎️"
)


class LexiconError(ValueError):
    """A shipped or user-supplied data file failed validation."""

    def __init__(self, source: str, line_no: int, reason: str):
        self.source = source
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{source}, line {line_no}: {reason}")


def _data_path(name: str):
    return resources.files("banglahate").joinpath("data", name)


def _parse_tsv_pairs(lines: Iterable[str], source: str) -> tuple[dict[str, str], str]:
    """Parse ``key<TAB>value`` rows, ``#`` comments, and a version header."""
    entries: dict[str, str] = {}
    version = ""
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        if line.lstrip().startswith("#"):
            comment = line.lstrip().lstrip("#").strip()
            if comment.lower().startswith("version:"):
                version = comment.split(":", 1)[1].strip()
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise LexiconError(source, line_no, f"expected 2 tab-separated fields, got {len(parts)}")
        key, value = parts
        if not key:
            raise LexiconError(source, line_no, "empty key")
        if not value.strip():
            raise LexiconError(source, line_no, "empty value")
        if key in entries:
            raise LexiconError(source, line_no, f"duplicate key {key!r}")
        entries[key] = value
    return entries, version


def _is_bangla_gloss(value: str) -> bool:
    return all(ch.isspace() or "ঀ" <= ch <= "৿" for ch in value) and value.strip() != ""


class EmojiLexicon:
    """Emoji code-point sequences mapped to Bangla glosses.

    Glosses are NFC-normalized at load time; keys are kept verbatim.  Emoji
    that carry no entry are deleted by :func:`emoji_to_bangla`.
    """

    def __init__(self, entries: dict[str, str], version: str, source: str = "<memory>"):
        checked: dict[str, str] = {}
        for line_no, (key, value) in enumerate(entries.items(), start=1):
            gloss = unicodedata.normalize("NFC", value.strip())
            if not _is_bangla_gloss(gloss):
                raise LexiconError(source, line_no, f"gloss for {key!r} is not Bangla script: {value!r}")
            checked[key] = gloss
        self.entries = checked
        self.version = version
        # Longest keys first so multi-code-point sequences win over their prefixes.
        alternatives = sorted(self.entries, key=len, reverse=True)
        parts = [re.escape(k) for k in alternatives]
        parts.append(f"[{_EMOJI_CHAR_CLASS}]")
        self._pattern = re.compile("|".join(parts))

    def gloss(self, key: str) -> str | None:
        return self.entries.get(key)

    def __len__(self) -> int:
        return len(self.entries)


class TermLexicon:
    """Symbol-to-Bangla-term substitutions (currently just the percent sign)."""

    def __init__(self, entries: dict[str, str], version: str, source: str = "<memory>"):
        checked: dict[str, str] = {}
        for line_no, (key, value) in enumerate(entries.items(), start=1):
            gloss = unicodedata.normalize("NFC", value.strip())
            if not _is_bangla_gloss(gloss):
                raise LexiconError(source, line_no, f"gloss for {key!r} is not Bangla script: {value!r}")
            checked[key] = gloss
        if "%" not in checked:
            raise LexiconError(source, 0, "missing required entry for '%'")
        self.entries = checked
        self.version = version

    @property
    def percent_gloss(self) -> str:
        return self.entries["%"]


def load_emoji_lexicon(path: str | Path | None = None) -> EmojiLexicon:
    if path is None:
        source = "banglahate/data/emoji_lexicon.tsv"
        text = _data_path("emoji_lexicon.tsv").read_text(encoding="utf-8")
    else:
        source = str(path)
        text = Path(path).read_text(encoding="utf-8")
    entries, version = _parse_tsv_pairs(text.splitlines(), source)
    return EmojiLexicon(entries, version, source)


def load_term_lexicon(path: str | Path | None = None) -> TermLexicon:
    if path is None:
        source = "banglahate/data/term_lexicon.tsv"
        text = _data_path("term_lexicon.tsv").read_text(encoding="utf-8")
    else:
        source = str(path)
        text = Path(path).read_text(encoding="utf-8")
    entries, version = _parse_tsv_pairs(text.splitlines(), source)
    return TermLexicon(entries, version, source)


@lru_cache(maxsize=1)
def default_emoji_lexicon() -> EmojiLexicon:
    return load_emoji_lexicon()


@lru_cache(maxsize=1)
def default_term_lexicon() -> TermLexicon:
    return load_term_lexicon()


def _parse_rule_table(name: str) -> tuple[dict[str, tuple[str, str]], str]:
    text = _data_path(name).read_text(encoding="utf-8")
    source = f"banglahate/data/{name}"
    rows: dict[str, tuple[str, str]] = {}
    version = ""
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line:
            continue
        if line.lstrip().startswith("#"):
            comment = line.lstrip().lstrip("#").strip()
            if comment.lower().startswith("version:"):
                version = comment.split(":", 1)[1].strip()
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise LexiconError(source, line_no, f"expected 3 tab-separated fields, got {len(parts)}")
        codepoint, char_name, policy = parts
        rows[chr(int(codepoint, 16))] = (char_name, policy)
    return rows, version


@lru_cache(maxsize=1)
def _joiner_rules() -> dict[str, str]:
    rows, _ = _parse_rule_table("optional_joiners.tsv")
    valid = {"always_remove", "remove_unless_after_virama"}
    for ch, (name, policy) in rows.items():
        if policy not in valid:
            raise LexiconError("banglahate/data/optional_joiners.tsv", 0,
                               f"unknown policy {policy!r} for {name}")
    return {ch: policy for ch, (_, policy) in rows.items()}


@lru_cache(maxsize=1)
def _punctuation_set() -> frozenset[str]:
    rows, _ = _parse_rule_table("bangla_punctuation.tsv")
    return frozenset(rows)


def _collapse(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


def strip_urls(text: RawText) -> RawText:
    """Delete every whitespace-delimited token prefixed by a scheme or ``www.``."""
    if not _URL_RE.search(text):
        return text
    return _collapse(_URL_RE.sub(" ", text))


def lowercase_latin(text: RawText) -> RawText:
    """Lowercase Basic Latin letters only; every other script is untouched."""
    return text.translate(_ASCII_LOWER_TABLE)


def emoji_to_bangla(text: RawText, lexicon: EmojiLexicon | None = None) -> RawText:
    """Replace lexicon-mapped emoji with space-padded glosses; delete the rest."""
    lex = lexicon if lexicon is not None else default_emoji_lexicon()

    def repl(m: re.Match) -> str:
        gloss = lex.gloss(m.group(0))
        return f" {gloss} " if gloss is not None else ""

    if not lex._pattern.search(text):
        return text
    return _collapse(lex._pattern.sub(repl, text))


def merge_comma_numbers(text: RawText) -> RawText:
    """Drop commas strictly between digits (ASCII or Bangla); keep all others."""
    return _NUMBER_COMMA_RE.sub("", text)


def canonical_normalize(text: RawText) -> RawText:
    """Unicode NFC plus Bangla-specific canonicalization.

    After NFC, zero-width joiners are removed wherever the shipped rule table
    marks them optional (kept only directly after the Bangla virama), and the
    shipped Bangla punctuation set (dari, double dari, ...) is deleted.  NFC
    is re-applied at the end because removing a joiner can unblock canonical
    composition of the characters around it.
    """
    out = unicodedata.normalize("NFC", text)
    joiners = _joiner_rules()
    punct = _punctuation_set()
    kept: list[str] = []
    changed = False
    prev = ""
    for ch in out:
        policy = joiners.get(ch)
        if policy == "always_remove" or (
            policy == "remove_unless_after_virama" and prev != BANGLA_VIRAMA
        ):
            changed = True
        elif ch in punct:
            changed = True
        else:
            kept.append(ch)
        prev = ch
    result = unicodedata.normalize("NFC", "".join(kept))
    return _collapse(result) if changed else result


def replace_percent(text: RawText, terms: TermLexicon | None = None) -> RawText:
    """Replace each ``%`` with a single space plus the shipped Bangla gloss."""
    lex = terms if terms is not None else default_term_lexicon()
    if "%" not in text:
        return text
    return _collapse(text.replace("%", f" {lex.percent_gloss}"))


def normalize(
    text: RawText,
    lexicon: EmojiLexicon | None = None,
    terms: TermLexicon | None = None,
) -> NormalizedText:
    """Apply the full pipeline in its fixed order and collapse whitespace.

    The result is idempotent: ``normalize(normalize(t)) == normalize(t)``.
    """
    out = strip_urls(text)
    out = lowercase_latin(out)
    out = emoji_to_bangla(out, lexicon)
    out = merge_comma_numbers(out)
    out = canonical_normalize(out)
    out = replace_percent(out, terms)
    return _collapse(out)
