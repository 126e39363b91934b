"""Word and character vocabularies for the pattern scorer.

Both maps carry fixed reserved entries at the front so that ids are stable
across runs: words reserve <unk>=0, <pad>=1 and the four entity type tokens
PER=2, LOC=3, ORG=4, MISC=5; characters reserve <unk_char>=0, <pad_char>=1.
Any lookup succeeds — unseen strings fall back to the unknown id.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..collapse import TYPE_TOKENS
from ..errors import ConfigError

WORD_UNK = "<unk>"
WORD_PAD = "<pad>"
CHAR_UNK = "<unk_char>"
CHAR_PAD = "<pad_char>"

RESERVED_WORDS = (WORD_UNK, WORD_PAD) + TYPE_TOKENS
RESERVED_CHARS = (CHAR_UNK, CHAR_PAD)

WORD_UNK_ID = 0
CHAR_UNK_ID = 0
CHAR_PAD_ID = 1


@dataclass(frozen=True)
class Vocab:
    """Immutable word→id and char→id maps with the reserved prefix."""

    word_to_id: dict[str, int]
    char_to_id: dict[str, int]

    def __post_init__(self):
        for mapping, reserved, what in (
            (self.word_to_id, RESERVED_WORDS, "word"),
            (self.char_to_id, RESERVED_CHARS, "char"),
        ):
            for i, token in enumerate(reserved):
                if mapping.get(token) != i:
                    raise ConfigError(
                        f"{what} vocabulary must map {token!r} to id {i}"
                    )
            ids = sorted(mapping.values())
            if ids != list(range(len(mapping))):
                raise ConfigError(f"{what} vocabulary ids are not contiguous from 0")

    @property
    def num_words(self) -> int:
        return len(self.word_to_id)

    @property
    def num_chars(self) -> int:
        return len(self.char_to_id)

    def word_id(self, token: str) -> int:
        return self.word_to_id.get(token, WORD_UNK_ID)

    def char_id(self, ch: str) -> int:
        return self.char_to_id.get(ch, CHAR_UNK_ID)

    def word_list(self) -> list[str]:
        """All words ordered by id (a serializable description of the map)."""
        return sorted(self.word_to_id, key=self.word_to_id.get)

    def char_list(self) -> list[str]:
        return sorted(self.char_to_id, key=self.char_to_id.get)

    @classmethod
    def from_lists(cls, words: list[str], chars: list[str]) -> "Vocab":
        """Rebuild a vocabulary from its id-ordered word and char lists."""
        if len(set(words)) != len(words) or len(set(chars)) != len(chars):
            raise ConfigError("vocabulary lists contain duplicates")
        return cls(
            word_to_id={w: i for i, w in enumerate(words)},
            char_to_id={c: i for i, c in enumerate(chars)},
        )


def build_vocab(pattern_token_lists) -> Vocab:
    """Collect a vocabulary from an iterable of token-string sequences.

    Tokens are the items of collapsed patterns, so the entity type tokens
    usually occur in the input as well; they are already reserved and are not
    added twice.  Non-reserved entries are sorted so the same data always
    yields the same ids.
    """
    words: set[str] = set()
    chars: set[str] = set()
    for tokens in pattern_token_lists:
        for token in tokens:
            words.add(token)
            chars.update(token)
    word_list = list(RESERVED_WORDS) + sorted(words - set(RESERVED_WORDS))
    char_list = list(RESERVED_CHARS) + sorted(chars - set(RESERVED_CHARS))
    return Vocab.from_lists(word_list, char_list)
