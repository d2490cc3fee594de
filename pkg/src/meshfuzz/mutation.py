"""Message-sequence test cases and the havoc-style mutation engine.

A test case is an ordered list of framed protocol messages. Mutants are
produced by stacking 1-4 randomly chosen operators (bit/byte edits,
interesting-value substitution, range duplicate/delete, message-level
duplicate/drop/swap, and cross-seed splice). The stream is a pure function
of (input, rng seed, energy, donor list).
"""

import struct
from dataclasses import dataclass
from random import Random
from typing import Iterator, Sequence

from meshfuzz.errors import ParseError

MAX_MESSAGES = 64
MAX_MESSAGE_LEN = 4096

CORPUS_MAGIC = b"MCSQ"
CORPUS_VERSION = 0x01

INTERESTING_8 = (0x00, 0x01, 0x7F, 0x80, 0xFF)
INTERESTING_16 = (0x0000, 0x0001, 0x007F, 0x0080, 0x00FF, 0x7FFF, 0xFFFF)

ARITH_MAX = 35
SPLICE_PROB = 0.2
MAX_STACK = 4


@dataclass
class MessageSequence:
    """Ordered framed messages plus the id of the seed they came from."""

    messages: list[bytes]
    origin: str = "initial-corpus"

    def __post_init__(self):
        if not 1 <= len(self.messages) <= MAX_MESSAGES:
            raise ParseError(
                f"message count {len(self.messages)} outside 1..{MAX_MESSAGES}", 0)
        for i, msg in enumerate(self.messages):
            if len(msg) > MAX_MESSAGE_LEN:
                raise ParseError(f"message {i} longer than {MAX_MESSAGE_LEN}", 0)

    def total_bytes(self) -> int:
        return sum(len(m) for m in self.messages)


@dataclass(frozen=True)
class MutationBudget:
    """How many mutants to emit and the rng seed that makes the stream
    reproducible."""

    energy: int
    rng_seed: int

    def __post_init__(self):
        if self.energy < 0:
            raise ValueError("energy must be nonnegative")


def serialize_corpus(seq: MessageSequence) -> bytes:
    """Corpus file format: 'MCSQ', version byte, u32le message count, then
    per message a u32le length followed by the payload bytes."""
    parts = [CORPUS_MAGIC, bytes([CORPUS_VERSION]), struct.pack("<I", len(seq.messages))]
    for msg in seq.messages:
        parts.append(struct.pack("<I", len(msg)))
        parts.append(msg)
    return b"".join(parts)


def deserialize_corpus(data: bytes, origin: str = "corpus-file") -> MessageSequence:
    if len(data) < 4 or data[:4] != CORPUS_MAGIC:
        raise ParseError("bad corpus magic", 0)
    if len(data) < 5:
        raise ParseError("truncated before version byte", 4)
    if data[4] != CORPUS_VERSION:
        raise ParseError(f"unsupported corpus version {data[4]}", 4)
    if len(data) < 9:
        raise ParseError("truncated before message count", 5)
    (count,) = struct.unpack_from("<I", data, 5)
    if not 1 <= count <= MAX_MESSAGES:
        raise ParseError(f"message count {count} outside 1..{MAX_MESSAGES}", 5)
    offset = 9
    messages = []
    for i in range(count):
        if offset + 4 > len(data):
            raise ParseError(f"truncated in length of message {i}", offset)
        (length,) = struct.unpack_from("<I", data, offset)
        if length > MAX_MESSAGE_LEN:
            raise ParseError(f"message {i} length {length} exceeds {MAX_MESSAGE_LEN}",
                             offset)
        offset += 4
        if offset + length > len(data):
            raise ParseError(f"truncated in body of message {i}", offset)
        messages.append(bytes(data[offset:offset + length]))
        offset += length
    if offset != len(data):
        raise ParseError("trailing bytes after last message", offset)
    return MessageSequence(messages, origin=origin)


# ---------------------------------------------------------------------------
# Mutation operators. Each takes (rng, msgs) where msgs is a list[bytearray],
# mutates it in place, and returns True, or returns False when it does not
# apply (the engine then draws another operator).
# ---------------------------------------------------------------------------

def _pick_nonempty(rng: Random, msgs: list[bytearray]) -> int | None:
    candidates = [i for i, m in enumerate(msgs) if m]
    return rng.choice(candidates) if candidates else None


def _op_bit_flip(rng: Random, msgs: list[bytearray]) -> bool:
    i = _pick_nonempty(rng, msgs)
    if i is None:
        return False
    pos = rng.randrange(len(msgs[i]))
    msgs[i][pos] ^= 1 << rng.randrange(8)
    return True


def _op_byte_set(rng: Random, msgs: list[bytearray]) -> bool:
    i = _pick_nonempty(rng, msgs)
    if i is None:
        return False
    pos = rng.randrange(len(msgs[i]))
    msgs[i][pos] = rng.randrange(256)
    return True


def _op_byte_arith(rng: Random, msgs: list[bytearray]) -> bool:
    i = _pick_nonempty(rng, msgs)
    if i is None:
        return False
    pos = rng.randrange(len(msgs[i]))
    delta = rng.randrange(1, ARITH_MAX + 1)
    if rng.random() < 0.5:
        delta = -delta
    msgs[i][pos] = (msgs[i][pos] + delta) & 0xFF
    return True


def _op_interesting(rng: Random, msgs: list[bytearray]) -> bool:
    i = _pick_nonempty(rng, msgs)
    if i is None:
        return False
    msg = msgs[i]
    if len(msg) >= 2 and rng.random() < 0.5:
        pos = rng.randrange(len(msg) - 1)
        struct.pack_into("<H", msg, pos, rng.choice(INTERESTING_16))
    else:
        pos = rng.randrange(len(msg))
        msg[pos] = rng.choice(INTERESTING_8)
    return True


def _op_range_duplicate(rng: Random, msgs: list[bytearray]) -> bool:
    i = _pick_nonempty(rng, msgs)
    if i is None:
        return False
    msg = msgs[i]
    start = rng.randrange(len(msg))
    length = rng.randrange(1, min(len(msg) - start, 64) + 1)
    dest = rng.randrange(len(msg) + 1)
    chunk = msg[start:start + length]
    msgs[i] = (msg[:dest] + chunk + msg[dest:])[:MAX_MESSAGE_LEN]
    return True


def _op_range_delete(rng: Random, msgs: list[bytearray]) -> bool:
    i = _pick_nonempty(rng, msgs)
    if i is None:
        return False
    msg = msgs[i]
    start = rng.randrange(len(msg))
    length = rng.randrange(1, len(msg) - start + 1)
    del msg[start:start + length]
    return True


def _op_message_duplicate(rng: Random, msgs: list[bytearray]) -> bool:
    if len(msgs) >= MAX_MESSAGES:
        return False
    i = rng.randrange(len(msgs))
    msgs.insert(rng.randrange(len(msgs) + 1), bytearray(msgs[i]))
    return True


def _op_message_drop(rng: Random, msgs: list[bytearray]) -> bool:
    if len(msgs) <= 1:
        return False
    del msgs[rng.randrange(len(msgs))]
    return True


def _op_message_swap(rng: Random, msgs: list[bytearray]) -> bool:
    if len(msgs) < 2:
        return False
    i = rng.randrange(len(msgs))
    j = rng.randrange(len(msgs))
    if i == j:
        j = (j + 1) % len(msgs)
    msgs[i], msgs[j] = msgs[j], msgs[i]
    return True


CORE_OPERATORS = (
    _op_bit_flip,
    _op_byte_set,
    _op_byte_arith,
    _op_interesting,
    _op_range_duplicate,
    _op_range_delete,
    _op_message_duplicate,
    _op_message_drop,
    _op_message_swap,
)


def _op_splice(rng: Random, msgs: list[bytearray], donors: Sequence[MessageSequence]) -> bool:
    """Replace a message suffix with a donor's suffix."""
    if not donors:
        return False
    donor = rng.choice(donors)
    keep = rng.randrange(1, len(msgs) + 1)
    tail_from = rng.randrange(len(donor.messages))
    tail = [bytearray(m) for m in donor.messages[tail_from:]]
    merged = msgs[:keep] + tail
    msgs[:] = merged[:MAX_MESSAGES]
    return True


def mutate(seq: MessageSequence, budget: MutationBudget,
           donors: Sequence[MessageSequence] = ()) -> Iterator[MessageSequence]:
    """Yield exactly budget.energy mutants of seq.

    Every mutant satisfies the MessageSequence invariants; inapplicable
    operator draws (dropping the only message, splicing without donors) fall
    through to another operator.
    """
    rng = Random(budget.rng_seed)
    for _ in range(budget.energy):
        msgs = [bytearray(m) for m in seq.messages]
        depth = rng.randrange(1, MAX_STACK + 1)
        for _ in range(depth):
            applied = False
            while not applied:
                if donors and rng.random() < SPLICE_PROB:
                    applied = _op_splice(rng, msgs, donors)
                else:
                    applied = rng.choice(CORE_OPERATORS)(rng, msgs)
        yield MessageSequence([bytes(m) for m in msgs], origin=seq.origin)
