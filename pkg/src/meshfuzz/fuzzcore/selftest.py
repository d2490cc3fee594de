"""Built-in oracle suites for the `selftest` subcommand.

Quick independent checks of the invariants the fuzzer leans on: the bucket
table, new-bit detection against a brute-force set oracle, frame and corpus
round-trips, scoring arithmetic, and the simulator's documented state table.
Each check prints one PASS/FAIL line.
"""

import io
from random import Random

import numpy as np


def _check_bucket_table() -> None:
    from meshfuzz.coverage import BUCKET_TABLE

    for count in range(256):
        if count == 0:
            expect = 0
        elif count == 1:
            expect = 1
        elif count == 2:
            expect = 2
        elif 3 <= count <= 4:
            expect = 3
        elif 5 <= count <= 8:
            expect = 4
        elif 9 <= count <= 16:
            expect = 5
        elif 17 <= count <= 32:
            expect = 6
        else:
            expect = 7
        assert BUCKET_TABLE[count] == expect, (count, BUCKET_TABLE[count], expect)


def _check_new_bits_oracle() -> None:
    from meshfuzz.coverage import (CoverageMap, VirginState, classify_counts,
                                   has_new_bits)

    rng = Random(7)
    size = 256
    for _ in range(200):
        virgin = VirginState(0, size)
        virgin.masks[:] = np.array([rng.randrange(256) for _ in range(size)],
                                   dtype=np.uint8)
        cells = np.zeros(size, dtype=np.uint8)
        for _ in range(rng.randrange(40)):
            cells[rng.randrange(size)] = rng.randrange(256)
        cov = CoverageMap(0, size, cells.copy())
        classify_counts(cov)
        before = virgin.masks.copy()
        novel, gain = has_new_bits(cov, virgin)
        expect_new = sum(
            1 for e in range(size)
            if cov.cells[e] and not (before[e] >> int(cov.cells[e])) & 1)
        assert gain.new_edges == expect_new, (gain.new_edges, expect_new)
        assert novel == (expect_new > 0)


def _check_frame_roundtrip() -> None:
    from meshfuzz.mccm import frames

    rng = Random(11)
    for msg_type in sorted(frames.KNOWN_TYPES):
        payload = bytes(rng.randrange(256) for _ in range(rng.randrange(200)))
        frame = frames.Frame(msg_type, payload)
        decoded, used = frames.decode_frame(frames.encode_frame(frame))
        assert decoded == frame and used == len(frames.encode_frame(frame))


def _check_corpus_roundtrip() -> None:
    from meshfuzz.mutation import (MessageSequence, deserialize_corpus,
                                   serialize_corpus)

    rng = Random(13)
    for _ in range(50):
        msgs = [bytes(rng.randrange(256) for _ in range(rng.randrange(40)))
                for _ in range(rng.randrange(1, 8))]
        seq = MessageSequence(msgs, origin="selftest")
        back = deserialize_corpus(serialize_corpus(seq), origin="selftest")
        assert back.messages == seq.messages


def _check_scoring_arithmetic() -> None:
    from meshfuzz.coverage import ChannelGain
    from meshfuzz.scoring import ExecutionRecord, ScoreWeights, score

    weights = ScoreWeights(0.7, 0.3, 0.1, (0.4, 0.2, 0.2, 0.2))
    gains = tuple(ChannelGain(i, 0, g)
                  for i, g in enumerate((0.01, 0.0, 0.005, 0.0)))
    got = score(ExecutionRecord(gains, 0.05), weights)
    assert abs(got.rc - 0.005) < 1e-15
    assert abs(got.re - 0.03) < 1e-15
    assert abs(got.s - 0.0125) < 1e-15


def _check_state_table() -> None:
    from meshfuzz.sutsim.harness import EmbeddedTarget
    from meshfuzz.sutsim import edges as E
    from meshfuzz.sutsim import tlv

    with EmbeddedTarget() as target:
        reply = target.send(tlv.pack_tlv(tlv.MSG_REGISTER, bytes([0x01]) + b"id"))
        assert reply[3] == tlv.ST_OK
        hits = target.entry_edges()
        for edge in (E.E_DISPATCH_REGISTER, E.E_REG_TYPE_NORMAL, E.E_REG_NEW):
            assert hits.get(edge), f"edge {edge} not recorded"
        reply = target.send(tlv.pack_tlv(tlv.MSG_SETUP, bytes([1, 0x12, 0x34, 0x10])))
        assert reply[3] == tlv.ST_OK
        assert target.entry_edges().get(E.E_PATH1)


CHECKS = [
    ("bucket-table", _check_bucket_table),
    ("new-bits-oracle", _check_new_bits_oracle),
    ("frame-roundtrip", _check_frame_roundtrip),
    ("corpus-roundtrip", _check_corpus_roundtrip),
    ("scoring-arithmetic", _check_scoring_arithmetic),
    ("simulator-state-table", _check_state_table),
]


def run_selftest(out: io.TextIOBase) -> bool:
    ok = True
    for name, check in CHECKS:
        try:
            check()
        except AssertionError as exc:
            ok = False
            print(f"FAIL {name}: {exc}", file=out)
        else:
            print(f"PASS {name}", file=out)
    return ok
