import warnings

import numpy as np
import pytest

from pairsight.core import EventStream, FrameSequence
from pairsight.errors import ParseError
from pairsight.io import (DuplicateHitWarning, OrderWarning, iter_binary_chunks, read_events,
                          read_frames, write_events, write_frames)


def random_stream(n, seed=0, width=256, height=256, q=1.5625):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.integers(0, 10 * n + 1, n))
    return EventStream(t, rng.integers(0, width, n), rng.integers(0, height, n),
                       rng.integers(0, 2, n), width, height, q)


@pytest.mark.parametrize("binary", [False, True])
def test_event_round_trip(tmp_path, binary):
    s = random_stream(100_000, seed=1)
    p = tmp_path / "ev"
    write_events(s, p, binary=binary, chunk_size=30_000)
    back = read_events(p)
    assert back == s
    assert back.t.dtype == np.int64 and back.time_quantum == s.time_quantum


def test_binary_and_text_agree(tmp_path):
    s = random_stream(5000, seed=2, q=0.1)
    write_events(s, tmp_path / "a.txt")
    write_events(s, tmp_path / "a.bin", binary=True, chunk_size=1024)
    assert read_events(tmp_path / "a.txt") == read_events(tmp_path / "a.bin")
    chunks = list(iter_binary_chunks(tmp_path / "a.bin"))
    assert [n for _, n in chunks] == [1024] * 4 + [904]


def test_text_format_is_plain(tmp_path):
    s = EventStream([3, 7], [1, 2], [4, 5], [0, 1], 8, 6, 0.5)
    write_events(s, tmp_path / "e.txt")
    assert (tmp_path / "e.txt").read_text() == "pairsight-events v1 8 6 0.5\n3 1 4 S\n7 2 5 I\n"


def test_pixel_outside_sensor_names_line(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("pairsight-events v1 8 6 1\n0 1 1 S\n5 8 1 I\n")
    with pytest.raises(ParseError) as err:
        read_events(p)
    assert err.value.line == 3 and "line 3" in str(err.value)


@pytest.mark.parametrize("body", ["0 1 1 X\n", "0 1 S\n", "a 1 1 S\n", "-4 1 1 S\n"])
def test_malformed_records(tmp_path, body):
    p = tmp_path / "bad.txt"
    p.write_text("pairsight-events v1 8 6 1\n0 0 0 S\n" + body)
    with pytest.raises(ParseError) as err:
        read_events(p)
    assert err.value.line == 3


def test_binary_out_of_range_record(tmp_path):
    p = tmp_path / "e.bin"
    write_events(EventStream([0, 1], [1, 12], [0, 0], [0, 1], 16, 6, 1.0), p, binary=True)
    data = bytearray(p.read_bytes())
    # shrink the declared width to 8 so record 1 falls outside it
    data[8:12] = (8).to_bytes(4, "little")
    p.write_bytes(bytes(data))
    with pytest.raises(ParseError, match="record 1"):
        read_events(p)


def test_truncated_binary(tmp_path):
    p = tmp_path / "e.bin"
    write_events(random_stream(100), p, binary=True)
    p.write_bytes(p.read_bytes()[:-5])
    with pytest.raises(ParseError, match="truncated"):
        read_events(p)


def test_empty_and_missing_header(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("pairsight-events v1 8 6 1\n")
    s = read_events(p)
    assert len(s) == 0 and (s.width, s.height) == (8, 6)
    write_events(s, tmp_path / "empty.bin", binary=True)
    assert len(read_events(tmp_path / "empty.bin")) == 0
    (tmp_path / "none.txt").write_text("")
    with pytest.raises(ParseError, match="missing header"):
        read_events(tmp_path / "none.txt")
    (tmp_path / "nohead.txt").write_text("0 1 1 S\n")
    with pytest.raises(ParseError):
        read_events(tmp_path / "nohead.txt")


def test_out_of_order_warns_and_resorts(tmp_path):
    p = tmp_path / "o.txt"
    p.write_text("pairsight-events v1 8 6 1\n5 1 1 S\n2 2 2 I\n9 3 3 S\n")
    with pytest.warns(OrderWarning):
        s = read_events(p)
    assert s.t.tolist() == [5, 2, 9]
    with pytest.warns(OrderWarning):
        s = read_events(p, resort=True)
    assert s.t.tolist() == [2, 5, 9] and s.px.tolist() == [2, 1, 3]


def random_frames(n_frames, seed=0, width=64, height=32):
    rng = np.random.default_rng(seed)
    n = 5 * n_frames
    return FrameSequence(rng.integers(0, n_frames, n), rng.integers(0, width, n),
                         rng.integers(0, height, n), rng.integers(0, 2, n), n_frames, 100.0,
                         width, height)


def test_frame_round_trip(tmp_path):
    fr = random_frames(1000, seed=3)
    write_frames(fr, tmp_path / "f.txt")
    back = read_frames(tmp_path / "f.txt")
    assert back == fr
    assert back.n_frames == 1000 and back.exposure == 100.0


def test_frame_trailing_empty_frames_kept(tmp_path):
    fr = FrameSequence([0], [1], [1], [0], 5, 10.0, 4, 4)
    write_frames(fr, tmp_path / "f.txt")
    assert read_frames(tmp_path / "f.txt").n_frames == 5
    empty = FrameSequence([], [], [], [], 3, 10.0, 4, 4)
    write_frames(empty, tmp_path / "g.txt")
    assert read_frames(tmp_path / "g.txt") == empty


def test_frame_duplicate_hit_collapsed(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("pairsight-frames v1 4 4 10\nF 0\n1 1 S\n1 1 S\n1 1 I\n")
    with pytest.warns(DuplicateHitWarning):
        fr = read_frames(p)
    assert fr.n_hits == 2


def test_frame_parse_errors(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("F 0\n1 1 S\n")
    with pytest.raises(ParseError):
        read_frames(p)
    p.write_text("")
    with pytest.raises(ParseError, match="missing header"):
        read_frames(p)
    p.write_text("pairsight-frames v1 4 4 10\n1 1 S\n")
    with pytest.raises(ParseError) as err:
        read_frames(p)
    assert err.value.line == 2
    p.write_text("pairsight-frames v1 4 4 10\nF 0\n4 1 S\n")
    with pytest.raises(ParseError, match="outside"):
        read_frames(p)


def test_no_warnings_on_clean_files(tmp_path):
    write_events(random_stream(1000), tmp_path / "e.txt")
    write_frames(random_frames(50), tmp_path / "f.txt")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        read_events(tmp_path / "e.txt")
        read_frames(tmp_path / "f.txt")
