import json

import pytest

from convfilter.corpus import (
    TASKS, CorpusError, FineLabelSet, SpeakerRole, compute_stats, conversation_from_record,
    format_conversation, parse_corpus, read_stats_csv, split_corpus, write_corpus,
)
from convfilter.extract.labels import label_map

from conftest import make_conv


def _record(speaker="DR", idx=(0, 1)):
    return {
        "id": "a",
        "utterances": [{"idx": i, "speaker": speaker, "text": f"u{i}", "labels": []} for i in idx],
        "gold_extraction": {"SYM": [], "MED": [], "COM": []},
    }


def test_parse_one_line(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text(json.dumps(_record()) + "\n")
    convs = parse_corpus(p)
    assert len(convs) == 1 and len(convs[0]) == 2


def test_unknown_speaker_names_line(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text(json.dumps(_record(speaker="XX")) + "\n")
    with pytest.raises(CorpusError, match="line 1"):
        parse_corpus(p)


def test_malformed_json_names_line(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text(json.dumps(_record()) + "\n{not json\n")
    with pytest.raises(CorpusError, match="line 2"):
        parse_corpus(p)


def test_noncontiguous_indices_rejected():
    with pytest.raises(ValueError):
        conversation_from_record(_record(idx=(0, 2)))


def test_empty_conversation_rejected():
    rec = _record()
    rec["utterances"] = []
    with pytest.raises(ValueError):
        conversation_from_record(rec)


def test_unknown_gold_label_rejected(tmp_path):
    rec = _record()
    rec["gold_extraction"]["SYM"] = ["Elbows"]
    p = tmp_path / "c.jsonl"
    p.write_text(json.dumps(rec) + "\n")
    parse_corpus(p)
    with pytest.raises(CorpusError):
        parse_corpus(p, label_map())


def test_unknown_fine_label_rejected():
    with pytest.raises(ValueError):
        FineLabelSet.from_codes(["XYZ"])


def test_roles_are_exactly_three():
    assert [r.code for r in SpeakerRole] == ["DR", "PT", "OT"]


def test_round_trip_byte_identical(tmp_path, small_corpus):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    write_corpus(small_corpus, a)
    again = parse_corpus(a)
    write_corpus(again, b)
    assert a.read_bytes() == b.read_bytes()
    assert again == list(small_corpus)


def test_format_is_one_line(small_corpus):
    assert "\n" not in format_conversation(small_corpus[0])


def test_split_sizes_and_partition(small_corpus):
    convs = small_corpus[:10]
    tr, va, te = split_corpus(convs, 2, 3, seed=5)
    assert (len(tr), len(va), len(te)) == (5, 2, 3)
    ids = [c.id for c in tr + va + te]
    assert sorted(ids) == sorted(c.id for c in convs)
    assert len(set(ids)) == len(ids)


def test_split_deterministic(small_corpus):
    assert split_corpus(small_corpus, 3, 3, 9) == split_corpus(small_corpus, 3, 3, 9)


def test_split_too_large(small_corpus):
    with pytest.raises(ValueError):
        split_corpus(small_corpus[:10], 11, 0, 1)


def test_stats_direct_count():
    conv = make_conv([("DR", "a", []), ("PT", "b", ["SYM"]), ("DR", "c", []), ("PT", "d", [])])
    s = compute_stats([conv])
    assert s.mean_fractions["SYM"] == 0.25
    assert s.mean_first_position["SYM"] == 0.25


def test_stats_excludes_conversations_without_label():
    a = make_conv([("DR", "a", ["MED"]), ("PT", "b", [])], "a")
    b = make_conv([("DR", "a", []), ("PT", "b", [])], "b")
    s = compute_stats([a, b])
    assert s.mean_first_position["MED"] == 0.0
    assert s.mean_fractions["MED"] == 0.25


def test_stats_empty_rejected():
    with pytest.raises(ValueError):
        compute_stats([])


def test_stats_csv_round_trip(tmp_path, small_corpus):
    s = compute_stats(small_corpus)
    p = tmp_path / "s.csv"
    s.write_csv(p)
    assert p.read_text().splitlines()[0] == "metric,value"
    back = read_stats_csv(p)
    assert back["conversation_count"] == len(small_corpus)
    for t in TASKS:
        assert 0.0 <= back[f"{t}_mean_fraction"] <= 1.0
