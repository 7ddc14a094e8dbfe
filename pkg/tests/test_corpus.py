import json

import pytest

from phishscan.blacklist import BlacklistStatus, BlacklistVerdict
from phishscan.corpus import (
    AccountProfile,
    CorpusEntry,
    CorpusError,
    CorpusVersionError,
    InvalidTweetError,
    Label,
    LabelSource,
    LabelValue,
    LabeledCorpus,
    Tweet,
    apply_labels,
    ingest_stream,
    load,
    persist,
    tweet_from_json,
)

T0 = 1_600_000_000


def make_profile(**overrides):
    base = dict(
        user_id="u1",
        created_at=T0 - 90 * 86400,
        followers_count=120,
        followees_count=80,
        listed_count=2,
        has_description=True,
        statuses_count=340,
        protected=False,
    )
    base.update(overrides)
    return AccountProfile(**base)


def make_tweet(**overrides):
    base = dict(
        id="t1",
        text="check this out http://example.com/x",
        created_at=T0,
        urls=("http://example.com/x",),
        retweet_count=3,
        author=make_profile(),
    )
    base.update(overrides)
    return Tweet(**base)


def record(tweet_id="t1", text="go http://a.example/p", created="2020-09-13T12:26:40Z", urls=None):
    return {
        "id": tweet_id,
        "text": text,
        "created_at": created,
        "urls": ["http://a.example/p"] if urls is None else urls,
        "retweet_count": 0,
        "user": {
            "id": "u9",
            "created_at": "2019-01-01T00:00:00Z",
            "followers_count": 10,
            "friends_count": 20,
            "listed_count": 0,
            "description": "  hello  ",
            "statuses_count": 5,
            "protected": False,
        },
    }


def write_jsonl(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")


def test_tweet_invariants():
    with pytest.raises(InvalidTweetError):
        make_tweet(text="")
    with pytest.raises(InvalidTweetError):
        make_tweet(text="x" * 141)
    make_tweet(text="x" * 140)  # at the limit is fine
    with pytest.raises(InvalidTweetError):
        make_tweet(urls=())
    with pytest.raises(InvalidTweetError):
        make_tweet(retweet_count=-1)
    with pytest.raises(InvalidTweetError):
        make_tweet(author=make_profile(created_at=T0 + 1))
    with pytest.raises(InvalidTweetError):
        make_profile(followers_count=-5)


def test_from_json_friends_count_maps_to_followees():
    tweet = tweet_from_json(record())
    assert tweet.author.followees_count == 20
    assert tweet.author.has_description is True


def test_from_json_blank_description_is_absent():
    rec = record()
    rec["user"]["description"] = "   "
    assert tweet_from_json(rec).author.has_description is False
    del rec["user"]["description"]
    assert tweet_from_json(rec).author.has_description is False


def test_corpus_rejects_duplicate_ids():
    entries = tuple(
        CorpusEntry(tweet=t)
        for t in (make_tweet(id="a"), make_tweet(id="a", text="other http://x.example"))
    )
    with pytest.raises(CorpusError):
        LabeledCorpus(entries=entries)


def test_ingest_counts(tmp_path):
    path = tmp_path / "tweets.jsonl"
    records = [
        record("t1"),
        record("t2", text="no links at all", urls=[]),
        record("t3", text="x" * 141),
        record("t1", text="same id http://b.example"),
        {"id": "t5"},  # malformed
    ]
    write_jsonl(path, records)
    result = ingest_stream(path)
    assert result.admitted == 1
    assert result.skipped_no_url == 1
    assert result.skipped_too_long == 1
    assert result.skipped_duplicate_id == 1
    assert result.skipped_invalid == 1
    assert result.skipped == 4


def test_ingest_invalid_json_line(tmp_path):
    path = tmp_path / "tweets.jsonl"
    path.write_text(json.dumps(record("t1")) + "\n{broken\n", encoding="utf-8")
    result = ingest_stream(path)
    assert result.admitted == 1
    assert result.skipped_invalid == 1


def test_ingest_dedupe_keeps_earliest(tmp_path):
    path = tmp_path / "tweets.jsonl"
    # t2 repeats t1's text but was posted earlier; NFC equivalence counts too
    records = [
        record("t1", text="café http://a.example/p", created="2020-09-13T12:26:40Z"),
        record("t2", text="café http://a.example/p", created="2020-09-13T10:00:00Z"),
        record("t3", text="different http://a.example/p"),
    ]
    write_jsonl(path, records)
    result = ingest_stream(path, dedupe_text=True)
    assert result.admitted == 2
    assert result.deduped_text == 1
    kept_ids = [e.tweet.id for e in result.corpus.entries]
    assert kept_ids == ["t2", "t3"]


def test_ingest_without_dedupe_keeps_both(tmp_path):
    path = tmp_path / "tweets.jsonl"
    write_jsonl(path, [record("t1"), record("t2")])
    result = ingest_stream(path)
    assert result.admitted == 2
    assert result.deduped_text == 0


def verdict(status, as_of):
    return BlacklistVerdict(status=status, as_of=as_of, pattern="p", source="test")


def test_apply_labels_any_bad_url_means_phishing():
    t = make_tweet(urls=("http://good.example/", "http://bad.example/"))
    corpus = LabeledCorpus(
        entries=(CorpusEntry(tweet=t),)
    )
    verdicts = [
        ("http://good.example/", verdict(BlacklistStatus.SAFE, T0 + 100)),
        ("http://bad.example/", verdict(BlacklistStatus.PHISHING, T0 + 200)),
    ]
    labeled = apply_labels(corpus, verdicts)
    label = labeled.entries[0].label
    assert label.value is LabelValue.PHISHING
    assert label.source is LabelSource.BLACKLIST
    assert label.labeled_at == T0 + 200


def test_apply_labels_no_verdict_is_safe():
    t = make_tweet()
    corpus = LabeledCorpus(
        entries=(CorpusEntry(tweet=t),)
    )
    labeled = apply_labels(corpus, [])
    label = labeled.entries[0].label
    assert label.value is LabelValue.SAFE
    assert label.labeled_at == T0


def test_apply_labels_idempotent():
    t = make_tweet()
    corpus = LabeledCorpus(
        entries=(CorpusEntry(tweet=t),)
    )
    verdicts = [("http://example.com/x", verdict(BlacklistStatus.MALWARE, T0 + 50))]
    once = apply_labels(corpus, verdicts)
    twice = apply_labels(once, verdicts)
    assert once == twice


def test_persist_load_round_trip(tmp_path):
    t1 = make_tweet(id="a")
    t2 = make_tweet(id="b", text="two http://example.org", urls=("http://example.org",))
    corpus = LabeledCorpus(
        entries=(
            CorpusEntry(
                tweet=t1,
                label=Label(LabelValue.PHISHING, LabelSource.MANUAL, labeled_at=T0 + 10),
            ),
            CorpusEntry(tweet=t2),
        )
    )
    path = tmp_path / "corpus.json"
    persist(corpus, path)
    assert load(path) == corpus


def test_load_rejects_wrong_schema_version(tmp_path):
    path = tmp_path / "corpus.json"
    path.write_text(json.dumps({"schema_version": 99, "entries": []}), encoding="utf-8")
    with pytest.raises(CorpusVersionError) as exc_info:
        load(path)
    assert "99" in str(exc_info.value)
    assert "1" in str(exc_info.value)
