from collections import Counter
from datetime import datetime, timedelta, timezone
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from malshort.core.model import EncoderProfile, HistoryEntry, Post, State
from malshort.profiles import (
    LOW_VARIANCE_THRESHOLD,
    ProfileError,
    activity_timeline,
    cross_account_overlap,
    jaccard,
    pair_overlap,
    posting_pattern,
    similarity_variance,
    suspicion_fraction,
    suspicion_factor,
    suspicion_report,
    tokenize,
)

T = datetime(2013, 1, 1, tzinfo=timezone.utc)


def profile(states, account="acct", start=T, step=timedelta(hours=1), clicks=0):
    history = tuple(HistoryEntry(f"h{i}", start + i * step, clicks, s) for i, s in enumerate(states))
    return EncoderProfile(account, history=history)


def mixed(n_warning, n_total):
    return profile([State.WARNING] * n_warning + [State.ACTIVE] * (n_total - n_warning))


@pytest.mark.parametrize("warn,total,expected", [(100, 100, 1), (80, 100, Fraction(4, 5)), (0, 50, 0)])
def test_suspicion_factor(warn, total, expected):
    assert suspicion_fraction(mixed(warn, total)) == expected
    assert suspicion_factor(mixed(warn, total)) == float(expected)


def test_suspicion_empty_history():
    with pytest.raises(ProfileError):
        suspicion_factor(EncoderProfile("x"))


def test_dead_links_are_not_warnings():
    assert suspicion_factor(profile([State.DEAD, State.WARNING])) == 0.5


@pytest.mark.parametrize("warn,total,flag", [(100, 100, True), (99, 99, False), (99, 100, False), (150, 150, True)])
def test_highly_suspicious_boundary(warn, total, flag):
    assert suspicion_report(mixed(warn, total)).highly_suspicious is flag


@given(st.lists(st.sampled_from(list(State)), min_size=1, max_size=30), st.sampled_from([State.WARNING, State.ACTIVE]))
def test_suspicion_monotone(states, extra):
    before = suspicion_fraction(profile(states))
    after = suspicion_fraction(profile(states + [extra]))
    assert 0 <= before <= 1
    if extra is State.WARNING:
        assert after >= before
    else:
        assert after <= before


# -- jaccard -----------------------------------------------------------------------------


def test_jaccard_cases():
    assert jaccard({"a", "b"}, {"a", "b"}) == 1.0
    assert jaccard({"a"}, {"b"}) == 0.0
    assert Fraction(jaccard({"a", "b"}, {"b", "c"})).limit_denominator(100) == Fraction(1, 3)
    assert jaccard(set(), set()) == 1.0
    assert jaccard({"a"}, set()) == 0.0


@given(st.sets(st.text(max_size=3), max_size=8), st.sets(st.text(max_size=3), max_size=8))
def test_jaccard_properties(a, b):
    assert jaccard(a, b) == jaccard(b, a)
    assert 0.0 <= jaccard(a, b) <= 1.0
    assert jaccard(a, a) == 1.0


def test_tokenize_strips_urls():
    assert tokenize("Check THIS http://bit.ly/x out www.evil.com now") == frozenset({"check", "this", "out", "now"})


# -- variance --------------------------------------------------------------------------------


def test_identical_posts_flagged():
    r = similarity_variance([{"buy", "now"}] * 5)
    assert r.variance == 0.0 and r.flagged and r.n_pairs == 10


def test_disjoint_posts_also_flagged():
    r = similarity_variance([{"a"}, {"b"}, {"c"}, {"d"}])
    assert r.variance == 0.0 and r.flagged and r.n_pairs == 6


def test_varied_posts_not_flagged():
    r = similarity_variance([{"a", "b"}, {"a", "b"}, {"c"}])
    # pairwise values 1, 0, 0 -> population variance 2/9
    assert r.variance == pytest.approx(2 / 9)
    assert not r.flagged


def test_threshold_constant():
    assert LOW_VARIANCE_THRESHOLD == 0.00012


def test_too_few_posts():
    with pytest.raises(ProfileError):
        similarity_variance([{"a"}, {"b"}])


# -- timeline --------------------------------------------------------------------------------


def test_month_lag_24():
    p = EncoderProfile("bams", history=(
        HistoryEntry("a", datetime(2011, 10, 15, tzinfo=timezone.utc), 3),
        HistoryEntry("b", datetime(2013, 10, 2, tzinfo=timezone.utc), 4),
    ))
    tl = activity_timeline(p)
    assert tl.month_lag == 24
    assert len(tl.buckets) == 25
    assert tl.buckets[0].month == "2011-10" and tl.buckets[-1].month == "2013-10"


def test_single_month():
    tl = activity_timeline(profile([State.ACTIVE] * 3))
    assert tl.month_lag == 0 and len(tl.buckets) == 1 and tl.buckets[0].links_created == 3


def test_idle_gap_zero_filled():
    dates = [datetime(2012, m, 5, tzinfo=timezone.utc) for m in range(1, 8)]
    dates += [datetime(2013, 8, 1, tzinfo=timezone.utc), datetime(2013, 9, 1, tzinfo=timezone.utc)]
    p = EncoderProfile("x", history=tuple(HistoryEntry(f"h{i}", d, i) for i, d in enumerate(dates)))
    tl = activity_timeline(p)
    idle = [b for b in tl.buckets if b.links_created == 0]
    assert len(idle) == 12
    assert all(b.clicks_received == 0 for b in idle)
    assert sum(b.links_created for b in tl.buckets) == len(dates)
    assert sum(b.clicks_received for b in tl.buckets) == sum(range(len(dates)))
    assert tl.to_csv().splitlines()[0] == "month,links,clicks"


def test_timeline_month_boundary_not_30_days():
    p = EncoderProfile("x", history=(
        HistoryEntry("a", datetime(2013, 1, 31, 23, tzinfo=timezone.utc)),
        HistoryEntry("b", datetime(2013, 2, 1, 1, tzinfo=timezone.utc)),
    ))
    assert activity_timeline(p).month_lag == 1


# -- posting pattern ----------------------------------------------------------------------------


def test_minute_zero_posts():
    stamps = [T + timedelta(hours=h) for h in range(24)]
    pp = posting_pattern(stamps)
    assert pp.automation_score == pytest.approx(((59 / 60) + 0.0) / 2)
    assert set(m for _, m in pp.points) == {0}


def test_single_timestamp():
    pp = posting_pattern([T + timedelta(minutes=7)])
    assert pp.points == ((0, 7),)
    assert pp.automation_score == pytest.approx(((59 / 60) + (23 / 24)) / 2)


def test_uniform_random_matches_expected_coverage():
    # expected distinct values for n uniform draws from k bins: k * (1 - (1 - 1/k)^n)
    expected = ((59 / 60) ** 1000 + (23 / 24) ** 1000) / 2
    scores = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        offsets = rng.integers(0, 86400 * 365, size=1000)
        scores.append(posting_pattern([T + timedelta(seconds=int(s)) for s in offsets]).automation_score)
    assert np.mean(scores) == pytest.approx(expected, abs=0.005)


def test_empty_timestamps():
    with pytest.raises(ProfileError):
        posting_pattern([])


# -- overlap ---------------------------------------------------------------------------------------


def poster(account, urls, tokens=("hello",)):
    return EncoderProfile(account, posts=tuple(Post(frozenset(tokens), (u,)) for u in urls))


def test_identical_url_sets():
    a = poster("a", ["http://x.com/1", "http://y.com/2"])
    b = poster("b", ["http://y.com/2", "http://x.com/1"])
    assert pair_overlap(a, b).url_overlap == 1.0


def test_disjoint_urls_same_domains():
    a = poster("a", ["http://x.com/1", "http://www.y.com/2"])
    b = poster("b", ["http://x.com/9", "http://y.com/8"])
    o = pair_overlap(a, b)
    assert o.url_overlap == 0.0 and o.domain_overlap == 1.0


def test_matrix_symmetric_unit_diagonal():
    ps = [poster("a", ["http://x.com/1"]), poster("b", ["http://x.com/2"], ("bye",)), poster("c", ["http://z.org/"])]
    m = cross_account_overlap(ps)
    assert (m.url_overlap == m.url_overlap.T).all()
    assert (np.diag(m.url_overlap) == 1.0).all()
    assert m.pair("a", "b") == (0.0, 1.0, 0.0)


def test_overlap_needs_two_profiles():
    with pytest.raises(ProfileError):
        cross_account_overlap([poster("a", ["http://x.com/"]), EncoderProfile("b")])


def test_planted_campaign_stands_out():
    from malshort.core.synthetic import GeneratorConfig, generate_synthetic

    corpus = generate_synthetic(GeneratorConfig(), 1)
    groups = Counter(tuple(sorted(e.account_id for e in l.encoders)) for l in corpus.links if len(l.encoders) == 3)
    campaign = set(groups.most_common(1)[0][0])
    m = cross_account_overlap([p for p in corpus.encoders.values() if p.posts])
    n = len(m.accounts)
    inside = [i for i in range(n) if m.accounts[i] in campaign]
    assert len(inside) == 3
    for i in inside:
        for j in inside:
            assert m.url_overlap[i, j] > 0.8
            assert m.domain_overlap[i, j] > 0.8
            assert m.text_similarity[i, j] > 0.8
    background = [(i, j) for i in range(n) for j in range(i + 1, n) if not (i in inside and j in inside)]
    text = np.array([m.text_similarity[i, j] for i, j in background])
    url = np.array([m.url_overlap[i, j] for i, j in background])
    assert text.max() < 0.2
    # accounts that co-encode one link share a URL, so a few background pairs exceed 0.2
    assert np.percentile(url, 99) < 0.2
