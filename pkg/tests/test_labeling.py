import logging

import pytest
from hypothesis import given, strategies as st

from malshort.core.model import Corpus, State
from malshort.core.synthetic import domain_probe_url
from malshort.labeling import (
    BlacklistVerdict,
    FixtureProbe,
    FixtureProvider,
    Label,
    LabelValue,
    LinkState,
    ProbeResponse,
    domain_liveness_report,
    label_corpus,
    label_instance,
    load_fixture_providers,
    load_labels,
    load_whitelist,
    probe_link_state,
    query_blacklists,
    query_many,
    save_labels,
)

from helpers import T0, make_link

URL = "http://a.timesfancy.in/x?y=1"
ACTIVE = LinkState(State.ACTIVE)


def providers(surbl=(), phishtank=()):
    return [
        FixtureProvider("safebrowsing", []),
        FixtureProvider("surbl", surbl, level="domain"),
        FixtureProvider("phishtank", phishtank),
        FixtureProvider("virustotal", []),
    ]


class Broken:
    name = "broken"
    level = "url"
    rate_limit = None
    timeout = None

    def check(self, target):
        raise ConnectionError("service down")


class Slow:
    name = "slow"
    level = "url"
    rate_limit = None
    timeout = 0.05

    def check(self, target):
        import time

        time.sleep(1)
        return True, "spam"


def test_domain_level_provider_gets_registrable_domain():
    verdicts = query_blacklists(URL, providers(surbl=["timesfancy.in"]))
    assert [v.provider for v in verdicts] == ["safebrowsing", "surbl", "phishtank", "virustotal"]
    assert [v.hit for v in verdicts] == [False, True, False, False]
    assert verdicts[1].category == "spam"
    assert verdicts[1].evidence == "domain"


def test_url_level_provider_needs_full_url():
    assert query_blacklists(URL, providers(phishtank=["http://a.timesfancy.in/"]))[2].hit is False
    assert query_blacklists(URL, providers(phishtank=["HTTP://A.TIMESFANCY.IN/x?y=1"]))[2].hit is True


def test_all_providers_empty():
    assert not any(v.hit for v in query_blacklists(URL, providers()))


def test_failing_provider_is_unknown_not_hit(caplog):
    with caplog.at_level(logging.WARNING):
        (v,) = query_blacklists(URL, [Broken()])
    assert v.hit is False and v.category == "unknown" and v.failed
    assert "broken" in caplog.text


def test_timeout_is_failure():
    (v,) = query_blacklists(URL, [Slow()])
    assert v.failed


def test_query_many_preserves_order():
    urls = [f"http://site{i}.com/" for i in range(20)]
    ps = providers(phishtank=urls[::3])
    serial = query_many(urls, ps, T0, max_in_flight=1)
    parallel = query_many(urls, ps, T0, max_in_flight=8)
    assert serial == parallel
    assert [vs[2].hit for vs in serial] == [i % 3 == 0 for i in range(20)]


def test_verdict_invariant():
    with pytest.raises(ValueError):
        BlacklistVerdict("x", hit=False, category="phishing")
    BlacklistVerdict("x", hit=False, category="unknown")


def test_fixture_file_comments_and_categories(tmp_path):
    (tmp_path / "blacklist_phishtank.txt").write_text("# header\nhttp://evil.com/a malware\n\nhttp://bad.org/  # x\n")
    (tmp_path / "blacklist_surbl.txt").write_text("evil.com\n")
    ps = load_fixture_providers(tmp_path)
    assert [p.name for p in ps] == ["surbl", "phishtank"]
    assert ps[0].level == "domain"
    assert ps[1].check("http://evil.com/a") == (True, "malware")
    assert ps[1].check("http://bad.org/") == (True, "phishing")


# -- probe -------------------------------------------------------------------------


def test_probe_states():
    probe = FixtureProbe({
        "http://bit.ly/w": ProbeResponse(301, "http://bit.ly/a/warning?hash=w", ("http://bit.ly/w",)),
        "http://bit.ly/d": ProbeResponse(404, "http://bit.ly/d", ()),
        "http://bit.ly/o": ProbeResponse(200, "http://bit.ly/o", ()),
        "http://bit.ly/r": ProbeResponse(301, "http://example.com/warning", ()),
    })
    assert probe_link_state("http://bit.ly/w", probe).state is State.WARNING
    assert probe_link_state("http://bit.ly/d", probe).state is State.DEAD
    assert probe_link_state("http://bit.ly/o", probe).state is State.ACTIVE
    # a /warning path on another host is not the shortener's interstitial
    assert probe_link_state("http://bit.ly/r", probe).state is State.ACTIVE
    # unknown URL behaves like a connection failure
    assert probe_link_state("http://bit.ly/missing", probe).state is State.DEAD


def test_probe_custom_pattern():
    probe = FixtureProbe({"http://s.ho/x": ProbeResponse(302, "http://s.ho/blocked", ())})
    assert probe_link_state("http://s.ho/x", probe, r"/blocked$").state is State.WARNING


# -- labels ------------------------------------------------------------------------------


def test_any_hit_rule():
    link = make_link(long_url=URL)
    label = label_instance(link, query_blacklists(URL, providers(surbl=["timesfancy.in"])), ACTIVE)
    assert label == Label(LabelValue.MALICIOUS, ("surbl",))


def test_warning_page_alone():
    label = label_instance(make_link(), [], LinkState(State.WARNING))
    assert label == Label(LabelValue.MALICIOUS, ("warning_page",))


def test_benign():
    assert label_instance(make_link(), [], ACTIVE) == Label(LabelValue.BENIGN, ("none",))


def test_failed_lookup_never_malicious():
    v = BlacklistVerdict("x", False, "unknown")
    assert label_instance(make_link(), [v, v], ACTIVE).value is LabelValue.BENIGN


def test_whitelist_suppresses_domain_evidence_only():
    link = make_link(long_url=URL)
    dom = BlacklistVerdict("surbl", True, "spam", evidence="domain")
    url = BlacklistVerdict("phishtank", True, "phishing", evidence="url")
    wl = frozenset({"timesfancy.in"})
    assert label_instance(link, [dom], ACTIVE, wl).value is LabelValue.BENIGN
    assert label_instance(link, [dom, url], ACTIVE, wl).sources == ("phishtank",)
    assert label_instance(link, [dom], LinkState(State.WARNING), wl).value is LabelValue.MALICIOUS


def test_label_invariant():
    with pytest.raises(ValueError):
        Label(LabelValue.MALICIOUS, ("none",))
    with pytest.raises(ValueError):
        Label(LabelValue.BENIGN, ("surbl",))
    with pytest.raises(ValueError):
        Label(LabelValue.BENIGN, ())


verdict_st = st.builds(
    lambda p, hit, ev: BlacklistVerdict(p, hit, "spam" if hit else None, evidence=ev),
    st.sampled_from(["safebrowsing", "surbl", "phishtank", "virustotal"]), st.booleans(),
    st.sampled_from(["url", "domain"]),
)


@given(st.lists(verdict_st, max_size=6), st.sampled_from(list(State)), st.randoms(), verdict_st)
def test_label_permutation_and_monotonicity(verdicts, state, rnd, extra):
    link = make_link()
    base = label_instance(link, verdicts, LinkState(state))
    shuffled = list(verdicts)
    rnd.shuffle(shuffled)
    other = label_instance(link, shuffled, LinkState(state))
    assert other.value is base.value
    assert sorted(other.sources) == sorted(base.sources)
    if base.malicious:
        assert label_instance(link, verdicts + [extra], LinkState(state)).malicious


def test_labels_file_round_trip(tmp_path, small_world):
    corpus, fixtures = small_world
    fixtures.write(tmp_path / "fx")
    ps = load_fixture_providers(tmp_path / "fx")
    probe = FixtureProbe.from_file(tmp_path / "fx" / "probes.jsonl")
    records = label_corpus(corpus, ps, probe, load_whitelist(tmp_path / "fx" / "whitelist.txt"))
    save_labels(records, tmp_path / "labels.jsonl")
    loaded = load_labels(tmp_path / "labels.jsonl")
    assert loaded == {r.short_hash: r.label for r in records}


def test_synthetic_labels_match_truth(small_world, tmp_path):
    corpus, fixtures = small_world
    fixtures.write(tmp_path)
    records = label_corpus(corpus, load_fixture_providers(tmp_path), FixtureProbe.from_file(tmp_path / "probes.jsonl"),
                           load_whitelist(tmp_path / "whitelist.txt"))
    assert all(r.label.malicious == corpus.truth[r.short_hash] for r in records)


def test_labels_independent_of_concurrency(small_world, tmp_path):
    corpus, fixtures = small_world
    fixtures.write(tmp_path)
    args = (corpus, load_fixture_providers(tmp_path), FixtureProbe.from_file(tmp_path / "probes.jsonl"))
    assert label_corpus(*args, checked_at=T0, max_in_flight=1) == label_corpus(*args, checked_at=T0, max_in_flight=6)


# -- liveness --------------------------------------------------------------------------


def test_liveness_all_alive():
    links = (make_link("a", "http://one.com/"), make_link("b", "http://two.com/x"))
    probe = FixtureProbe({domain_probe_url(d): ProbeResponse(200, domain_probe_url(d), ())
                          for d in ("one.com", "two.com")})
    report = domain_liveness_report(Corpus(links=links, encoders={"alice": _alice()}), probe)
    assert report.n_domains == 2 and report.dead_fraction == 0.0


def test_liveness_dead_warning_sum():
    links = (make_link("a", "http://one.com/", warning_count=5), make_link("b", "http://two.com/", warning_count=9))
    probe = FixtureProbe({domain_probe_url("two.com"): ProbeResponse(200, domain_probe_url("two.com"), ())})
    report = domain_liveness_report(Corpus(links=links, encoders={"alice": _alice()}), probe)
    assert report.n_dead == 1
    assert report.dead_warning_sum == 5
    assert report.domains["one.com"].alive is False


def test_liveness_reproduces_planted_fraction():
    from malshort.core.synthetic import GeneratorConfig, generate_world

    config = GeneratorConfig(n_benign=1000, n_malicious=1000)
    corpus, fixtures = generate_world(config, 3)
    probe = FixtureProbe({u: ProbeResponse(r["status"], r["final_url"], tuple(r.get("chain", ())))
                          for u, r in fixtures.probes.items()})
    malicious = {l.domain for l in corpus.links if corpus.truth[l.short_hash]}
    report = domain_liveness_report(corpus, probe, malicious, frozenset(fixtures.whitelist))
    assert abs(report.dead_fraction - config.dead_domain_fraction) <= 0.02


def _alice():
    from malshort.core.model import EncoderProfile

    return EncoderProfile("alice")
