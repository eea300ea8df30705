import json
from datetime import date, timedelta

import pytest
from hypothesis import given, settings, strategies as st

from malshort.core import io
from malshort.core.domains import registrable_domain
from malshort.core.model import (
    ClickEvent,
    Corpus,
    EncoderKind,
    EncoderRef,
    InvariantError,
    ReferrerStat,
    WhoisRecord,
)
from malshort.core.synthetic import ConfigError, GeneratorConfig, generate_synthetic, generate_world

from helpers import T0, make_link


def three_links():
    return Corpus(links=(
        make_link("a1", "http://a.timesfancy.in/x?y=1", whois=WhoisRecord(date(2013, 1, 1), None, date(2014, 1, 1))),
        make_link("a2", "https://www.example.com/", clicks=(ClickEvent(T0 + timedelta(hours=2), 3),),
                  referrers=(ReferrerStat("DIRECT", 3),)),
        make_link("a3", "http://foo.bar.co.uk/p", encoders=(EncoderRef("someone", EncoderKind.ANONYMOUS),)),
    ), encoders={"alice": _profile("alice")})


def _profile(account):
    from malshort.core.model import EncoderProfile

    return EncoderProfile(account)


def test_round_trip(tmp_path):
    corpus = three_links()
    io.save_corpus(corpus, tmp_path)
    loaded = io.load_corpus(tmp_path)
    assert loaded.links == corpus.links
    assert loaded.encoders == corpus.encoders
    assert len(loaded.links) == 3


def test_round_trip_synthetic(tmp_path, small_world):
    corpus, _ = small_world
    io.save_corpus(corpus, tmp_path)
    loaded = io.load_corpus(tmp_path)
    assert loaded.links == corpus.links
    assert dict(loaded.encoders) == dict(corpus.encoders)
    assert loaded.truth == corpus.truth


def test_click_before_creation_names_link(tmp_path):
    io.save_corpus(three_links(), tmp_path)
    lines = (tmp_path / "links.jsonl").read_text().splitlines()
    row = json.loads(lines[1])
    row["clicks"][0]["at"] = "2000-01-01T00:00:00Z"
    lines[1] = json.dumps(row)
    (tmp_path / "links.jsonl").write_text("\n".join(lines) + "\n")
    with pytest.raises(InvariantError, match="a2"):
        io.load_corpus(tmp_path)


def test_click_before_creation_rejected_in_memory():
    with pytest.raises(InvariantError):
        make_link(clicks=(ClickEvent(T0 - timedelta(seconds=1)),))


def test_empty_file_gives_empty_corpus(tmp_path):
    (tmp_path / "links.jsonl").write_text("")
    assert io.load_corpus(tmp_path).links == ()


def test_missing_field_reports_line_and_field(tmp_path):
    io.save_corpus(three_links(), tmp_path)
    lines = (tmp_path / "links.jsonl").read_text().splitlines()
    row = json.loads(lines[2])
    del row["created_at"]
    lines[2] = json.dumps(row)
    (tmp_path / "links.jsonl").write_text("\n".join(lines) + "\n")
    with pytest.raises(io.SchemaError) as err:
        io.load_corpus(tmp_path)
    assert err.value.line == 3
    assert err.value.field == "created_at"


def test_missing_directory():
    with pytest.raises(FileNotFoundError):
        io.load_corpus("/nonexistent/corpus")


def test_unknown_schema_version(tmp_path):
    io.save_corpus(three_links(), tmp_path)
    (tmp_path / "MANIFEST.json").write_text('{"schema_version": 2}')
    with pytest.raises(io.SchemaError):
        io.load_corpus(tmp_path)


def test_invariants():
    with pytest.raises(InvariantError):
        make_link(encoders=())
    with pytest.raises(InvariantError):
        ClickEvent(T0, 0)
    with pytest.raises(InvariantError):
        ReferrerStat("", 1)
    with pytest.raises(InvariantError):
        EncoderRef("app", EncoderKind.APPLICATION)
    with pytest.raises(InvariantError):
        WhoisRecord(date(2014, 1, 1), None, date(2013, 1, 1))
    with pytest.raises(InvariantError):
        EncoderRef("anonymous", EncoderKind.REGULAR).check_anonymous()
    with pytest.raises(InvariantError):
        ClickEvent(T0.replace(tzinfo=None))


def test_domain_must_match_url():
    from malshort.core.model import ShortLinkRecord

    with pytest.raises(InvariantError):
        ShortLinkRecord("h", "g", "http://a.example.com/", "other.com", T0, (EncoderRef("u"),))


def test_unregistered_encoder_rejected():
    with pytest.raises(InvariantError):
        Corpus(links=(make_link(encoders=(EncoderRef("ghost"),)),), encoders={})


# -- registrable_domain -------------------------------------------------------------


@pytest.mark.parametrize("url,expected", [
    ("http://a.timesfancy.in/x?y=1", "timesfancy.in"),
    ("https://WWW.Example.com/", "example.com"),
    ("http://foo.bar.co.uk/", "bar.co.uk"),
    ("http://www.city.kawasaki.jp/", "city.kawasaki.jp"),
    ("http://x.y.kawasaki.jp/", "x.y.kawasaki.jp"),
    ("http://user:pw@Sub.Example.ORG:8080/a", "example.org"),
    ("http://192.168.1.1/path", "192.168.1.1"),
])
def test_registrable_domain(url, expected):
    assert registrable_domain(url) == expected


@pytest.mark.parametrize("bad", ["not a url", "http://", "/relative/path", "http://co.uk/"])
def test_registrable_domain_errors(bad):
    with pytest.raises(ValueError):
        registrable_domain(bad)


ORACLE_HOSTS = [
    "a.timesfancy.in", "www.example.com", "foo.bar.co.uk", "x.blogspot.com", "a.b.github.io",
    "shop.amazon.co.jp", "www.city.kawasaki.jp", "deep.sub.domain.com.au", "mail.google.com",
    "x.s3.amazonaws.com", "news.bbc.co.uk", "a.b.c.d.e.org", "site.appspot.com", "t.co",
    "foo.pvt.k12.ma.us", "abc.xn--p1ai", "www.gov.uk", "my.site.herokuapp.com", "bit.ly",
]


def test_registrable_domain_matches_psl_oracle():
    psl = pytest.importorskip("publicsuffix2")
    oracle = psl.PublicSuffixList()
    for host in ORACLE_HOSTS:
        assert registrable_domain(f"http://{host}/") == oracle.get_public_suffix(host, strict=True), host


@given(st.sampled_from(ORACLE_HOSTS), st.sampled_from(["http", "https"]),
       st.text(alphabet="abc/?=&", max_size=12))
@settings(max_examples=100, deadline=None)
def test_registrable_domain_idempotent_and_path_stable(host, scheme, tail):
    d = registrable_domain(f"{scheme}://{host}/{tail}")
    assert registrable_domain("http://" + d) == d
    assert registrable_domain(f"http://{host}") == d


# -- synthetic generator -----------------------------------------------------------------


def test_generator_is_byte_identical(tmp_path):
    config = GeneratorConfig(n_benign=1000, n_malicious=1000)
    for run in ("a", "b"):
        corpus, fixtures = generate_world(config, 42)
        io.save_corpus(corpus, tmp_path / run)
        fixtures.write(tmp_path / run / "fixtures")
    for f in sorted((tmp_path / "a").rglob("*")):
        if f.is_file():
            assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes(), f.name


def test_generator_seed_matters():
    config = GeneratorConfig(n_benign=50, n_malicious=50)
    assert generate_synthetic(config, 1).links != generate_synthetic(config, 2).links


def test_zero_click_fraction():
    config = GeneratorConfig(n_benign=1000, n_malicious=1000)
    corpus = generate_synthetic(config, 42)
    mal = [l for l in corpus.links if corpus.truth[l.short_hash]]
    frac = sum(not l.clicks for l in mal) / len(mal)
    assert abs(frac - 0.4616) <= 0.01


def test_empty_config():
    corpus = generate_synthetic(GeneratorConfig(n_benign=0, n_malicious=0, n_bot_encoders=0), 0)
    assert corpus.links == ()


@pytest.mark.parametrize("bad", [{"n_benign": -1}, {"odd_hour_strength": 1.5}, {"noise_fraction": -0.1},
                                 {"start": "2014-01-01", "end": "2013-01-01"}])
def test_invalid_config(bad):
    with pytest.raises(ConfigError):
        GeneratorConfig(**bad).validate()


def test_unknown_config_key():
    with pytest.raises(ConfigError):
        GeneratorConfig.from_dict({"n_links": 5})


def test_truth_is_sidecar(small_world):
    corpus, _ = small_world
    assert set(corpus.truth) == {l.short_hash for l in corpus.links}
    assert "malicious" not in io.link_to_dict(corpus.links[0])


def test_manifest_records_generator(small_world):
    corpus, _ = small_world
    assert corpus.manifest["schema_version"] == 1
    assert corpus.manifest["generator"]["seed"] == 7


def test_timestamps_utc_z(small_world):
    corpus, _ = small_world
    row = io.link_to_dict(corpus.links[0])
    assert row["created_at"].endswith("Z")
