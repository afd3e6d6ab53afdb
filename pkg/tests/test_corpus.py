"""Parsers, serializers, the window-solvability oracle, and exclusion splits."""

import json
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from tinydialog.corpus import (
    USER, SYSTEM, LISTEN, DEFAULT_EXCLUSIONS,
    ParseError, ValidationError, CorpusWarning,
    IntentSpec, Domain, Turn, Story, NLUExample, AdaptationCase,
    parse_nlu_data, serialize_nlu_data,
    parse_stories, serialize_stories, validate_story_labels,
    save_adaptation_cases, load_adaptation_cases,
    story_decision_points, solvability_conflicts, build_window_policy,
    SplitSpec, ExclusionSplit, split_corpus,
)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# ---------------------------------------------------------------------------
# intent data parsing
# ---------------------------------------------------------------------------


class TestParseNLUData:
    def test_golden(self, tmp_path):
        p = write(tmp_path, "nlu.md", (
            "## intent:greet\n"
            "- hello there\n"
            "- hi\n"
            "\n"
            "# a comment line\n"
            "## intent:goodbye\n"
            "- bye now\n"
        ))
        got = parse_nlu_data(p)
        assert got == [
            NLUExample("hello there", "greet", 2),
            NLUExample("hi", "greet", 3),
            NLUExample("bye now", "goodbye", 7),
        ]

    def test_repeat_same_intent_collapsed(self, tmp_path):
        p = write(tmp_path, "nlu.md", "## intent:greet\n- hi\n- hi\n")
        assert len(parse_nlu_data(p)) == 1

    def test_conflicting_label_cites_both_lines(self, tmp_path):
        p = write(tmp_path, "nlu.md", (
            "## intent:greet\n"
            "- hi\n"
            "## intent:goodbye\n"
            "- hi\n"
        ))
        with pytest.raises(ParseError) as err:
            parse_nlu_data(p)
        assert err.value.line_no == 4
        msg = str(err.value)
        assert "line 2" in msg and "'greet'" in msg and "'goodbye'" in msg
        assert f"{p}:4" in msg

    def test_empty_intent_name(self, tmp_path):
        p = write(tmp_path, "nlu.md", "## intent:\n- hi\n")
        with pytest.raises(ParseError) as err:
            parse_nlu_data(p)
        assert err.value.line_no == 1

    def test_bad_section_header(self, tmp_path):
        p = write(tmp_path, "nlu.md", "## section:greet\n- hi\n")
        with pytest.raises(ParseError):
            parse_nlu_data(p)

    def test_example_before_header(self, tmp_path):
        p = write(tmp_path, "nlu.md", "- hi\n")
        with pytest.raises(ParseError) as err:
            parse_nlu_data(p)
        assert err.value.line_no == 1

    def test_empty_example(self, tmp_path):
        p = write(tmp_path, "nlu.md", "## intent:greet\n- \n")
        with pytest.raises(ParseError):
            parse_nlu_data(p)

    def test_unrecognized_line(self, tmp_path):
        p = write(tmp_path, "nlu.md", "## intent:greet\nhello\n")
        with pytest.raises(ParseError) as err:
            parse_nlu_data(p)
        assert "hello" in str(err.value)

    def test_round_trip_bytes(self, tmp_path):
        examples = [
            NLUExample("hello there", "greet"),
            NLUExample("hi", "greet"),
            NLUExample("bye", "goodbye"),
        ]
        text = serialize_nlu_data(examples)
        p = write(tmp_path, "nlu.md", text)
        back = parse_nlu_data(p)
        assert [(e.text, e.intent) for e in back] == \
            [(e.text, e.intent) for e in examples]
        assert serialize_nlu_data(back) == text

    def test_serialize_empty(self):
        assert serialize_nlu_data([]) == ""


# ---------------------------------------------------------------------------
# story parsing
# ---------------------------------------------------------------------------


STORY_TEXT = (
    "## happy path\n"
    "* greet\n"
    "- utter_greet\n"
    "# comment inside a story\n"
    "* goodbye\n"
    "- utter_goodbye\n"
    "\n"
    "## two actions\n"
    "* greet\n"
    "- utter_greet\n"
    "- utter_ask_name\n"
)


class TestParseStories:
    def test_golden(self, tmp_path):
        p = write(tmp_path, "stories.md", STORY_TEXT)
        got = parse_stories(p)
        assert [s.title for s in got] == ["happy path", "two actions"]
        assert got[0].turns == (
            Turn(USER, "greet"), Turn(SYSTEM, "utter_greet"),
            Turn(USER, "goodbye"), Turn(SYSTEM, "utter_goodbye"))
        assert got[1].turns == (
            Turn(USER, "greet"), Turn(SYSTEM, "utter_greet"),
            Turn(SYSTEM, "utter_ask_name"))

    def test_dangling_user_turn_warns(self, tmp_path):
        p = write(tmp_path, "stories.md", "## s\n* greet\n- utter_greet\n* goodbye\n")
        with pytest.warns(CorpusWarning, match="ends on a user turn"):
            got = parse_stories(p)
        assert len(got[0]) == 3

    def test_consecutive_user_turns_rejected(self, tmp_path):
        p = write(tmp_path, "stories.md", "## s\n* greet\n* goodbye\n")
        with pytest.raises(ParseError) as err:
            parse_stories(p)
        assert err.value.line_no == 3
        assert "missing system action" in str(err.value)

    def test_agent_start_needs_flag(self, tmp_path):
        p = write(tmp_path, "stories.md", "## s\n- utter_greet\n* greet\n- utter_greet\n")
        with pytest.raises(ParseError) as err:
            parse_stories(p)
        assert err.value.line_no == 2
        got = parse_stories(p, allow_agent_start=True)
        assert got[0].turns[0] == Turn(SYSTEM, "utter_greet")

    def test_empty_story_rejected(self, tmp_path):
        p = write(tmp_path, "stories.md", "## empty\n## other\n* greet\n- utter_greet\n")
        with pytest.raises(ParseError) as err:
            parse_stories(p)
        assert "'empty'" in str(err.value)
        assert err.value.line_no == 1

    def test_turn_outside_story(self, tmp_path):
        p = write(tmp_path, "stories.md", "* greet\n")
        with pytest.raises(ParseError):
            parse_stories(p)

    def test_empty_labels(self, tmp_path):
        for body in ("## s\n* \n", "## s\n* greet\n- \n"):
            p = write(tmp_path, "stories.md", body)
            with pytest.raises(ParseError):
                parse_stories(p)

    def test_bad_header(self, tmp_path):
        p = write(tmp_path, "stories.md", "##title\n* greet\n- utter_greet\n")
        with pytest.raises(ParseError):
            parse_stories(p)

    def test_round_trip_bytes(self, tmp_path):
        p = write(tmp_path, "stories.md", STORY_TEXT)
        got = parse_stories(p)
        text = serialize_stories(got)
        p2 = write(tmp_path, "again.md", text)
        assert parse_stories(p2) == got
        assert serialize_stories(parse_stories(p2)) == text

    def test_domain_validation_lists_all_offenders(self, tmp_path):
        domain = Domain(
            intents=(IntentSpec("greet"),),
            actions=("utter_greet",))
        p = write(tmp_path, "stories.md", (
            "## s\n* greet\n- utter_greet\n* mystery\n- utter_unknown\n"
            "\n## t\n* greet\n- utter_other\n"))
        with pytest.raises(ValidationError) as err:
            parse_stories(p, domain=domain)
        offenders = err.value.offenders
        assert len(offenders) == 3
        joined = " ".join(offenders)
        assert "mystery" in joined and "utter_unknown" in joined and "utter_other" in joined

    def test_domain_validation_passes_clean(self, tmp_path):
        domain = Domain(
            intents=(IntentSpec("greet"), IntentSpec("goodbye")),
            actions=("utter_greet", "utter_goodbye", "utter_ask_name"))
        p = write(tmp_path, "stories.md", STORY_TEXT)
        parse_stories(p, domain=domain)


class TestDomain:
    def test_duplicate_intents_rejected(self):
        with pytest.raises(ValueError):
            Domain(intents=(IntentSpec("a"), IntentSpec("a")), actions=())

    def test_duplicate_actions_rejected(self):
        with pytest.raises(ValueError):
            Domain(intents=(), actions=("x", "x"))

    def test_template_for_unknown_action_rejected(self):
        with pytest.raises(ValueError):
            Domain(intents=(), actions=("utter_hi",), templates={"utter_bye": ("bye",)})

    def test_json_round_trip(self, tmp_path):
        d = Domain(
            intents=(IntentSpec("greet"), IntentSpec("rant", goal=False),
                     IntentSpec("phys_clap", physical=True)),
            actions=("utter_greet",),
            templates={"utter_greet": ("hi", "hello")})
        p = tmp_path / "domain.json"
        d.save(p)
        assert Domain.load(p) == d

    def test_goal_partition(self):
        d = Domain(
            intents=(IntentSpec("a"), IntentSpec("b", goal=False)),
            actions=())
        assert d.goal_intents == ("a",)
        assert d.nongoal_intents == ("b",)
        assert d.is_goal("a") and not d.is_goal("b")
        with pytest.raises(KeyError):
            d.is_goal("c")

    def test_templates_fallback(self):
        d = Domain(intents=(), actions=("utter_nice_day",))
        assert d.templates_for("utter_nice_day") == ("nice day",)


# ---------------------------------------------------------------------------
# adaptation case io
# ---------------------------------------------------------------------------


class TestAdaptationIO:
    CASES = [
        AdaptationCase(("i like cats", "my cat is tall"),
                       ("robots are fun", "you like cats a lot", "the sky is big"), 1),
        AdaptationCase(("hello",), ("hello to you",), 0),
    ]

    def test_round_trip(self, tmp_path):
        p = tmp_path / "adapt.json"
        save_adaptation_cases(p, self.CASES)
        assert load_adaptation_cases(p) == self.CASES

    def test_one_json_doc_per_line(self, tmp_path):
        p = tmp_path / "adapt.json"
        save_adaptation_cases(p, self.CASES)
        lines = p.read_text(encoding="utf-8").splitlines()
        assert len(lines) == len(self.CASES)
        for line, case in zip(lines, self.CASES):
            doc = json.loads(line)
            assert set(doc) == {"context", "candidates", "realized"}
            assert doc["realized"] == case.candidates[case.echo_index]
            assert doc["realized"] in doc["candidates"]

    def test_blank_lines_skipped(self, tmp_path):
        p = tmp_path / "adapt.json"
        save_adaptation_cases(p, self.CASES)
        p.write_text(p.read_text(encoding="utf-8").replace("\n", "\n\n"), encoding="utf-8")
        assert load_adaptation_cases(p) == self.CASES

    def test_realized_not_a_candidate(self, tmp_path):
        p = write(tmp_path, "bad.json",
                  '{"context":["a"],"candidates":["x","y"],"realized":"z"}\n')
        with pytest.raises(ParseError) as err:
            load_adaptation_cases(p)
        assert err.value.line_no == 1

    def test_missing_key(self, tmp_path):
        p = write(tmp_path, "bad.json", '{"context":["a"],"candidates":["x"]}\n')
        with pytest.raises(ParseError):
            load_adaptation_cases(p)

    def test_bad_json_line_number(self, tmp_path):
        good = '{"context":["a"],"candidates":["x"],"realized":"x"}'
        p = write(tmp_path, "bad.json", good + "\nnot json at all\n")
        with pytest.raises(ParseError) as err:
            load_adaptation_cases(p)
        assert err.value.line_no == 2

    def test_echo_index_bounds(self):
        with pytest.raises(ValueError):
            AdaptationCase(("a",), ("x",), 3)


# ---------------------------------------------------------------------------
# solvability oracle
# ---------------------------------------------------------------------------


def story(title, *pairs):
    turns = []
    for speaker, label in pairs:
        turns.append(Turn(speaker, label))
    return Story(title=title, turns=tuple(turns))


class TestSolvability:
    def test_decision_points_include_listen(self):
        s = story("s", (USER, "greet"), (SYSTEM, "utter_greet"),
                  (USER, "goodbye"), (SYSTEM, "utter_goodbye"))
        points = list(story_decision_points(s))
        golds = [g for _, g in points]
        assert golds == ["utter_greet", LISTEN, "utter_goodbye"]
        # first decision sees only the opening user turn
        assert points[0][0] == ((USER, "greet"),)
        # windows are capped at three turns
        assert all(len(w) <= 3 for w, _ in points)

    def test_listen_toggle(self):
        s = story("s", (USER, "greet"), (SYSTEM, "utter_greet"),
                  (USER, "goodbye"), (SYSTEM, "utter_goodbye"))
        golds = [g for _, g in story_decision_points(s, include_listen=False)]
        assert golds == ["utter_greet", "utter_goodbye"]

    def test_consistent_stories_have_no_conflicts(self):
        a = story("a", (USER, "greet"), (SYSTEM, "utter_greet"))
        b = story("b", (USER, "greet"), (SYSTEM, "utter_greet"),
                  (USER, "goodbye"), (SYSTEM, "utter_goodbye"))
        assert solvability_conflicts([a, b]) == []

    def test_conflict_detected_and_named(self):
        a = story("first", (USER, "greet"), (SYSTEM, "utter_greet"))
        b = story("second", (USER, "greet"), (SYSTEM, "utter_goodbye"))
        conflicts = solvability_conflicts([a, b])
        assert len(conflicts) == 1
        assert "'first'" in conflicts[0] and "'second'" in conflicts[0]
        assert "utter_greet" in conflicts[0] and "utter_goodbye" in conflicts[0]

    def test_memory_dependence_beyond_window(self):
        # identical last-3 windows, different gold: only deeper history disambiguates
        common = [(USER, "resume"), (SYSTEM, "utter_ok"), (USER, "phys_clap")]
        a = story("a", (USER, "ask_clap"), (SYSTEM, "utter_cmd_clap"),
                  *common, (SYSTEM, "utter_praise"))
        b = story("b", (USER, "ask_wave"), (SYSTEM, "utter_cmd_wave"),
                  *common, (SYSTEM, "utter_try_again"))
        conflicts = solvability_conflicts([a, b])
        assert len(conflicts) == 1

    def test_window_policy_replays_stories(self):
        a = story("a", (USER, "greet"), (SYSTEM, "utter_greet"),
                  (USER, "goodbye"), (SYSTEM, "utter_goodbye"))
        b = story("b", (USER, "thanks"), (SYSTEM, "utter_welcome"))
        table = build_window_policy([a, b])
        for s in (a, b):
            for window, gold in story_decision_points(s):
                assert table[window] == gold


# ---------------------------------------------------------------------------
# exclusion splits
# ---------------------------------------------------------------------------


def make_pool(n):
    return [story(f"s{i:03d}", (USER, "greet"), (SYSTEM, "utter_greet"))
            for i in range(n)]


class TestSplits:
    def test_counts_at_65(self):
        splits = split_corpus(make_pool(65), SplitSpec())
        got = {sp.exclusion: len(sp.stories) for sp in splits}
        assert got == {0: 65, 5: 62, 25: 49, 50: 33, 70: 20, 90: 7, 95: 3}

    def test_nested_prefixes(self):
        splits = split_corpus(make_pool(65), SplitSpec(seed=7))
        by_p = {sp.exclusion: sp.stories for sp in splits}
        ordered = sorted(by_p)
        for lo, hi in zip(ordered, ordered[1:]):
            assert by_p[hi] == by_p[lo][:len(by_p[hi])]

    def test_minimum_one_story(self):
        splits = split_corpus(make_pool(3), SplitSpec(percentages=(95,)))
        assert len(splits[0].stories) == 1

    def test_zero_exclusion_is_whole_pool(self):
        pool = make_pool(10)
        splits = split_corpus(pool, SplitSpec(percentages=(0,)))
        assert sorted(s.title for s in splits[0].stories) == \
            sorted(s.title for s in pool)

    def test_seed_determinism(self):
        pool = make_pool(20)
        a = split_corpus(pool, SplitSpec(seed=3))
        b = split_corpus(pool, SplitSpec(seed=3))
        assert a == b
        c = split_corpus(pool, SplitSpec(percentages=(50,), seed=4))
        d = split_corpus(pool, SplitSpec(percentages=(50,), seed=5))
        assert [s.title for s in c[0].stories] != [s.title for s in d[0].stories]

    def test_bad_percentage(self):
        with pytest.raises(ValueError):
            SplitSpec(percentages=(100,))
        with pytest.raises(ValueError):
            SplitSpec(percentages=(-5,))

    def test_empty_pool(self):
        with pytest.raises(ValueError):
            split_corpus([], SplitSpec())

    def test_default_grid(self):
        assert DEFAULT_EXCLUSIONS == (0, 5, 25, 50, 70, 90, 95)


# ---------------------------------------------------------------------------
# round-trip properties
# ---------------------------------------------------------------------------


LABELS = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=12,
).filter(lambda s: s.strip("_"))


@st.composite
def stories_strategy(draw):
    n = draw(st.integers(min_value=1, max_value=4))
    out = []
    for i in range(n):
        k = draw(st.integers(min_value=1, max_value=5))
        turns = []
        for _ in range(k):
            turns.append(Turn(USER, draw(LABELS)))
            for _ in range(draw(st.integers(min_value=1, max_value=3))):
                turns.append(Turn(SYSTEM, draw(LABELS)))
        out.append(Story(title=f"story {i}", turns=tuple(turns)))
    return out


@settings(max_examples=40, deadline=None)
@given(stories_strategy())
def test_story_round_trip_property(tmp_path_factory, generated):
    p = tmp_path_factory.mktemp("rt") / "stories.md"
    p.write_text(serialize_stories(generated), encoding="utf-8")
    with warnings.catch_warnings():
        warnings.simplefilter("error", CorpusWarning)
        back = parse_stories(p)
    assert back == generated


@settings(max_examples=40, deadline=None)
@given(st.lists(
    st.tuples(LABELS, st.text(alphabet="abcdefghij klmnop", min_size=1, max_size=20)
              .map(str.strip).filter(bool)),
    min_size=1, max_size=12, unique_by=lambda t: t[1]))
def test_nlu_round_trip_property(tmp_path_factory, pairs):
    # serialization groups by intent, so order is canonical, content preserved
    examples = [NLUExample(text=t, intent=i) for i, t in pairs]
    p = tmp_path_factory.mktemp("rt") / "nlu.md"
    text = serialize_nlu_data(examples)
    p.write_text(text, encoding="utf-8")
    back = parse_nlu_data(p)
    assert {(e.text, e.intent) for e in back} == \
        {(e.text, e.intent) for e in examples}
    assert serialize_nlu_data(back) == text
