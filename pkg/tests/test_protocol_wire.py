import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surgassist.protocol import (
    DuplicateBlockError,
    FunctionCall,
    MalformedCallPayloadError,
    MissingReplyError,
    ParseError,
    StructuredReply,
    UnbalancedTagsError,
    escape_text,
    parse_structured,
    render_structured,
    unescape_text,
)


def test_render_no_call_has_two_blocks():
    text = render_structured(StructuredReply("t", None, "r"))
    assert text.count("<think>") == 1
    assert text.count("<reply>") == 1
    assert "<call>" not in text


def test_detection_example_round_trips():
    call = FunctionCall("detect", {"target": "navigation probe"})
    reply = StructuredReply(
        thinking="A detection model can confirm the target's presence.",
        calling=call,
        replying="The navigation probe is detected at [0.18, 0.41, 0.45, 0.99].",
    )
    parsed = parse_structured(render_structured(reply))
    assert parsed == reply
    assert parsed.calling.api_params == {"target": "navigation probe"}


def test_delimiters_in_free_text_are_escaped():
    reply = StructuredReply(
        thinking="literal <reply> inside thinking",
        calling=None,
        replying="reply quoting </think> and <call> tags plus a backslash \\",
    )
    text = render_structured(reply)
    assert parse_structured(text) == reply


def test_call_params_may_contain_tags_and_json_escapes():
    call = FunctionCall("detect", {"target": 'tricky "</call>" \\ value'})
    reply = StructuredReply("t", call, "r")
    assert parse_structured(render_structured(reply)) == reply


def test_missing_think_block_parses_as_empty_thinking():
    parsed = parse_structured("<reply>just an answer</reply>")
    assert parsed.thinking == ""
    assert parsed.calling is None
    assert parsed.replying == "just an answer"


def test_whitespace_between_blocks_ignored_content_exact():
    reply = StructuredReply("  padded  ", None, " r ")
    text = render_structured(reply)
    assert parse_structured("\n  " + text + "  \n") == reply


def test_missing_reply_error():
    with pytest.raises(MissingReplyError):
        parse_structured("<think>only thoughts</think>")


def test_duplicate_block_error():
    with pytest.raises(DuplicateBlockError) as exc:
        parse_structured("<reply>a</reply><reply>b</reply>")
    assert exc.value.kind == "duplicate_block"
    assert exc.value.offset is not None


def test_unbalanced_tags_errors():
    for text in (
        "<think>open only<reply>r</reply>",
        "</think>stray close<reply>r</reply>",
        "<think><call></think></call><reply>r</reply>",
        "<reply>never closed",
    ):
        with pytest.raises(UnbalancedTagsError):
            parse_structured(text)


def test_malformed_call_payload_carries_span():
    text = "<think>t</think><call>{not json</call><reply>r</reply>"
    with pytest.raises(MalformedCallPayloadError) as exc:
        parse_structured(text)
    start, end = exc.value.span
    assert text[start:end] == "{not json"


def test_call_payload_schema_enforced():
    bad_payloads = [
        '"just a string"',
        '{"api_name": "detect"}',
        '{"api_name": "detect", "api_params": {}, "extra": 1}',
        '{"api_name": "bad name!", "api_params": {}}',
        '{"api_name": "detect", "api_params": {"k": 5}}',
    ]
    for payload in bad_payloads:
        text = f"<think>t</think><call>{payload}</call><reply>r</reply>"
        with pytest.raises(MalformedCallPayloadError):
            parse_structured(text)


def test_escape_unescape_inverse():
    samples = [
        "",
        "\\",
        "\\\\<think>",
        "<think></think><call></call><reply></reply>",
        "a\\<reply>b",
        "ends with backslash \\",
    ]
    for s in samples:
        assert unescape_text(escape_text(s)) == s


def test_api_name_validation():
    with pytest.raises(ValueError):
        FunctionCall("", {})
    with pytest.raises(ValueError):
        FunctionCall("bad name", {})
    FunctionCall("ok_name-1.2", {})


# --- property tests ----------------------------------------------------------

# Free text including the delimiters themselves and backslashes.
adversarial_text = st.text(
    alphabet=st.sampled_from(list("ab \\<>/{}\"'\n") + ["x", "y"]), max_size=40
).flatmap(
    lambda base: st.sampled_from(
        [
            base,
            base + "<reply>",
            "</think>" + base,
            base + "\\",
            "\\<call>" + base + "</call>",
        ]
    )
)

param_names = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=8
)
api_names = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-",
    min_size=1,
    max_size=12,
)

calls = st.one_of(
    st.none(),
    st.builds(
        FunctionCall,
        api_name=api_names,
        api_params=st.dictionaries(param_names, adversarial_text, max_size=3),
    ),
)

replies = st.builds(
    StructuredReply,
    thinking=adversarial_text,
    calling=calls,
    replying=adversarial_text,
)


@settings(max_examples=400, deadline=None)
@given(reply=replies)
def test_round_trip_property(reply):
    assert parse_structured(render_structured(reply)) == reply


@settings(max_examples=200, deadline=None)
@given(reply=replies, seed=st.integers(0, 2**32 - 1))
def test_mutations_yield_typed_errors_or_valid_parses(reply, seed):
    """Structural mutations of a valid render never crash the parser."""
    rng = random.Random(seed)
    text = render_structured(reply)
    mutation = rng.choice(["drop_tag", "dup_block", "swap_char", "truncate", "insert_tag"])
    if mutation == "drop_tag":
        for tag in ("</reply>", "</think>", "</call>"):
            if tag in text:
                text = text.replace(tag, "", 1)
                break
    elif mutation == "dup_block":
        text = text + "\n<reply>again</reply>"
    elif mutation == "swap_char" and len(text) > 2:
        i = rng.randrange(len(text) - 1)
        text = text[:i] + text[i + 1] + text[i] + text[i + 2 :]
    elif mutation == "truncate":
        text = text[: rng.randrange(len(text))] if text else text
    elif mutation == "insert_tag":
        i = rng.randrange(len(text) + 1)
        text = text[:i] + rng.choice(["<think>", "</reply>", "<call>"]) + text[i:]
    try:
        parse_structured(text)
    except ParseError:
        pass  # typed failure is the contract


def test_ordered_params_round_trip_order():
    call = FunctionCall("f", {"b": "1", "a": "2", "c": "3"})
    parsed = parse_structured(render_structured(StructuredReply("t", call, "r")))
    assert list(parsed.calling.api_params.items()) == [("b", "1"), ("a", "2"), ("c", "3")]
