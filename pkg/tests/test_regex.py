from __future__ import annotations

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curaflow.script.regex import RegexError, regex_findall, regex_match, search

atoms = st.sampled_from(["a", "b", "c", ".", "[ab]", "[^a]", "[a-c]", "\\d", "\\w", "\\s", "\\.", "1"])


QUANTIFIERS = st.sampled_from(["", "", "", "*", "+", "?", "{2}", "{1,3}", "{0,2}", "{2,}"])


def _units(inner):
    seq = st.lists(inner, min_size=1, max_size=3).map("".join)
    group = st.one_of(
        seq.map(lambda x: "(?:" + x + ")"),
        st.lists(seq, min_size=2, max_size=3).map(lambda xs: "(" + "|".join(xs) + ")"),
    )
    return st.tuples(group, QUANTIFIERS).map(_safe_repeat)


def _safe_repeat(t):
    # Python stops repeating a group once an iteration matches empty; a Pike VM
    # does not, so repeated nullable groups are outside the shared semantics
    group, q = t
    if q not in ("", "?") and re.fullmatch(group, "") is not None:
        q = ""
    return group + q


units = st.recursive(st.tuples(atoms, QUANTIFIERS).map("".join), _units, max_leaves=6)
patterns = st.lists(units, min_size=1, max_size=3).map("".join)
anchored = st.tuples(st.sampled_from(["", "^"]), patterns, st.sampled_from(["", "$"])).map("".join)
subjects = st.text(alphabet="abc1 .\n", max_size=12)


@settings(max_examples=600, deadline=None)
@given(anchored, subjects)
def test_search_agrees_with_re(pattern, s):
    m = re.search(pattern, s)
    assert search(pattern, s) == (m.span() if m else None)
    assert regex_match(s, pattern) == (m is not None)


@settings(max_examples=300, deadline=None)
@given(patterns, subjects)
def test_findall_agrees_with_re(pattern, s):
    expected = [m.group(0) for m in re.finditer(pattern, s) if m.group(0)]
    assert regex_findall(s, pattern) == expected


@pytest.mark.parametrize("pattern", ["(", "a{3,1}", "[", "*a", "a**", "\\1", "(?=a)", "a{5000}"])
def test_rejected_patterns(pattern):
    with pytest.raises(RegexError):
        search(pattern, "aaa")


def test_linear_time_on_pathological_pattern():
    # catastrophic for backtracking engines
    assert search("(a|a)*b", "a" * 3000) is None
    assert search("(a*)*c", "a" * 3000) is None


def test_findall_words():
    assert regex_findall("Ada Lovelace, 1815.", "[A-Za-z]+") == ["Ada", "Lovelace"]
    assert regex_findall("abc", "x*") == []
