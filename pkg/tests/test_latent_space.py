"""Enumeration, indexing and choice behavior of the latent sample space."""


import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latent_bounds import (
    AlternativeSet,
    ChoiceSet,
    LatentIndex,
    OutcomeGrid,
    PreferenceType,
    choice,
)
from latent_bounds.latent_space import (
    MAX_ALTERNATIVES,
    EmptyChoiceSet,
    enumerate_choice_sets,
    enumerate_preferences,
)


def make_index(n_alts, m):
    alts = AlternativeSet(tuple(f"d{k}" for k in range(n_alts)))
    grid = OutcomeGrid(tuple(float(v) for v in range(m)))
    return LatentIndex(alts, grid)


class TestAlternativeSet:
    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            AlternativeSet(("n", "n"))

    def test_rejects_single_alternative(self):
        with pytest.raises(ValueError):
            AlternativeSet(("n",))

    def test_caps_alternative_count(self):
        labels = tuple(f"d{k}" for k in range(MAX_ALTERNATIVES + 1))
        with pytest.raises(ValueError):
            AlternativeSet(labels)

    def test_unknown_label(self):
        alts = AlternativeSet(("n", "h"))
        with pytest.raises(KeyError):
            alts.index("x")

    def test_choice_set_requires_base(self):
        alts = AlternativeSet(("n", "a", "h"))
        with pytest.raises(ValueError):
            alts.choice_set(["a", "h"])


class TestEnumeration:
    def test_preference_count_is_factorial(self):
        for n in (2, 3, 4):
            alts = AlternativeSet(tuple(f"d{k}" for k in range(n)))
            import math
            assert len(enumerate_preferences(alts)) == math.factorial(n)

    def test_choice_set_count(self):
        # subsets containing the base alternative
        for n in (2, 3, 4):
            alts = AlternativeSet(tuple(f"d{k}" for k in range(n)))
            assert len(enumerate_choice_sets(alts)) == 2 ** (n - 1)

    def test_choice_sets_ascend_and_contain_base(self):
        alts = AlternativeSet(("n", "a", "h"))
        sets = enumerate_choice_sets(alts)
        masks = [c.mask for c in sets]
        assert masks == sorted(masks)
        assert all(c.contains(alts.base_index) for c in sets)

    def test_total_count_formula(self):
        # M^|D| outcomes x |D|! preferences x |C|^2 choice-set pairs
        idx = make_index(3, 10)
        assert idx.total_count == 10 ** 3 * 6 * 4 ** 2 == 96_000

    def test_mfe_shape_total_count(self):
        idx = make_index(4, 3)
        assert idx.total_count == 3 ** 4 * 24 * 8 ** 2 == 124_416


class TestChoice:
    def test_picks_highest_ranked_member(self):
        u = PreferenceType((2, 0, 1))
        assert choice(u, ChoiceSet(0b011)) == 0
        assert choice(u, ChoiceSet(0b111)) == 2
        assert choice(u, ChoiceSet(0b010)) == 1

    def test_empty_set_raises(self):
        u = PreferenceType((0, 1))
        with pytest.raises((EmptyChoiceSet, ValueError)):
            choice(u, ChoiceSet(0))

    def test_prefers_is_strict_order(self):
        u = PreferenceType((1, 2, 0))
        assert u.prefers(1, 0) and u.prefers(1, 2) and u.prefers(2, 0)
        assert not u.prefers(0, 1)


class TestIndexRoundTrip:
    @pytest.mark.parametrize("n,m", [(2, 2), (2, 3), (3, 2)])
    def test_bijective(self, n, m):
        idx = make_index(n, m)
        seen = set()
        for i in range(idx.total_count):
            w = idx.point_at(i)
            assert idx.index_of(w) == i
            seen.add((w.outcomes, w.pref, w.c0.mask, w.c1.mask))
        assert len(seen) == idx.total_count

    def test_out_of_range(self):
        idx = make_index(2, 2)
        with pytest.raises(IndexError):
            idx.point_at(idx.total_count)

    def test_outcomes_vary_fastest(self):
        idx = make_index(2, 3)
        w0, w1 = idx.point_at(0), idx.point_at(1)
        assert w0.outcomes[0] == 0 and w1.outcomes[0] == 1
        assert (w0.pref, w0.c0, w0.c1) == (w1.pref, w1.c0, w1.c1)

    def test_components_match_point_at(self):
        idx = make_index(3, 2)
        outcomes, pref, c0, c1 = idx.components
        for i in (0, 1, 17, idx.total_count - 1):
            w = idx.point_at(i)
            assert tuple(outcomes[i]) == w.outcomes
            assert pref[i] == w.pref
            assert idx.choice_sets[c0[i]].mask == w.c0.mask
            assert idx.choice_sets[c1[i]].mask == w.c1.mask

    def test_chosen_alternative_matches_scalar_choice(self):
        idx = make_index(3, 2)
        for z in (0, 1):
            d = idx.chosen_alternative(z)
            for i in (0, 5, 100, idx.total_count - 1):
                w = idx.point_at(i)
                u = idx.preferences[w.pref]
                c = w.c1 if z else w.c0
                assert d[i] == choice(u, c)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=96_000 - 1))
def test_roundtrip_property_hsis_shape(i):
    idx = _HSIS_IDX
    assert idx.index_of(idx.point_at(i)) == i


_HSIS_IDX = make_index(3, 10)


@settings(max_examples=30, deadline=None)
@given(st.permutations(list(range(3))), st.integers(1, 7))
def test_choice_respects_preference(ranking, raw_mask):
    u = PreferenceType(tuple(ranking))
    mask = raw_mask  # any non-empty subset of 3 alternatives
    c = ChoiceSet(mask)
    d = choice(u, c)
    assert c.contains(d)
    for other in c.members():
        assert other == d or u.prefers(d, other)
