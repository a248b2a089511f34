"""Parameter constructions: coefficients, denominators, induced types."""

import numpy as np
import pytest

from latent_bounds import (
    AlternativeSet,
    LatentIndex,
    OutcomeGrid,
    ParameterSpec,
    average_access_effect,
    average_effect_on_participants,
    custom_linear,
    participation_proportion,
)
from latent_bounds.latent_space import choice


def hsis_index(m=2):
    alts = AlternativeSet(("n", "a", "h"))
    grid = OutcomeGrid(tuple(float(v) for v in range(m)))
    return alts, LatentIndex(alts, grid)


class TestParameterSpec:
    def test_linear_sentinel(self):
        p = ParameterSpec(name="x", a_num={0: 1.0}, den=None)
        assert p.is_linear
        q = ParameterSpec(name="y", a_num={0: 1.0}, den=frozenset({0, 1}))
        assert not q.is_linear

    def test_empty_denominator_rejected(self):
        with pytest.raises(ValueError):
            ParameterSpec(name="bad", a_num={}, den=frozenset())

    def test_nonfinite_coefficient_rejected(self):
        with pytest.raises(ValueError):
            ParameterSpec(name="bad", a_num={0: float("nan")}, den=None)

    def test_sparse_default_zero(self):
        p = ParameterSpec(name="x", a_num={3: 2.0}, den=None)
        assert p.coefficient(0) == 0.0
        assert p.coefficient(3) == 2.0
        vec = p.coefficient_vector(np.array([0, 3, 5]))
        assert list(vec) == [0.0, 2.0, 0.0]

    def test_den_mask_whole_space(self):
        p = ParameterSpec(name="x", a_num={}, den=None)
        assert p.den_mask(np.array([0, 1, 2])).all()


class TestParticipationProportion:
    def test_selected_types_prefer_target_over_baseline(self):
        # adding h to {n} induces exactly the types ranking h above n:
        # (h,a,n), (h,n,a), (a,h,n) -- 3 of the 6 orderings
        alts, idx = hsis_index(2)
        pp = participation_proportion(idx, "h", ["n"])
        n, h = alts.index("n"), alts.index("h")
        expected_types = {k for k, u in enumerate(idx.preferences)
                          if u.prefers(h, n)}
        assert len(expected_types) == 3
        _, pref, _, _ = idx.components
        hit_types = {int(pref[i]) for i in pp.a_num}
        assert hit_types == expected_types
        # indicator coefficients, full coverage of those types
        assert set(pp.a_num.values()) == {1.0}
        assert len(pp.a_num) == idx.total_count // 2

    def test_target_already_in_baseline_rejected(self):
        _, idx = hsis_index(2)
        with pytest.raises(ValueError):
            participation_proportion(idx, "h", ["n", "h"])

    def test_matches_bruteforce_induced_indicator(self):
        alts, idx = hsis_index(2)
        pp = participation_proportion(idx, "h", ["n"])
        with_set = alts.choice_set(["n", "h"])
        base = alts.choice_set(["n"])
        h = alts.index("h")
        for i in range(0, idx.total_count, 59):
            w = idx.point_at(i)
            u = idx.preferences[w.pref]
            induced = (choice(u, with_set) == h and choice(u, base) != h)
            assert pp.coefficient(i) == (1.0 if induced else 0.0)


class TestAverageAccessEffect:
    def test_requires_strict_nesting(self):
        _, idx = hsis_index(2)
        with pytest.raises(ValueError):
            average_access_effect(idx, ["n"], ["n"])
        with pytest.raises(ValueError):
            average_access_effect(idx, ["n", "a"], ["n", "h"])

    def test_coefficient_is_outcome_delta(self):
        alts, idx = hsis_index(3)
        ate = average_access_effect(idx, ["n", "h"], ["n"])
        grid = np.asarray(idx.grid.points)
        ws, wos = alts.choice_set(["n", "h"]), alts.choice_set(["n"])
        for i in range(0, idx.total_count, 97):
            w = idx.point_at(i)
            u = idx.preferences[w.pref]
            delta = (grid[w.outcomes[choice(u, ws)]]
                     - grid[w.outcomes[choice(u, wos)]])
            assert ate.coefficient(i) == pytest.approx(delta)

    def test_zero_for_unswitched_types(self):
        # a type preferring n keeps choosing n, so its coefficient is 0
        alts, idx = hsis_index(2)
        ate = average_access_effect(idx, ["n", "h"], ["n"])
        n = alts.index("n")
        for i in ate.a_num:
            w = idx.point_at(i)
            u = idx.preferences[w.pref]
            assert u.prefers(alts.index("h"), n)


class TestAverageEffectOnParticipants:
    def test_same_numerator_as_unconditional_effect(self):
        _, idx = hsis_index(2)
        ate = average_access_effect(idx, ["n", "h"], ["n"])
        atop = average_effect_on_participants(idx, ["n", "h"], ["n"], "h")
        assert atop.a_num == ate.a_num
        assert not atop.is_linear

    def test_denominator_is_induced_set(self):
        _, idx = hsis_index(2)
        pp = participation_proportion(idx, "h", ["n"])
        atop = average_effect_on_participants(idx, ["n", "h"], ["n"], "h")
        assert atop.den == frozenset(pp.a_num)

    def test_target_must_be_added_alternative(self):
        _, idx = hsis_index(2)
        with pytest.raises(ValueError):
            average_effect_on_participants(idx, ["n", "h"], ["n"], "a")


class TestCustomLinear:
    def test_drops_zero_coefficients(self):
        p = custom_linear({0: 0.0, 1: 2.5})
        assert p.a_num == {1: 2.5}
        assert p.is_linear
