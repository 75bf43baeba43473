"""Binary agreement state machine tests."""

import pytest

from snowsim.snowflake import (RoundSample, SnowflakeParams, answer_query,
                               draw_sample, end_round, init, tally)

DEFAULTS = SnowflakeParams(k=80, alpha1=41, alpha2=72, beta=12)


def sample(ones: int, zeros: int, missing: int = 0) -> RoundSample:
    return RoundSample(tuple([1] * ones + [0] * zeros + [None] * missing))


class TestParams:
    def test_alpha1_must_exceed_half(self):
        with pytest.raises(ValueError):
            SnowflakeParams(k=80, alpha1=40, alpha2=72, beta=12)

    def test_alpha2_at_least_alpha1(self):
        with pytest.raises(ValueError):
            SnowflakeParams(k=80, alpha1=41, alpha2=40, beta=12)

    def test_alpha2_at_most_k(self):
        with pytest.raises(ValueError):
            SnowflakeParams(k=80, alpha1=41, alpha2=81, beta=12)

    def test_rule_alpha2_at_most_k(self):
        with pytest.raises(ValueError):
            SnowflakeParams(k=80, alpha1=41, alpha2=72, beta=12,
                            rules=((81, 1),))

    def test_single_rule_view(self):
        assert DEFAULTS.decision_rules == ((72, 12),)


class TestInit:
    def test_val_one(self):
        st = init(1, DEFAULTS)
        assert st.val == 1 and st.count == 0 and st.decided is None

    def test_val_zero(self):
        assert init(0, DEFAULTS).val == 0

    def test_error_driven_has_two_counters(self):
        p = SnowflakeParams(k=80, alpha1=41, alpha2=72, beta=12,
                            rules=((80, 3), (72, 12)))
        assert init(1, p).counts == (0, 0)

    def test_rejects_non_bit(self):
        with pytest.raises(ValueError):
            init(2, DEFAULTS)


def test_answer_query_reports_val():
    assert answer_query(init(0, DEFAULTS)) == 0
    assert answer_query(init(1, DEFAULTS)) == 1


def test_draw_sample_deterministic():
    assert draw_sample(5, 3, 2, 500, 80) == draw_sample(5, 3, 2, 500, 80)
    assert len(draw_sample(5, 3, 2, 500, 80)) == 80


class TestEndRound:
    def test_flip_at_alpha1_then_confidence_for_new_val(self):
        # 41 ones against val=0 flips; 41 < alpha2 so the counter stays 0.
        st = end_round(init(0, DEFAULTS), sample(41, 39), DEFAULTS)
        assert st.val == 1 and st.count == 0 and st.decided is None

    def test_flip_zeroes_counts(self):
        st = init(0, DEFAULTS)
        for _ in range(3):
            st = end_round(st, sample(0, 80), DEFAULTS)
        assert st.count == 3
        st = end_round(st, sample(41, 39), DEFAULTS)
        assert st.val == 1 and st.count == 0

    def test_decision_at_beta(self):
        st = init(1, DEFAULTS)
        for r in range(11):
            st = end_round(st, sample(72, 8), DEFAULTS)
            assert st.count == r + 1 and st.decided is None
        st = end_round(st, sample(72, 8), DEFAULTS)
        assert st.count == 12 and st.decided == 1

    def test_missing_counts_toward_neither(self):
        # 71 ones + 9 missing: below alpha2 resets the counter; 0 zeros so no
        # flip either.
        st = init(1, DEFAULTS)
        st = end_round(st, sample(72, 8), DEFAULTS)
        st = end_round(st, sample(71, 0, 9), DEFAULTS)
        assert st.val == 1 and st.count == 0

    def test_flip_then_strong_support_counts_same_round(self):
        # A flip followed by >= alpha2 matching responses increments the new
        # counter to 1 in the same round.
        st = end_round(init(0, DEFAULTS), sample(72, 8), DEFAULTS)
        assert st.val == 1 and st.count == 1

    def test_error_driven_fast_rule(self):
        p = SnowflakeParams(k=80, alpha1=41, alpha2=72, beta=12,
                            rules=((80, 3), (72, 12)))
        st = init(0, p)
        for r in range(1, 4):
            st = end_round(st, sample(0, 80), p)
            assert st.round == r
        assert st.decided == 0 and st.counts == (3, 3)

    def test_error_driven_rules_reset_independently(self):
        p = SnowflakeParams(k=80, alpha1=41, alpha2=72, beta=12,
                            rules=((80, 3), (72, 12)))
        st = init(1, p)
        st = end_round(st, sample(80, 0), p)
        st = end_round(st, sample(72, 8), p)   # fails the 80-rule only
        assert st.counts == (0, 2)

    def test_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            end_round(init(1, DEFAULTS), sample(40, 39), DEFAULTS)

    def test_rejects_decided_state(self):
        st = init(1, SnowflakeParams(k=80, alpha1=41, alpha2=72, beta=1))
        st = end_round(st, sample(80, 0),
                       SnowflakeParams(k=80, alpha1=41, alpha2=72, beta=1))
        with pytest.raises(ValueError):
            end_round(st, sample(80, 0),
                      SnowflakeParams(k=80, alpha1=41, alpha2=72, beta=1))

    def test_pure_function(self):
        st = init(1, DEFAULTS)
        s = sample(60, 20)
        assert end_round(st, s, DEFAULTS) == end_round(st, s, DEFAULTS)

    def test_flip_iff_alpha1_opposite(self):
        for ones in range(81):
            st = end_round(init(0, DEFAULTS), sample(ones, 80 - ones), DEFAULTS)
            assert (st.val == 1) == (ones >= 41)


def test_tally_counts():
    assert tally([1, 1, 0, None, 1]) == (3, 1, 1)


def test_rejects_bad_response_values():
    with pytest.raises(ValueError):
        RoundSample((2,) * 80)
