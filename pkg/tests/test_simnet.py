"""Simulator, configuration, adversary, and monitor tests."""

import json
import warnings

import pytest

from snowsim.simnet import (ConfigError, Metrics, SimConfig, Trace, check_all,
                            metrics_csv, parse_jsonl, run)
from snowsim.simnet import adversary as adv
from snowsim.simnet.blockgen import BlockGenerator
from snowsim.simnet.monitors import (monitor_agreement, monitor_consistency,
                                     monitor_delivery, monitor_quorum,
                                     monitor_validity)
from snowsim.blocks import make_genesis


def small_config(**over):
    doc = {
        "n": 40, "f": 7, "protocol": "snowflake",
        "params": {"k": 10, "alpha1": 6, "alpha2": 9, "beta": 3},
        "seed": 5, "max_timeslots": 200, "mode": "tally",
        "inputs": "split", "adversary": {"name": "split-keeper"},
    }
    doc.update(over)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SimConfig.from_dict(doc)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

class TestConfig:
    def test_n_one_rejected_with_field_path(self):
        with pytest.raises(ConfigError, match="config field n"):
            small_config(n=1, f=0)

    def test_f_must_be_below_n(self):
        with pytest.raises(ConfigError):
            small_config(f=40)

    def test_alpha1_must_exceed_half_k(self):
        with pytest.raises(ConfigError):
            small_config(params={"k": 10, "alpha1": 5, "alpha2": 9, "beta": 3})

    def test_unknown_protocol_rejected(self):
        with pytest.raises(ConfigError, match="protocol"):
            small_config(protocol="paxos")

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError):
            small_config(bogus=1)

    def test_frosty_requires_gamma(self):
        with pytest.raises(ConfigError, match="alpha3 and gamma"):
            small_config(protocol="frosty")

    def test_rules_snowflake_only(self):
        with pytest.raises(ConfigError, match="snowflake only"):
            small_config(protocol="snowman", adversary={"name": "equivocator"},
                         params={"k": 10, "alpha1": 6, "alpha2": 9, "beta": 3,
                                 "rules": [[10, 1]]})

    def test_too_many_unit_inputs_rejected(self):
        with pytest.raises(ConfigError, match="unit inputs"):
            small_config(inputs={"ones": 34})

    def test_below_scale_warns(self):
        with pytest.warns(UserWarning, match="below the analyzed scale"):
            SimConfig.from_dict({
                "n": 40, "f": 0, "protocol": "snowflake",
                "params": {"k": 10, "alpha1": 6, "alpha2": 9, "beta": 3},
                "seed": 1})

    def test_derived_quantities(self):
        cfg = small_config()
        assert cfg.slots_per_round == 2 and cfg.max_rounds == 100
        assert cfg.correct == 33 and list(cfg.byzantine_ids()) == list(range(33, 40))
        assert cfg.initial_ones() == 17

    def test_inputs_variants(self):
        assert small_config(inputs="unanimous-1").initial_ones() == 33
        assert small_config(inputs="unanimous-0").initial_ones() == 0
        assert small_config(inputs={"ones": 5}).initial_ones() == 5

    def test_to_dict_round_trip(self):
        cfg = small_config()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert SimConfig.from_dict(cfg.to_dict()) == cfg


# ---------------------------------------------------------------------------
# Trace and metrics containers
# ---------------------------------------------------------------------------

class TestTrace:
    def test_round_trip(self):
        tr = Trace()
        tr.append(0, "run_start", n=3)
        tr.append(2, "decide", proc=1, value=0, round=1)
        back = parse_jsonl(tr.to_jsonl())
        assert back.events == tr.events

    def test_parse_rejects_bad_json(self):
        with pytest.raises(ValueError, match="not valid JSON"):
            parse_jsonl("{nope\n")

    def test_parse_rejects_missing_fields(self):
        with pytest.raises(ValueError, match="required fields"):
            parse_jsonl('{"t": 1}\n')

    def test_select(self):
        tr = Trace()
        tr.append(0, "a")
        tr.append(1, "b")
        assert [e["t"] for e in tr.select("b")] == [1]

    def test_metrics_csv(self):
        m = Metrics(seed=1, protocol="snowflake", n=40, f=7)
        out = metrics_csv([m])
        header, row = out.strip().split("\n")
        assert header.startswith("seed,protocol,n,f")
        assert row.startswith("1,snowflake,40,7")


# ---------------------------------------------------------------------------
# Adversary strategies
# ---------------------------------------------------------------------------

class TestAdversary:
    def test_minority_bit(self):
        assert adv.minority_bit(10, 20) == 1
        assert adv.minority_bit(20, 10) == 0
        assert adv.minority_bit(15, 15) == 1  # ties keep the split alive

    def test_snowflake_replies(self):
        assert adv.snowflake_reply("crash", 1, 5, 5) is None
        assert adv.snowflake_reply("split-keeper", 1, 4, 6) == 1
        assert adv.snowflake_reply("opposite", 1, 0, 0) == 0
        with pytest.raises(ValueError):
            adv.snowflake_reply("equivocator", 1, 0, 0)

    def test_chain_weights_split_keeper_backs_weakest(self):
        w = adv.chain_byz_weights("split-keeper", ["00", "01"],
                                  {"001": 30, "011": 3}, "0")
        assert w == {"01": 1.0}

    def test_chain_weights_equivocator_splits(self):
        w = adv.chain_byz_weights("equivocator", ["00", "01"],
                                  {"001": 30, "011": 3}, "0", split=0.8)
        assert w == {"00": 0.8, "01": pytest.approx(0.2)}

    def test_chain_weights_no_fork_echoes_frontier(self):
        assert adv.chain_byz_weights("split-keeper", [], {}, "0") == {"0": 1.0}

    def test_adversary_step(self):
        view = adv.AdversaryView(round=1, correct_ones=4, correct_zeros=6,
                                 querier_vals=(0, 1))
        assert adv.adversary_step(view, "opposite") == [1, 0]
        with pytest.raises(ValueError):
            adv.adversary_step(view, "none")


# ---------------------------------------------------------------------------
# Block generation
# ---------------------------------------------------------------------------

class TestBlockGen:
    def test_silent(self):
        g = make_genesis(8)
        assert BlockGenerator("silent", 8).tick(1, g) == []

    def test_single_chain_period(self):
        g = make_genesis(8)
        bg = BlockGenerator("single-chain", 8, period=3, start_round=2)
        assert bg.tick(1, g) == []
        assert len(bg.tick(2, g)) == 1
        assert bg.tick(3, g) == []
        assert len(bg.tick(5, g)) == 1

    def test_forking_two_children(self):
        g = make_genesis(8)
        out = BlockGenerator("forking", 8).tick(0, g)
        assert len(out) == 2 and all(b.parent == g.id for b in out)
        assert out[0].label != out[1].label

    def test_max_blocks(self):
        g = make_genesis(8)
        bg = BlockGenerator("forking", 8, max_blocks=3)
        assert len(bg.tick(0, g)) == 2
        assert len(bg.tick(1, g)) == 1
        assert bg.tick(2, g) == []

    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            BlockGenerator("mystery", 8)


# ---------------------------------------------------------------------------
# Monitors (self-tests on crafted traces)
# ---------------------------------------------------------------------------

def base_trace(protocol="snowman", **meta):
    tr = Trace()
    fields = {"protocol": protocol, "n": 4, "f": 1, "seed": 0,
              "inputs": "split", "delta": 1, "gamma": 3,
              "genesis_label": "0", "max_timeslots": 100,
              "adversary": "none", "mode": "indexed"}
    fields.update(meta)
    tr.append(0, "run_start", **fields)
    return tr


class TestMonitors:
    def test_agreement_flags_conflicting_decisions(self):
        tr = base_trace("snowflake")
        tr.append(2, "decide", proc=0, round=1, value=1)
        tr.append(2, "decide", proc=1, round=1, value=0)
        v = monitor_agreement(tr)
        assert len(v) == 1 and v[0]["monitor"] == "agreement"
        assert v[0]["procs"] == [0, 1]

    def test_validity_flags_wrong_unanimous_output(self):
        tr = base_trace("snowflake", inputs="unanimous-1")
        tr.append(2, "decide", proc=0, round=1, value=0)
        assert monitor_validity(tr)[0]["monitor"] == "validity"

    def test_validity_ignores_split_inputs(self):
        tr = base_trace("snowflake", inputs="split")
        tr.append(2, "decide", proc=0, round=1, value=0)
        assert monitor_validity(tr) == []

    def test_consistency_i_flags_non_extension(self):
        tr = base_trace()
        tr.append(2, "final", proc=0, round=1, value="011")
        tr.append(4, "final", proc=0, round=2, value="00")
        kinds = {v["monitor"] for v in monitor_consistency(tr)}
        assert "consistency-i" in kinds

    def test_consistency_ii_flags_incomparable_finals(self):
        tr = base_trace()
        tr.append(2, "final", proc=0, round=1, value="011")
        tr.append(4, "final", proc=1, round=1, value="000")
        kinds = [v["monitor"] for v in monitor_consistency(tr)]
        assert "consistency-ii" in kinds

    def test_consistency_clean_trace(self):
        tr = base_trace()
        tr.append(2, "final", proc=0, round=1, value="01")
        tr.append(4, "final", proc=1, round=1, value="011")
        tr.append(6, "final", proc=0, round=2, value="0110")
        assert monitor_consistency(tr) == []

    def test_delivery_flags_late_messages(self):
        tr = base_trace("frosty")
        tr.append(3, "send", kind="vote1", src=2, deliver=5)
        assert monitor_delivery(tr)[0]["monitor"] == "delivery"

    def test_quorum_flags_double_stage1(self):
        tr = base_trace("frosty")
        tr.append(4, "qc", stage=1, r=1, e=1, pid="aaa", value="01")
        tr.append(4, "qc", stage=1, r=1, e=1, pid="bbb", value="00")
        assert monitor_quorum(tr)[0]["monitor"] == "quorum"

    def test_quorum_flags_double_confirm(self):
        tr = base_trace("frosty")
        tr.append(4, "confirm", proc=0, e=1, value="01", pid="aaa")
        tr.append(4, "confirm", proc=1, e=1, value="00", pid="bbb")
        assert len(monitor_quorum(tr)) == 1

    def test_check_all_routes_by_protocol(self):
        tr = base_trace("snowflake")
        tr.append(2, "decide", proc=0, round=1, value=1)
        tr.append(2, "decide", proc=1, round=1, value=0)
        assert check_all(tr)
        clean = base_trace("snowflake")
        assert check_all(clean) == []


# ---------------------------------------------------------------------------
# End-to-end runs (small populations; scale warning suppressed)
# ---------------------------------------------------------------------------

class TestEngine:
    def test_snowflake_unanimous_decides_at_beta(self):
        cfg = small_config(f=0, inputs="unanimous-1", mode="indexed",
                           adversary={"name": "none"})
        trace, metrics = run(cfg)
        decides = trace.select("decide")
        assert len(decides) == 40  # f=0: the whole population is correct
        assert all(e["round"] == 3 and e["value"] == 1 for e in decides)
        assert metrics.violations == 0
        assert metrics.first_decision_round == metrics.last_decision_round == 3

    def test_tally_and_indexed_modes_both_run_clean(self):
        for mode in ("tally", "indexed"):
            _, metrics = run(small_config(mode=mode))
            assert metrics.violations == 0

    def test_determinism_byte_identical(self):
        cfg = small_config()
        t1, m1 = run(cfg)
        t2, m2 = run(cfg)
        assert t1.to_jsonl() == t2.to_jsonl()
        assert m1.row() == m2.row()

    def test_snowman_small_run_consistent(self):
        cfg = small_config(
            protocol="snowman", mode="indexed", max_timeslots=60,
            adversary={"name": "equivocator", "split": 0.8},
            block_gen={"policy": "forking", "period": 5, "start_round": 1,
                       "max_blocks": 4},
            label_bits=4)
        t1, m1 = run(cfg)
        t2, _ = run(cfg)
        assert m1.violations == 0
        assert t1.to_jsonl() == t2.to_jsonl()

    def test_frosty_small_run_reaches_fallback(self):
        cfg = small_config(
            protocol="frosty", mode="indexed", n=20, f=3, max_timeslots=360,
            params={"k": 10, "alpha1": 6, "alpha2": 9, "alpha3": 6,
                    "beta": 4, "gamma": 5},
            adversary={"name": "split-keeper"},
            block_gen={"policy": "forking", "period": 1, "start_round": 1,
                       "max_blocks": 2},
            label_bits=4)
        t1, m1 = run(cfg)
        t2, _ = run(cfg)
        assert m1.violations == 0
        assert t1.to_jsonl() == t2.to_jsonl()

    def test_replay_round_trip_identical_verdicts(self):
        trace, _ = run(small_config())
        replayed = parse_jsonl(trace.to_jsonl())
        assert check_all(replayed) == check_all(trace)

    def test_tampered_trace_flagged_on_replay(self):
        cfg = small_config(
            protocol="snowman", mode="indexed", max_timeslots=40,
            adversary={"name": "equivocator"},
            block_gen={"policy": "single-chain", "period": 5, "start_round": 1,
                       "max_blocks": 2},
            label_bits=4)
        trace, _ = run(cfg)
        lines = trace.to_jsonl().splitlines()
        tampered = parse_jsonl("\n".join(lines))
        genesis = make_genesis(4).label
        bad = "1" * 5 if genesis[0] == "0" else "0" * 5
        tampered.append(999, "final", proc=0, round=99, value=bad)
        assert any(v["monitor"].startswith("consistency")
                   for v in check_all(tampered))
