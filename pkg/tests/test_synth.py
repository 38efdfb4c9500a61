import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from reports import synth_spec

from svfair.ingest import Policy, assign_subgroups, parse_metadata, parse_scores, write_metadata, write_scores
from svfair.metrics import compute_error_curve, equal_error_rate, evaluate, min_detection_cost
from svfair.synth import (
    Normal,
    SubgroupScoreSpec,
    brute_force_eer,
    brute_force_min_cost,
    generate_trials,
    load_specs,
    specs_from_dict,
)


def _spec(key=("x",), n_t=10, n_n=10, **kw):
    return SubgroupScoreSpec(key, Normal(1.0, 1.0), Normal(-1.0, 1.0), n_t, n_n, **kw)


def test_counts():
    trials, meta = generate_trials([_spec()], seed=0)
    assert len(trials) == 20 and trials.n_target == 10
    assert len(meta) == 5


def test_same_seed_same_bytes():
    specs, attrs = specs_from_dict(synth_spec())
    a = generate_trials(specs, 11, attrs)
    b = generate_trials(specs, 11, attrs)
    assert write_scores(a[0]) == write_scores(b[0])
    assert write_metadata(a[1]) == write_metadata(b[1])
    c = generate_trials(specs, 12, attrs)
    assert write_scores(c[0]) != write_scores(a[0])


def test_output_satisfies_require_same():
    specs, attrs = specs_from_dict(synth_spec(n=50))
    trials, meta = generate_trials(specs, 3, attrs)
    trials = parse_scores(write_scores(trials))
    meta = parse_metadata(write_metadata(meta))
    grouped = assign_subgroups(trials, meta, list(attrs), Policy.REQUIRE_SAME)
    assert grouped.excluded_count == 0 and len(grouped.by_subgroup) == 4
    for t in grouped.by_subgroup.values():
        tar = [r for r in t if r.label == 1]
        non = [r for r in t if r.label == 0]
        assert all(r.enroll_id == r.test_id for r in tar)
        assert all(r.enroll_id != r.test_id for r in non)


def test_shifted_subgroup_fares_worse():
    specs, attrs = specs_from_dict(synth_spec(n=5000))
    trials, meta = generate_trials(specs, 1, attrs)
    rep = evaluate(assign_subgroups(trials, meta, list(attrs))).report
    assert rep.subgroup("usa_f").ratio_overall_min > 1
    assert rep.subgroup("usa_f").fpr_ratio > 1
    assert rep.subgroup("uk_f").ratio_overall_min < 1


@pytest.mark.parametrize(
    "kwargs, match",
    [
        ({"n_t": 0}, "trial counts"),
        ({"n_speakers": 1}, "2 speakers"),
    ],
)
def test_spec_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        _spec(**kwargs)
    with pytest.raises(ValueError, match="standard deviations"):
        SubgroupScoreSpec(("x",), Normal(0, 0.0), Normal(0, 1), 1, 1)


def test_spec_document_errors():
    doc = synth_spec()
    doc["subgroups"][1]["nontarget"]["sd"] = 0
    with pytest.raises(ValueError, match=r"subgroups\[1\]"):
        specs_from_dict(doc)
    with pytest.raises(ValueError, match="invalid JSON"):
        load_specs("{")
    with pytest.raises(ValueError, match="attributes"):
        specs_from_dict({"subgroups": []})
    with pytest.raises(ValueError, match="duplicate"):
        generate_trials([_spec(), _spec()], 0)


def test_oracles_on_hand_example():
    assert brute_force_min_cost([2, 1, -0.5], [-2, -1, 0.5])[1] == pytest.approx(0.05 / 3)
    assert brute_force_eer([2, 1, -0.5], [-2, -1, 0.5]) == 1 / 3
    assert brute_force_min_cost([3, 4], [1, 2])[1] == 0.0
    assert brute_force_eer([3, 4], [1, 2]) == 0.0


@given(st.integers(0, 2**32 - 1), st.integers(1, 200), st.integers(1, 200), st.booleans())
@settings(max_examples=100, deadline=None)
def test_oracle_equivalence_on_synthetic_draws(seed, n_t, n_n, tied):
    rng = np.random.default_rng(seed)
    tar = rng.normal(1.0, 1.0, n_t)
    non = rng.normal(-1.0, 1.0, n_n)
    if tied:
        tar, non = np.round(tar), np.round(non)
    curve = compute_error_curve(tar, non)
    assert min_detection_cost(curve)[1] == brute_force_min_cost(tar, non)[1]
    assert abs(equal_error_rate(curve)[0] - brute_force_eer(tar, non)) <= 1e-12
