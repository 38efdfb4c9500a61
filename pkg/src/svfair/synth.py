"""Seeded synthetic trial sets and brute-force reference computations.

The oracles here deliberately share no code with :mod:`svfair.metrics`: they
count errors by direct comparison at every candidate threshold.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .ingest import Metadata, SpeakerAttributes, SubgroupKey, TrialList, subgroup_name
from .metrics import DEFAULT_COSTS, CostParams

# numpy Generator(PCG64(seed)); normals via numpy's ziggurat sampler
RNG_ALGORITHM = "numpy.random.PCG64"


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float


@dataclass(frozen=True)
class SubgroupScoreSpec:
    subgroup: SubgroupKey
    target: Normal
    nontarget: Normal
    n_target: int
    n_nontarget: int
    n_speakers: int = 5

    def __post_init__(self):
        if not (self.target.sd > 0 and self.nontarget.sd > 0):
            raise ValueError(f"{subgroup_name(self.subgroup)}: standard deviations must be > 0")
        if self.n_target < 1 or self.n_nontarget < 1:
            raise ValueError(f"{subgroup_name(self.subgroup)}: trial counts must be >= 1")
        if self.n_speakers < 2:
            raise ValueError(f"{subgroup_name(self.subgroup)}: nontarget trials need at least 2 speakers")


def generate_trials(
    specs: Sequence[SubgroupScoreSpec],
    seed: int,
    attribute_names: Sequence[str] | None = None,
) -> tuple[TrialList, Metadata]:
    """Draw scores for every subgroup spec, in spec order.

    Each subgroup gets speakers ``<name>_spkNNNN``. Target trials pair a
    speaker with itself; nontarget trials pair two different speakers of the
    same subgroup, so the output always satisfies the ``require_same`` policy.
    Per spec, target scores are drawn before nontarget scores.
    """
    if not specs:
        raise ValueError("at least one subgroup spec is required")
    arity = len(specs[0].subgroup)
    if any(len(s.subgroup) != arity for s in specs):
        raise ValueError("all subgroup keys must have the same number of values")
    names = tuple(attribute_names) if attribute_names else tuple(f"attr{i + 1}" for i in range(arity))
    if len(names) != arity:
        raise ValueError("attribute_names must match the subgroup key length")
    if len({tuple(s.subgroup) for s in specs}) != len(specs):
        raise ValueError("duplicate subgroup in specs")

    rng = np.random.Generator(np.random.PCG64(seed))
    enroll: list[str] = []
    test: list[str] = []
    labels: list[np.ndarray] = []
    scores: list[np.ndarray] = []
    meta = Metadata(names)
    for spec in specs:
        base = subgroup_name(spec.subgroup)
        speakers = [f"{base}_spk{j:04d}" for j in range(spec.n_speakers)]
        for sid in speakers:
            meta[sid] = SpeakerAttributes(sid, dict(zip(names, spec.subgroup)))
        n = spec.n_speakers
        k = np.arange(spec.n_target)
        enroll += [speakers[i] for i in (k % n).tolist()]
        test += [speakers[i] for i in (k % n).tolist()]
        k = np.arange(spec.n_nontarget)
        a = k % n
        b = (a + 1 + (k // n) % (n - 1)) % n
        enroll += [speakers[i] for i in a.tolist()]
        test += [speakers[i] for i in b.tolist()]
        labels += [np.ones(spec.n_target, np.int8), np.zeros(spec.n_nontarget, np.int8)]
        scores.append(rng.normal(spec.target.mean, spec.target.sd, spec.n_target))
        scores.append(rng.normal(spec.nontarget.mean, spec.nontarget.sd, spec.n_nontarget))
    return TrialList(enroll, test, np.concatenate(labels), np.concatenate(scores)), meta


def specs_from_dict(doc: dict) -> tuple[list[SubgroupScoreSpec], tuple[str, ...]]:
    """Read a synth spec document.

    Layout: ``{"attributes": [...], "subgroups": [{"values": [...],
    "target": {"mean", "sd"}, "nontarget": {"mean", "sd"}, "n_target",
    "n_nontarget", "n_speakers"?}]}``.
    """
    if not isinstance(doc, dict):
        raise ValueError("synth spec must be a JSON object")
    attrs = doc.get("attributes")
    groups = doc.get("subgroups")
    if not isinstance(attrs, list) or not attrs or not all(isinstance(a, str) for a in attrs):
        raise ValueError("'attributes' must be a nonempty list of names")
    if not isinstance(groups, list) or not groups:
        raise ValueError("'subgroups' must be a nonempty list")
    specs = []
    for i, g in enumerate(groups):
        try:
            values = tuple(str(v).lower() for v in g["values"])
            specs.append(
                SubgroupScoreSpec(
                    values,
                    Normal(float(g["target"]["mean"]), float(g["target"]["sd"])),
                    Normal(float(g["nontarget"]["mean"]), float(g["nontarget"]["sd"])),
                    int(g["n_target"]),
                    int(g["n_nontarget"]),
                    int(g.get("n_speakers", 5)),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"subgroups[{i}]: missing or malformed field {exc}") from None
        except ValueError as exc:
            raise ValueError(f"subgroups[{i}]: {exc}") from None
        if len(values) != len(attrs):
            raise ValueError(f"subgroups[{i}]: expected {len(attrs)} values")
    return specs, tuple(attrs)


def load_specs(text: str | bytes):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return specs_from_dict(doc)


def _candidate_points(target: np.ndarray, nontarget: np.ndarray) -> np.ndarray:
    pooled = np.unique(np.concatenate((target, nontarget)))
    mids = (pooled[1:] + pooled[:-1]) / 2.0
    return np.concatenate(([-np.inf], pooled, mids, [np.inf]))


def _count_rates(target: np.ndarray, nontarget: np.ndarray, thetas: np.ndarray):
    misses = (target[None, :] < thetas[:, None]).sum(axis=1)
    false_alarms = (nontarget[None, :] >= thetas[:, None]).sum(axis=1)
    return misses / target.size, false_alarms / nontarget.size


def brute_force_min_cost(target_scores, nontarget_scores, params: CostParams = DEFAULT_COSTS) -> tuple[float, float]:
    """Minimum cost over every score, every midpoint and both sentinels, by direct counting."""
    tar = np.asarray(target_scores, dtype=np.float64)
    non = np.asarray(nontarget_scores, dtype=np.float64)
    if tar.size == 0 or non.size == 0:
        raise ValueError("both score lists must be nonempty")
    thetas = np.sort(_candidate_points(tar, non))
    fnr, fpr = _count_rates(tar, non, thetas)
    costs = params.c_fn * params.p_target * fnr + params.c_fp * (1.0 - params.p_target) * fpr
    i = int(np.argmin(costs))
    return float(thetas[i]), float(costs[i])


def brute_force_eer(target_scores, nontarget_scores) -> float:
    """EER by the first-crossing linear interpolation rule, with rates counted directly."""
    tar = np.asarray(target_scores, dtype=np.float64)
    non = np.asarray(nontarget_scores, dtype=np.float64)
    if tar.size == 0 or non.size == 0:
        raise ValueError("both score lists must be nonempty")
    thetas = np.concatenate(([-np.inf], np.unique(np.concatenate((tar, non))), [np.inf]))
    fnr, fpr = _count_rates(tar, non, thetas)
    prev = None
    for a, b in zip(fnr.tolist(), fpr.tolist()):
        if a == b:
            return a
        if a > b:
            pa, pb = prev
            d0, d1 = pa - pb, a - b
            t = -d0 / (d1 - d0)
            return pb + t * (b - pb)
        prev = (a, b)
    raise AssertionError("FNR never reached FPR")
