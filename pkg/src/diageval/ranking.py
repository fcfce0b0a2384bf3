"""Pairwise ranking data, the reward-model pair loss, and reward reranking."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .feedback import fraction_str
from .report import DiagnosticReport


class MissingFeedback(ValueError):
    pass


class NonFinite(ValueError):
    pass


class NoRewardedSamples(ValueError):
    pass


@dataclass(frozen=True)
class SampledOutput:
    instance_id: str
    sample_index: int
    report: DiagnosticReport | None = None
    raw: str = ""
    feedback: Fraction | None = None
    reward: float | None = None


@dataclass(frozen=True)
class RankingPair:
    instance_id: str
    winner: int
    loser: int
    margin: Fraction

    def to_dict(self) -> dict:
        return {"instance_id": self.instance_id, "winner": self.winner,
                "loser": self.loser, "margin": fraction_str(self.margin)}


@dataclass(frozen=True)
class PairDatasetStats:
    instances: int
    comparisons_possible: int
    ties_removed: int
    pairs_emitted: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def build_pairs(samples: Mapping[str, Sequence[SampledOutput]] | Iterable[SampledOutput]
                ) -> tuple[list[RankingPair], PairDatasetStats]:
    """Every unordered sample pair of an instance becomes one comparison.

    Strictly better feedback wins; equal feedback is a tie and is dropped.
    Output is ordered by instance_id, then by (i, j) sample index pair.
    """
    if not isinstance(samples, Mapping):
        grouped: dict[str, list[SampledOutput]] = {}
        for s in samples:
            grouped.setdefault(s.instance_id, []).append(s)
        samples = grouped

    pairs: list[RankingPair] = []
    possible = ties = 0
    for iid in sorted(samples):
        group = sorted(samples[iid], key=lambda s: s.sample_index)
        if len({s.sample_index for s in group}) != len(group):
            raise ValueError(f"{iid}: duplicate sample_index")
        for s in group:
            if s.feedback is None:
                raise MissingFeedback(f"{iid} sample {s.sample_index} has no feedback")
            if not 0 <= s.feedback <= 1:
                raise ValueError(f"{iid} sample {s.sample_index}: feedback {s.feedback} "
                                 f"outside [0, 1]")
        for a, b in itertools.combinations(group, 2):
            possible += 1
            if a.feedback == b.feedback:
                ties += 1
                continue
            win, lose = (a, b) if a.feedback > b.feedback else (b, a)
            pairs.append(RankingPair(iid, win.sample_index, lose.sample_index,
                                     win.feedback - lose.feedback))
    stats = PairDatasetStats(len(samples), possible, ties, len(pairs))
    return pairs, stats


def pair_loss(reward_winner: float, reward_loser: float) -> float:
    """-log(sigmoid(r_w - r_l)), evaluated without overflow."""
    if not (math.isfinite(reward_winner) and math.isfinite(reward_loser)):
        raise NonFinite("rewards must be finite")
    m = reward_winner - reward_loser
    if m >= 0:
        return math.log1p(math.exp(-m))
    return -m + math.log1p(math.exp(m))


def rerank(samples: Sequence[SampledOutput]) -> SampledOutput:
    """Highest-reward sample; ties go to the lowest sample_index."""
    rewarded = [s for s in samples if s.reward is not None]
    if not rewarded:
        raise NoRewardedSamples("no sample carries a reward")
    return min(rewarded, key=lambda s: (-s.reward, s.sample_index))
