from __future__ import annotations

from typing import Sequence

import numpy as np

from ..datakit import Dataset
from ..learners import LearnerSpec, Model, fit
from ..learners.base import vote_distribution


class VotingEnsemble(Model):
    """Plurality vote over independently fitted members, one vote each.

    The class distribution is the vote share; ties go to the lowest class index.
    """

    learner_id = "voting"

    def __init__(self, members: Sequence[Model], train: Dataset):
        super().__init__(train.attributes, train.n_classes, {}, 0)
        self.members = tuple(members)

    def _proba(self, X):
        votes = np.stack([m.predict(X) for m in self.members], axis=1)
        return vote_distribution(votes, self.n_classes)


def voting_fit(specs: Sequence[LearnerSpec], train: Dataset) -> VotingEnsemble:
    if not specs:
        raise ValueError("a voting ensemble needs at least one member")
    model = VotingEnsemble([fit(s, train) for s in specs], train)
    model.train_origin = train.origin
    return model
