"""Counter-based random streams keyed by (seed, replicate, role).

Every source of randomness in an experiment draws from its own Philox
stream, so replicates can run in any order (or in parallel) and still
produce byte-identical results.
"""

from dataclasses import dataclass

import numpy as np

ROLES = ("actions", "process", "reward", "rounding", "system")


def stream(seed, replicate=0, role="actions", child=0):
    """Return a fresh generator for one (seed, replicate, role) cell.

    ``child`` subdivides a role when several independent consumers share
    it (e.g. the rounding streams of distinct solver calls in one run).
    """
    role_id = ROLES.index(role)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replicate), role_id, int(child)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class StreamSet:
    """All streams owned by one run. Methods return fresh generators, so a
    StreamSet can be reused to replay a run exactly."""

    seed: int
    replicate: int = 0

    def actions(self):
        return stream(self.seed, self.replicate, "actions")

    def process(self):
        return stream(self.seed, self.replicate, "process")

    def reward(self):
        return stream(self.seed, self.replicate, "reward")

    def rounding(self, child=0):
        return stream(self.seed, self.replicate, "rounding", child)

    def system(self):
        return stream(self.seed, self.replicate, "system")

    @property
    def key(self):
        return (self.seed, self.replicate)
