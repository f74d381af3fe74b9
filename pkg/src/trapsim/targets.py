"""Write-once coding maps, the freeze registry, and virtual targets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional


class ConstructionError(RuntimeError):
    """A safety property of the construction was violated; the run aborts."""


class WriteOnceViolation(ConstructionError):
    pass


class FreezeViolation(ConstructionError):
    pass


@dataclass
class WriteOnceMap:
    name: str = "map"
    assignments: dict[int, int] = field(default_factory=dict)
    birth: dict[int, tuple[int, str]] = field(default_factory=dict)

    def define(self, key: int, val: int, stage: int, author: str) -> None:
        if key in self.assignments:
            born, who = self.birth[key]
            raise WriteOnceViolation(
                f"{self.name}({key}) already {self.assignments[key]} (stage {born}, {who}); "
                f"{author} tried {val} at stage {stage}"
            )
        self.assignments[key] = val
        self.birth[key] = (stage, author)

    def get(self, key: int) -> Optional[int]:
        return self.assignments.get(key)

    def __contains__(self, key: int) -> bool:
        return key in self.assignments

    def __len__(self) -> int:
        return len(self.assignments)

    def preimage(self, val: int) -> list[int]:
        return sorted(k for k, v in self.assignments.items() if v == val)


@dataclass
class FreezeRegistry:
    frozen: dict[tuple[int, int], int] = field(default_factory=dict)

    def freeze(self, m: int, z: int, owner: int) -> None:
        holder = self.frozen.get((m, z))
        if holder is not None:
            raise FreezeViolation(f"{z} already frozen for m={m} by priority {holder}")
        self.frozen[(m, z)] = owner

    def unfreeze(self, m: int, z: int, owner: int) -> None:
        holder = self.frozen.get((m, z))
        if holder != owner:
            raise FreezeViolation(f"priority {owner} cannot unfreeze {z} for m={m} (holder {holder})")
        del self.frozen[(m, z)]

    def is_frozen(self, m: int, z: int) -> bool:
        return (m, z) in self.frozen

    def owner(self, m: int, z: int) -> Optional[int]:
        return self.frozen.get((m, z))

    def held_by(self, owner: int) -> list[tuple[int, int]]:
        return sorted(mz for mz, o in self.frozen.items() if o == owner)


@dataclass
class TargetSpace:
    """Theta_m and Lambda_m for one parameter ``m``; ``B_m`` is ``Lambda_m^-1(A)``."""

    m: int
    theta: WriteOnceMap = None
    lam: WriteOnceMap = None

    def __post_init__(self):
        if self.theta is None:
            self.theta = WriteOnceMap(f"Theta_{self.m}")
        if self.lam is None:
            self.lam = WriteOnceMap(f"Lambda_{self.m}")

    def sigma(self, x: int) -> Optional[int]:
        y = self.theta.get(x)
        if y is None:
            return None
        return self.lam.get(y)

    def b_member(self, y: int, a: Iterable[int]) -> Optional[bool]:
        """Stage approximation of ``y in B_m``; ``None`` while ``Lambda_m(y)`` is undefined."""
        c = self.lam.get(y)
        if c is None:
            return None
        return c in a


def sigma(space: TargetSpace, x: int) -> Optional[int]:
    return space.sigma(x)


def b_member(space: TargetSpace, y: int, a) -> Optional[bool]:
    return space.b_member(y, a)
