"""Counters used to check the complexity and memory claims of cat.

Instrumentation is off unless a :class:`Probe` is activated with
:func:`probing`.  Hot paths test a module global, so the disabled cost is
one attribute lookup.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field


@dataclass
class MergeCounts:
    n_a: int = 0
    n_b: int = 0
    n_common: int = 0
    n_out: int = 0
    comparisons: int = 0

    @property
    def within_bound(self) -> bool:
        return self.comparisons <= self.n_a + self.n_b


@dataclass
class Probe:
    resident: int = 0
    peak_resident: int = 0
    peak_sublist: int = 0
    merges: list[MergeCounts] = field(default_factory=list)
    # (resident, sublist) at the moment the peak was observed
    peak_breakdown: tuple[int, int] = (0, 0)
    # largest number of decoded dictionary entries held at once
    peak_dictionary: int = 0
    _sublist: int = 0

    def hold(self, n: int = 1) -> None:
        self.resident += n
        if self.resident - self._sublist > self.peak_dictionary:
            self.peak_dictionary = self.resident - self._sublist
        if self.resident > self.peak_resident:
            self.peak_resident = self.resident
            self.peak_breakdown = (self.resident - self._sublist, self._sublist)

    def release(self, n: int = 1) -> None:
        self.resident -= n

    def hold_sublist(self, n: int) -> None:
        self._sublist = n
        if n > self.peak_sublist:
            self.peak_sublist = n
        self.hold(n)

    def release_sublist(self) -> None:
        self.release(self._sublist)
        self._sublist = 0

    @property
    def max_comparison_excess(self) -> int:
        """Largest ``comparisons - (n_a + n_b)`` over all recorded merges."""
        return max((m.comparisons - m.n_a - m.n_b for m in self.merges), default=0)


_active: Probe | None = None


def active() -> Probe | None:
    return _active


@contextlib.contextmanager
def probing(probe: Probe | None = None):
    global _active
    previous = _active
    _active = probe if probe is not None else Probe()
    try:
        yield _active
    finally:
        _active = previous
