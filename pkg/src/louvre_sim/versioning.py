"""Version tagging for fence-ordered memory accesses.

Each core carries two small counters.  ``current`` is the tag handed to
ordinary loads and stores at issue.  ``last_fence`` counts issued fences of
any flavor and only ever grows within an epoch.  A store-release is tagged
one above ``current`` (it alone must order after everything earlier), a
load-acquire keeps the current tag (retirement and squashing order it), and
a full fence republishes ``last_fence`` as ``current`` so everything issued
afterwards compares strictly greater than everything issued before.

Counters are bounded by the configured bit width.  There is no wraparound:
comparisons between tags must stay meaningful, so on imminent overflow the
caller drains the whole pipeline and calls :meth:`VersionState.reset`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .program import MemOpKind


class VersionOverflowError(RuntimeError):
    """A fence would push the version counters past their bit width."""


@dataclass
class VersionState:
    current: int = 0
    last_fence: int = 0
    max_version: int = 1023
    checkpoints: list[tuple[object, int, int]] = field(default_factory=list)

    @classmethod
    def with_bits(cls, bits: int) -> "VersionState":
        return cls(max_version=(1 << bits) - 1)

    def would_overflow(self, fences_ahead: int = 1) -> bool:
        """True if issuing ``fences_ahead`` more fences would exceed the width."""
        return self.last_fence + fences_ahead > self.max_version

    def assign(self, kind: MemOpKind) -> int | None:
        """Tag an instruction at issue and update the counters.

        Returns the assigned version, or None for a full fence (it carries no
        memory access of its own).  Raises :class:`VersionOverflowError` if a
        fence would overflow; the caller must drain and :meth:`reset` first.
        """
        if kind.is_fence and self.would_overflow(1):
            raise VersionOverflowError(
                f"fence would push last_fence past {self.max_version}; drain and reset first"
            )
        if kind is MemOpKind.LOAD or kind is MemOpKind.STORE:
            return self.current
        if kind is MemOpKind.LOAD_ACQUIRE:
            self.last_fence += 1
            return self.current
        if kind is MemOpKind.STORE_RELEASE:
            self.last_fence += 1
            return self.current + 1
        # Full fence: bump the fence counter first, then republish it, so the
        # post-fence tag clears every tag handed out earlier (including any
        # store-release at current + 1).
        self.last_fence += 1
        self.current = self.last_fence
        return None

    def reset(self) -> None:
        """Restart the epoch.  Caller guarantees the pipeline is fully drained."""
        self.current = 0
        self.last_fence = 0
        self.checkpoints.clear()

    def snapshot(self) -> tuple[int, int]:
        return (self.current, self.last_fence)

    def install(self, snap: tuple[int, int]) -> None:
        self.current, self.last_fence = snap

    def checkpoint(self, tag: object) -> None:
        """Save the counters at a speculation point."""
        self.checkpoints.append((tag, self.current, self.last_fence))

    def restore(self, tag: object) -> None:
        """Roll back to the checkpoint taken for ``tag``, discarding younger ones.

        An unknown tag is a simulator bug, not a recoverable condition.
        """
        while self.checkpoints:
            t, cur, lf = self.checkpoints.pop()
            if t == tag:
                self.current, self.last_fence = cur, lf
                return
        raise KeyError(f"no version checkpoint for {tag!r}")
