"""Node-count accounting: allocations, on-demand reservations, backfill links.

Node identity is not modeled; the ledger tracks counts only.  Every mutator
re-checks the conservation invariant:

    free + sum(allocations) + sum(held - occupied) + sum(pending) == capacity
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple


class LedgerError(RuntimeError):
    """Conservation breach or illegal ledger operation (simulator bug)."""


@dataclass
class ReservationState:
    owner: int
    target: int
    held: int
    notice_time: int
    expiry: Optional[int] = None


class ClusterLedger:
    def __init__(self, capacity: int, audit: Optional[Callable[[int, str, dict], None]] = None):
        if capacity < 1:
            raise LedgerError("capacity must be positive")
        self.capacity = capacity
        self.free = capacity
        self.allocations: Dict[int, int] = {}
        self.reservations: Dict[int, ReservationState] = {}
        # backfilled job -> {reservation owner -> nodes occupied}
        self.backfill_links: Dict[int, Dict[int, int]] = {}
        # on-demand job -> nodes collected for an imminent start
        self.pending: Dict[int, int] = {}
        self._audit = audit
        self._now = 0

    # -- bookkeeping helpers ------------------------------------------------

    def set_time(self, now: int) -> None:
        self._now = now

    def _log(self, op: str, **kw) -> None:
        if self._audit is not None:
            self._audit(self._now, op, kw)

    def occupied(self, owner: int) -> int:
        return sum(links.get(owner, 0) for links in self.backfill_links.values())

    def idle_reserved(self, owner: int) -> int:
        res = self.reservations[owner]
        return res.held - self.occupied(owner)

    def idle_reserved_total(self) -> int:
        return sum(self.idle_reserved(owner) for owner in self.reservations)

    def check(self) -> None:
        total = self.free + sum(self.allocations.values()) + sum(self.pending.values())
        for owner in self.reservations:
            idle = self.idle_reserved(owner)
            if idle < 0:
                raise LedgerError(f"reservation {owner} over-occupied")
            total += idle
        if total != self.capacity or self.free < 0:
            raise LedgerError(
                f"conservation breach: accounted {total} of {self.capacity} nodes (free={self.free})"
            )
        for job, n in self.allocations.items():
            if n < 0:
                raise LedgerError(f"negative allocation for job {job}")

    # -- allocations --------------------------------------------------------

    def allocate(self, job_id: int, n: int) -> bool:
        """Allocate n nodes from free; returns False if they are not there."""
        if n < 0:
            raise LedgerError("negative allocation request")
        if n > self.free:
            return False
        if job_id in self.allocations:
            raise LedgerError(f"job {job_id} already allocated")
        self.free -= n
        self.allocations[job_id] = n
        self._log("allocate", job=job_id, n=n)
        self.check()
        return True

    def allocate_split(self, job_id: int, n_free: int, reserved_parts: List[Tuple[int, int]]) -> None:
        """Allocate n_free from free plus reserved idle nodes per (owner, k)."""
        if job_id in self.allocations:
            raise LedgerError(f"job {job_id} already allocated")
        if n_free > self.free:
            raise LedgerError("allocate_split exceeds free nodes")
        links: Dict[int, int] = {}
        for owner, k in reserved_parts:
            if k <= 0:
                continue
            if k > self.idle_reserved(owner):
                raise LedgerError(f"backfill exceeds idle reserved nodes of {owner}")
            links[owner] = links.get(owner, 0) + k
        self.free -= n_free
        self.allocations[job_id] = n_free + sum(links.values())
        if links:
            self.backfill_links[job_id] = links
        self._log("allocate_split", job=job_id, n_free=n_free, links=dict(links))
        self.check()

    def release(self, job_id: int) -> int:
        """Remove an allocation.  Linked nodes fall back to their reservations
        (idle again); the unlinked remainder is returned to the caller, which
        decides routing (free, reservations, or an arriving on-demand job)."""
        if job_id not in self.allocations:
            raise LedgerError(f"job {job_id} not allocated")
        n = self.allocations.pop(job_id)
        linked = self.backfill_links.pop(job_id, {})
        linked_total = sum(linked.values())
        if linked_total > n:
            raise LedgerError(f"job {job_id} links exceed allocation")
        self._log("release", job=job_id, n=n, linked=linked_total)
        # no check here: the loose nodes are in flight to the caller, which
        # must route them (route_released and friends re-check)
        return n - linked_total

    def resize(self, job_id: int, new_n: int) -> int:
        """Shrink or expand an allocation; returns freed nodes (shrink > 0).

        Shrinking a linked job releases the linked portion first (back to its
        reservations); expansion is always drawn from free by the caller."""
        cur = self.allocations.get(job_id)
        if cur is None:
            raise LedgerError(f"job {job_id} not allocated")
        delta = cur - new_n
        if delta == 0:
            return 0
        if delta > 0:
            freed = delta
            links = self.backfill_links.get(job_id)
            if links:
                for owner in sorted(links):
                    take = min(links[owner], freed)
                    links[owner] -= take
                    freed -= take
                    if links[owner] == 0:
                        del links[owner]
                    if freed == 0:
                        break
                if not links:
                    del self.backfill_links[job_id]
            self.allocations[job_id] = new_n
            self._log("shrink", job=job_id, new=new_n, freed=delta - freed)
            # freed unlinked nodes are in flight to the caller, no check yet
            return freed
        # expansion
        grow = -delta
        if grow > self.free:
            raise LedgerError("expand exceeds free nodes")
        self.free -= grow
        self.allocations[job_id] = new_n
        self._log("expand", job=job_id, new=new_n)
        self.check()
        return 0

    def add_free(self, n: int) -> None:
        if n < 0:
            raise LedgerError("negative free addition")
        self.free += n
        self.check()

    def take_free(self, n: int) -> None:
        if n > self.free:
            raise LedgerError("taking more than free")
        self.free -= n
        # caller must immediately account these nodes (pending/allocation)

    # -- reservations -------------------------------------------------------

    def reserve_create(self, owner: int, target: int, notice_time: int, expiry: Optional[int]) -> None:
        if owner in self.reservations:
            raise LedgerError(f"reservation for {owner} already exists")
        self.reservations[owner] = ReservationState(owner, target, 0, notice_time, expiry)
        self._log("reserve_create", owner=owner, target=target)
        self.check()

    def reserve_available(self, owner: int, want: int) -> int:
        """Bank min(free, want) nodes from free into the reservation."""
        res = self.reservations[owner]
        take = min(self.free, want, res.target - res.held)
        if take > 0:
            self.free -= take
            res.held += take
        self._log("reserve_available", owner=owner, banked=take)
        self.check()
        return take

    def bank_into(self, owner: int, n: int) -> int:
        """Bank up to n loose nodes into the reservation; returns the accepted
        count.  The caller holds the nodes (they are not in free)."""
        res = self.reservations[owner]
        take = min(n, res.target - res.held)
        res.held += take
        self._log("bank", owner=owner, banked=take)
        return take

    def unfilled_reservations(self) -> List[ReservationState]:
        """Reservations still short of target, earliest advance notice first."""
        res = [r for r in self.reservations.values() if r.held < r.target]
        res.sort(key=lambda r: (r.notice_time, r.owner))
        return res

    def route_released(self, n: int) -> None:
        """Route n loose nodes: fill unfilled reservations first, rest to free."""
        for res in self.unfilled_reservations():
            if n == 0:
                break
            take = min(n, res.target - res.held)
            res.held += take
            n -= take
            self._log("bank", owner=res.owner, banked=take)
        self.free += n
        # conservation is asserted at timestamp boundaries by the engine;
        # mid-event, other loose nodes may still be in flight

    def backfilled_on(self, owner: int) -> List[int]:
        """Job ids backfilled on this reservation, ascending."""
        return sorted(j for j, links in self.backfill_links.items() if owner in links)

    def remove_reservation(self, owner: int) -> int:
        """Delete the reservation and return its held count as loose nodes.
        Links of surviving backfilled jobs are converted to plain allocations
        (their occupied nodes leave the reservation with them)."""
        res = self.reservations.pop(owner)
        held = res.held
        for job in self.backfilled_on(owner):
            links = self.backfill_links[job]
            held -= links.pop(owner)
            if not links:
                del self.backfill_links[job]
        if held < 0:
            raise LedgerError(f"reservation {owner} occupied beyond held")
        self._log("reserve_remove", owner=owner, loose=held)
        return held

    # -- pending on-demand starts -------------------------------------------

    def pending_add(self, od_id: int, n: int) -> None:
        if n < 0:
            raise LedgerError("negative pending addition")
        self.pending[od_id] = self.pending.get(od_id, 0) + n
        # caller may still hold loose nodes in flight, no check yet

    def pending_take(self, od_id: int) -> int:
        n = self.pending.pop(od_id, 0)
        return n
