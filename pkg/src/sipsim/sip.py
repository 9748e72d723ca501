"""SIP signaling surface: message kinds, transactions, retransmit timing.

Only INVITE and BYE carry retransmission state machines; ACK and all
responses are one-shot hop-by-hop sends.  The retransmit ladder starts at
T1 and doubles (non-INVITE capped at 4 s) within an overall 64*T1 budget.
"""

from __future__ import annotations

from enum import IntEnum

from sipsim.kernel import impl as _impl

SipMessage = _impl.SipMessage
ClientTransaction = _impl.ClientTxn
ServerTransaction = _impl.ServerTxn
build_retx_schedule = _impl.build_retx_schedule

MESSAGES_PER_CALL = _impl.MESSAGES_PER_CALL


class MsgKind(IntEnum):
    INVITE = _impl.K_INVITE
    ACK = _impl.K_ACK
    BYE = _impl.K_BYE
    TRYING_100 = _impl.K_TRYING_100
    RINGING_180 = _impl.K_RINGING_180
    OK_200_INVITE = _impl.K_OK_200_INVITE
    OK_200_BYE = _impl.K_OK_200_BYE
    SERVICE_UNAVAILABLE_503 = _impl.K_503


class TxnState(IntEnum):
    CALLING = _impl.CALLING
    PROCEEDING = _impl.PROCEEDING
    COMPLETED = _impl.COMPLETED
    TERMINATED = _impl.TERMINATED


#: Returned by :func:`next_retransmit_interval` when the budget is exhausted.
EXPIRED = None


def next_retransmit_interval(is_invite: bool, attempt: int, t1_ms: float):
    """Wait in ms after transmission number ``attempt`` (0 = initial send).

    Returns :data:`EXPIRED` once the cumulative wait through this interval
    would exceed the 64*T1 transaction budget.
    """
    if attempt < 0:
        raise ValueError("attempt must be >= 0")
    sched = build_retx_schedule(is_invite, round(t1_ms * 1000))
    if attempt >= len(sched):
        return EXPIRED
    return sched[attempt] / 1000.0


def call_message_sequence() -> list[tuple[str, MsgKind]]:
    """Canonical successful-call flow across UAC - P1 - P2 - UAS.

    Logical order: INVITE forwarded hop by hop with a 100 generated toward
    the caller at each proxy, then 180, 200, ACK, BYE and the BYE's 200
    relayed end to end.  With zero link delays the relays of consecutive
    responses interleave in simulated time; this list gives the per-message
    hop order, not a global timestamp order.
    """
    k = MsgKind
    return [
        ("uac->p1", k.INVITE),
        ("p1->uac", k.TRYING_100),
        ("p1->p2", k.INVITE),
        ("p2->p1", k.TRYING_100),
        ("p2->uas", k.INVITE),
        ("uas->p2", k.RINGING_180),
        ("p2->p1", k.RINGING_180),
        ("p1->uac", k.RINGING_180),
        ("uas->p2", k.OK_200_INVITE),
        ("p2->p1", k.OK_200_INVITE),
        ("p1->uac", k.OK_200_INVITE),
        ("uac->p1", k.ACK),
        ("p1->p2", k.ACK),
        ("p2->uas", k.ACK),
        ("uac->p1", k.BYE),
        ("p1->p2", k.BYE),
        ("p2->uas", k.BYE),
        ("uas->p2", k.OK_200_BYE),
        ("p2->p1", k.OK_200_BYE),
        ("p1->uac", k.OK_200_BYE),
    ]


__all__ = [
    "SipMessage",
    "ClientTransaction",
    "ServerTransaction",
    "MsgKind",
    "TxnState",
    "EXPIRED",
    "MESSAGES_PER_CALL",
    "build_retx_schedule",
    "next_retransmit_interval",
    "call_message_sequence",
]
