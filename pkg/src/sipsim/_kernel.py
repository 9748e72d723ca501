"""Hot simulation runtime: event loop, links, transactions, proxies, endpoints.

Everything here runs inside the per-event dispatch path, so the module is
written in a deliberately plain style (``__slots__`` classes, int arithmetic,
no logging) that is also compilable with Cython in pure-Python mode.  The
public package modules (:mod:`sipsim.engine`, :mod:`sipsim.sip`,
:mod:`sipsim.proxy`, :mod:`sipsim.control`) re-export the classes defined
here together with their documentation-level wrappers.

Model summary
-------------
Virtual time is integer microseconds.  The topology is a fixed trapezoid:
one caller pool (UAC), an upstream proxy P1, a downstream proxy P2 and one
callee pool (UAS), connected by four unidirectional link pairs with
configurable delay and loss.  Proxies are single-server FIFO queues with a
fixed per-message service time; user agents are free.  Each proxy spends
one service slot per message it originates, so a clean call costs seven
slots per proxy (INVITE forward plus the generated 100, then 180, 200,
ACK, BYE and 200-for-BYE forwards).  An inbound 100 only updates local
transaction state and is absorbed without queueing, which keeps the
seven-slot accounting exact on both proxies.

Admission control points:

* P2 carries a CPU sensor: new INVITEs arriving while the sliding-window
  utilization exceeds the threshold are answered 503 at the cost of one
  service slot.
* P1 optionally carries the transaction-window controller: new calls are
  admitted only while the number of open admitted INVITE transactions is
  below ``floor(window)``; everything else is answered 503 (one slot).
  The window grows by 1 per completion below its growth threshold, by
  1/window above it, and collapses to 1 (halving the threshold) when the
  recent-delay detector trips or an admitted transaction times out.
"""

from collections import deque
from heapq import heappush, heappop
from math import sqrt
from random import Random

from sipsim.metrics import EventLog


# Message kinds. Requests are <= 3 so direction checks stay cheap.
K_INVITE = 1
K_ACK = 2
K_BYE = 3
K_TRYING_100 = 4
K_RINGING_180 = 5
K_OK_200_INVITE = 6
K_OK_200_BYE = 7
K_503 = 8

_FINAL_MIN = K_OK_200_INVITE  # 200/200-BYE/503 are transaction-final

# Client transaction states.
CALLING = 0
PROCEEDING = 1
COMPLETED = 2  # reserved intermediate state; final responses skip to TERMINATED
TERMINATED = 3

# Call setup outcomes.
OUT_PENDING = 0
OUT_SUCCESS = 1
OUT_REJECTED = 2
OUT_TIMEOUT = 3

# Overload detector variants.
CMP_SIGMA_BAND = 0      # mean > z_th + alpha * stddev   (default)
CMP_MOMENTARY_BAND = 1  # mean > z_th + alpha * most-recent delay
CMP_LITERAL_LOW = 2     # mean < z_th + alpha * mean     (fires on low delay)

MESSAGES_PER_CALL = 7  # service slots one proxy spends on one clean call

NON_INVITE_CAP_US = 4_000_000  # retransmit interval ceiling for non-INVITE
BUDGET_T1_MULTIPLE = 64        # overall transaction budget, in units of T1


class SimulationError(Exception):
    """Programming fault inside a run (event in the past, counter underflow)."""


def build_retx_schedule(is_invite, t1_us):
    """List of retransmit wait intervals (us) fitting the 64*T1 budget.

    Entry ``i`` is the wait after transmission ``i`` (0 = the initial send).
    INVITE intervals double without bound; non-INVITE intervals double up
    to a 4 s ceiling.  The list stops before the wait whose cumulative sum
    would exceed 64*T1; asking for the next interval after the last entry
    means the transaction has timed out.
    """
    if t1_us <= 0:
        raise ValueError("t1_us must be positive")
    budget = BUDGET_T1_MULTIPLE * t1_us
    out = []
    cum = 0
    i = 0
    while True:
        iv = t1_us << i
        if not is_invite and iv > NON_INVITE_CAP_US:
            iv = NON_INVITE_CAP_US
        cum += iv
        if cum > budget:
            return out
        out.append(iv)
        i += 1


class EventQueue:
    """Virtual-time event queue: (fire_time, insertion seq) total order."""

    __slots__ = ("now", "_heap", "_seq", "trace")

    def __init__(self, trace=False):
        self.now = 0
        self._heap = []
        self._seq = 0
        self.trace = [] if trace else None

    def __len__(self):
        return len(self._heap)

    def schedule(self, t_us, fn, arg):
        if t_us < self.now:
            raise SimulationError(
                "event scheduled in the past: t=%d < now=%d" % (t_us, self.now)
            )
        self._seq += 1
        heappush(self._heap, (t_us, self._seq, fn, arg))

    def run_until(self, t_end_us):
        if t_end_us < self.now:
            raise SimulationError(
                "run_until target in the past: %d < %d" % (t_end_us, self.now)
            )
        heap = self._heap
        trace = self.trace
        while heap and heap[0][0] <= t_end_us:
            t, seq, fn, arg = heappop(heap)
            self.now = t
            if trace is not None:
                trace.append((t, seq, fn.__qualname__))
            fn(arg)
        self.now = t_end_us


class Link:
    """Unidirectional lossy delay line feeding one entity's deliver method."""

    __slots__ = ("eq", "delay_us", "loss_p", "rng", "sink", "sent", "lost")

    def __init__(self, eq, delay_us, loss_p, rng, sink):
        self.eq = eq
        self.delay_us = delay_us
        self.loss_p = loss_p
        self.rng = rng
        self.sink = sink
        self.sent = 0
        self.lost = 0

    def send(self, msg, extra_us=0):
        self.sent += 1
        if self.loss_p > 0.0 and self.rng.random() < self.loss_p:
            self.lost += 1
            return
        eq = self.eq
        eq.schedule(eq.now + self.delay_us + extra_us, self.sink, msg)


class SipMessage:
    """One signaling message; retransmissions share (call_id, branch, kind)."""

    __slots__ = ("kind", "call_id", "branch", "is_retransmission", "created_us")

    def __init__(self, kind, call_id, branch, is_retransmission, created_us):
        self.kind = kind
        self.call_id = call_id
        self.branch = branch
        self.is_retransmission = is_retransmission
        self.created_us = created_us

    def __repr__(self):
        return "SipMessage(kind=%d, call=%d, branch=%d, retx=%r, t=%d)" % (
            self.kind,
            self.call_id,
            self.branch,
            self.is_retransmission,
            self.created_us,
        )


class ClientTxn:
    """Client transaction: request retransmission plus final/timeout detection.

    ``admit_us >= 0`` marks transactions opened by the upstream admission
    window; those report their completion or timeout back to the controller.
    """

    __slots__ = (
        "branch",
        "call_id",
        "is_invite",
        "state",
        "attempt",
        "started_us",
        "admit_us",
        "parent_branch",
        "schedule",
        "b_armed",
    )

    def __init__(self, branch, call_id, is_invite, schedule, parent_branch):
        self.branch = branch
        self.call_id = call_id
        self.is_invite = is_invite
        self.state = CALLING
        self.attempt = 0
        self.started_us = 0
        self.admit_us = -1
        self.parent_branch = parent_branch
        self.schedule = schedule
        self.b_armed = False

    def on_response(self, kind):
        """Apply a response; returns True when it is the final one."""
        if kind >= _FINAL_MIN:
            self.state = TERMINATED
            return True
        if self.state == CALLING:
            self.state = PROCEEDING
        return False

    def on_timer(self):
        """Retransmit timer fired.

        Returns the next wait in us (retransmit now and rearm), 0 when the
        fire is stale (already answered, or INVITE past CALLING), or -1 when
        the retransmission budget is exhausted (transaction times out; state
        moves to TERMINATED here).
        """
        state = self.state
        if state == TERMINATED:
            return 0
        if self.is_invite:
            if state != CALLING:
                return 0
        elif state > PROCEEDING:
            return 0
        nxt = self.attempt + 1
        sched = self.schedule
        if nxt >= len(sched):
            self.state = TERMINATED
            return -1
        self.attempt = nxt
        return sched[nxt]


class ServerTxn:
    """Server transaction: absorbs retransmissions, replays the last response."""

    __slots__ = ("branch", "call_id", "is_invite", "last_resp_kind", "client_branch")

    def __init__(self, branch, call_id, is_invite):
        self.branch = branch
        self.call_id = call_id
        self.is_invite = is_invite
        self.last_resp_kind = 0
        self.client_branch = -1


class WindowController:
    """Feedback-free admission window driven by local completion delays.

    The only inputs are admission attempts, locally measured completion
    delays and timeouts; no field of any received message is inspected.
    """

    __slots__ = (
        "window",
        "win_th",
        "z_th_us",
        "alpha",
        "hist",
        "active",
        "comparator",
        "admitted",
        "shed",
        "resets",
    )

    def __init__(self, z_th_us, alpha, history_size, initial_window, initial_win_th,
                 comparator=CMP_SIGMA_BAND):
        if initial_window < 1.0 or initial_win_th < 1.0:
            raise ValueError("window and growth threshold start at >= 1")
        self.window = initial_window
        self.win_th = initial_win_th
        self.z_th_us = z_th_us
        self.alpha = alpha
        self.hist = deque(maxlen=history_size)
        self.active = 0
        self.comparator = comparator
        self.admitted = 0
        self.shed = 0
        self.resets = 0

    def try_admit(self):
        """Admit a new call iff the window has empty space."""
        active = self.active
        if active < int(self.window):
            self.active = active + 1
            self.admitted += 1
            return True
        self.shed += 1
        return False

    def detect_overload(self):
        h = self.hist
        n = len(h)
        if n == 0:
            return False
        m = 0.0
        for x in h:
            m += x
        m /= n
        c = self.comparator
        if c == CMP_SIGMA_BAND:
            v = 0.0
            for x in h:
                d = x - m
                v += d * d
            return m > self.z_th_us + self.alpha * sqrt(v / n)
        if c == CMP_MOMENTARY_BAND:
            return m > self.z_th_us + self.alpha * h[-1]
        return m < self.z_th_us + self.alpha * m

    def on_complete(self, delay_us):
        """An admitted transaction finished; apply exactly one window branch."""
        if self.active < 1:
            raise SimulationError("window completion with no active transaction")
        self.active -= 1
        self.hist.append(delay_us)
        if self.detect_overload():
            self._collapse()
        elif self.window < self.win_th:
            self.window += 1.0
        else:
            self.window += 1.0 / self.window

    def on_timeout(self):
        """An admitted transaction timed out: free its slot, treat as overload."""
        if self.active < 1:
            raise SimulationError("window timeout with no active transaction")
        self.active -= 1
        self._collapse()

    def _collapse(self):
        half = self.window / 2.0
        self.win_th = half if half > 1.0 else 1.0
        self.window = 1.0
        self.resets += 1


class CpuSensor:
    """Sliding-window busy-time gauge gating new calls at the downstream proxy."""

    __slots__ = ("window_us", "threshold", "segs", "busy_us")

    def __init__(self, window_us, threshold):
        self.window_us = window_us
        self.threshold = threshold
        self.segs = deque()
        self.busy_us = 0

    def add_busy(self, start_us, end_us):
        self.segs.append((start_us, end_us))
        self.busy_us += end_us - start_us

    def utilization(self, now_us):
        """Busy fraction of the trailing window ending at now."""
        w0 = now_us - self.window_us
        segs = self.segs
        busy = self.busy_us
        while segs and segs[0][1] <= w0:
            s, e = segs.popleft()
            busy -= e - s
        self.busy_us = busy
        if segs:
            s, _e = segs[0]
            if s < w0:
                busy -= w0 - s
        return busy / self.window_us


class CallRecord:
    """Per-call state at the caller pool."""

    __slots__ = ("call_id", "hold_us", "t_invite_us", "outcome", "branch_invite")

    def __init__(self, call_id, hold_us, t_invite_us):
        self.call_id = call_id
        self.hold_us = hold_us
        self.t_invite_us = t_invite_us
        self.outcome = OUT_PENDING
        self.branch_invite = -1


class Proxy:
    """Stateful proxy: bounded FIFO queue, fixed-rate server, transaction maps.

    Routing decisions (admission checks, transaction creation) happen when a
    message is dequeued; the resulting sends leave when its service slot
    ends.  A full queue drops arrivals silently, like a full datagram socket
    buffer.
    """

    __slots__ = (
        "sim",
        "eq",
        "log",
        "name",
        "svc_us",
        "q_max",
        "q",
        "busy",
        "svc_start",
        "up_link",
        "down_link",
        "sensor",
        "ctrl",
        "dns_us",
        "srv",
        "cli",
        "srv_expiry",
        "busy_total_us",
        "busy_window_us",
        "queue_hw",
        "queue_hw_window",
        "drops",
        "strays",
        "served",
    )

    def __init__(self, sim, name, svc_us, q_max, sensor, ctrl, dns_us=0):
        self.sim = sim
        self.eq = sim.eq
        self.log = sim.log
        self.name = name
        self.svc_us = svc_us
        self.q_max = q_max
        self.q = deque()
        self.busy = False
        self.svc_start = 0
        self.up_link = None
        self.down_link = None
        self.sensor = sensor
        self.ctrl = ctrl
        self.dns_us = dns_us
        self.srv = {}
        self.cli = {}
        self.srv_expiry = deque()
        self.busy_total_us = 0
        self.busy_window_us = 0
        self.queue_hw = 0
        self.queue_hw_window = 0
        self.drops = 0
        self.strays = 0
        self.served = 0

    # -- inbound -----------------------------------------------------------

    def deliver(self, msg):
        """Enqueue an arriving message; returns True when accepted."""
        if msg.kind == K_TRYING_100:
            # Hop-by-hop ack of an INVITE: updates the local client
            # transaction and is absorbed without a service slot, keeping
            # the seven-slots-per-call accounting exact.
            self._absorb_trying(msg)
            return True
        q = self.q
        if len(q) >= self.q_max:
            self.drops += 1
            self.log.drop(self.eq.now)
            return False
        q.append(msg)
        n = len(q)
        if n > self.queue_hw:
            self.queue_hw = n
        now = self.eq.now
        if self.log.wu_us <= now < self.log.wend_us and n > self.queue_hw_window:
            self.queue_hw_window = n
        if not self.busy:
            self._start_next()
        return True

    def _absorb_trying(self, msg):
        ct = self.cli.get(msg.branch)
        if ct is None or ct.state != CALLING:
            return
        ct.on_response(msg.kind)
        self._arm_timer_b(ct)

    def _arm_timer_b(self, ct):
        if ct.is_invite and not ct.b_armed:
            ct.b_armed = True
            self.eq.schedule(ct.started_us + self.sim.timer_b_us, self._timer_b, ct)

    # -- service -----------------------------------------------------------

    def _start_next(self):
        msg = self.q.popleft()
        self.busy = True
        now = self.eq.now
        self.svc_start = now
        cost, emits, arm = self._route(msg)
        self.eq.schedule(now + cost, self._finish, (emits, arm))

    def _finish(self, plan):
        now = self.eq.now
        start = self.svc_start
        self.served += 1
        self.busy_total_us += now - start
        log = self.log
        if now > log.wu_us and start < log.wend_us:
            lo = start if start > log.wu_us else log.wu_us
            hi = now if now < log.wend_us else log.wend_us
            self.busy_window_us += hi - lo
        if self.sensor is not None:
            self.sensor.add_busy(start, now)
        emits, arm = plan
        if emits:
            for link, m, extra in emits:
                link.send(m, extra)
        if arm is not None:
            arm.started_us = now
            self.eq.schedule(now + arm.schedule[0], self._client_timer, arm)
        exp = self.srv_expiry
        srv = self.srv
        while exp and exp[0][0] <= now:
            srv.pop(exp.popleft()[1], None)
        if self.q:
            self._start_next()
        else:
            self.busy = False

    def _route(self, msg):
        """Decide what one dequeued message does: (cost_us, emits, new client txn)."""
        kind = msg.kind
        now = self.eq.now
        if kind <= K_BYE:
            if kind == K_INVITE:
                return self._route_invite(msg, now)
            if kind == K_BYE:
                return self._route_bye(msg, now)
            return self._route_ack(msg)
        return self._route_response(msg, now)

    def _route_invite(self, msg, now):
        st = self.srv.get(msg.branch)
        if st is not None:
            # Retransmission of a known INVITE: replay, never re-forward.
            if st.last_resp_kind:
                out = SipMessage(st.last_resp_kind, msg.call_id, msg.branch, False, now)
                return self.svc_us, ((self.up_link, out, 0),), None
            return self.svc_us, None, None
        st = ServerTxn(msg.branch, msg.call_id, True)
        self.srv[msg.branch] = st
        self.srv_expiry.append((now + self.sim.srv_ttl_us, msg.branch))
        ctrl = self.ctrl
        if ctrl is not None and not ctrl.try_admit():
            self.log.window_shed(now)
            st.last_resp_kind = K_503
            out = SipMessage(K_503, msg.call_id, msg.branch, False, now)
            return self.svc_us, ((self.up_link, out, 0),), None
        sensor = self.sensor
        if sensor is not None and sensor.utilization(now) > sensor.threshold:
            self.log.cpu_reject(now)
            st.last_resp_kind = K_503
            out = SipMessage(K_503, msg.call_id, msg.branch, False, now)
            return self.svc_us, ((self.up_link, out, 0),), None
        # Admit: generate the hop 100 and forward downstream (two slots).
        st.last_resp_kind = K_TRYING_100
        nb = self.sim.new_branch()
        ct = ClientTxn(nb, msg.call_id, True, self.sim.sched_invite, msg.branch)
        if ctrl is not None:
            ct.admit_us = now
        st.client_branch = nb
        self.cli[nb] = ct
        trying = SipMessage(K_TRYING_100, msg.call_id, msg.branch, False, now)
        fwd = SipMessage(K_INVITE, msg.call_id, nb, False, now)
        emits = ((self.up_link, trying, 0), (self.down_link, fwd, self.dns_us))
        return 2 * self.svc_us, emits, ct

    def _route_bye(self, msg, now):
        st = self.srv.get(msg.branch)
        if st is not None:
            if st.last_resp_kind:
                out = SipMessage(st.last_resp_kind, msg.call_id, msg.branch, False, now)
                return self.svc_us, ((self.up_link, out, 0),), None
            return self.svc_us, None, None
        st = ServerTxn(msg.branch, msg.call_id, False)
        self.srv[msg.branch] = st
        self.srv_expiry.append((now + self.sim.srv_ttl_us, msg.branch))
        nb = self.sim.new_branch()
        ct = ClientTxn(nb, msg.call_id, False, self.sim.sched_noninvite, msg.branch)
        st.client_branch = nb
        self.cli[nb] = ct
        fwd = SipMessage(K_BYE, msg.call_id, nb, False, now)
        return self.svc_us, ((self.down_link, fwd, 0),), ct

    def _route_ack(self, msg):
        st = self.srv.get(msg.branch)
        if st is None:
            self.strays += 1
            return self.svc_us, None, None
        if st.client_branch < 0:
            # ACK to a 503 this proxy originated: consumed here.
            return self.svc_us, None, None
        out = SipMessage(K_ACK, msg.call_id, st.client_branch, False, self.eq.now)
        return self.svc_us, ((self.down_link, out, 0),), None

    def _route_response(self, msg, now):
        ct = self.cli.get(msg.branch)
        if ct is None:
            self.strays += 1
            self.log.stray(now)
            return self.svc_us, None, None
        kind = msg.kind
        final = ct.on_response(kind)
        if not final:
            self._arm_timer_b(ct)
        else:
            del self.cli[msg.branch]
            if ct.admit_us >= 0:
                self.ctrl.on_complete(now - ct.admit_us)
        st = self.srv.get(ct.parent_branch)
        if st is None:
            return self.svc_us, None, None
        st.last_resp_kind = kind
        out = SipMessage(kind, msg.call_id, ct.parent_branch, False, now)
        return self.svc_us, ((self.up_link, out, 0),), None

    # -- timers --------------------------------------------------------------

    def _client_timer(self, ct):
        iv = ct.on_timer()
        if iv == 0:
            return
        now = self.eq.now
        if iv > 0:
            kind = K_INVITE if ct.is_invite else K_BYE
            m = SipMessage(kind, ct.call_id, ct.branch, True, now)
            self.down_link.send(m)
            self.log.retx(now, ct.is_invite)
            self.eq.schedule(now + iv, self._client_timer, ct)
            return
        self._txn_dead(ct)

    def _timer_b(self, ct):
        if ct.state == TERMINATED:
            return
        ct.state = TERMINATED
        self._txn_dead(ct)

    def _txn_dead(self, ct):
        # Budget exhausted with no final response. Nothing is sent upstream;
        # the prior hop runs its own budget and times out on its own.
        self.cli.pop(ct.branch, None)
        if ct.admit_us >= 0:
            self.ctrl.on_timeout()


class Uac:
    """Caller pool: starts calls, ACKs on 200, hangs up after the hold time."""

    __slots__ = (
        "sim",
        "eq",
        "log",
        "link",
        "calls",
        "cli",
        "pending_setup",
        "bye_started",
        "bye_timeouts",
        "strays",
    )

    def __init__(self, sim):
        self.sim = sim
        self.eq = sim.eq
        self.log = sim.log
        self.link = None
        self.calls = {}
        self.cli = {}
        self.pending_setup = 0
        self.bye_started = 0
        self.bye_timeouts = 0
        self.strays = 0

    def start_call(self, script):
        now = self.eq.now
        sim = self.sim
        cid = sim.new_call_id()
        rec = CallRecord(cid, script.hold_us, now)
        self.calls[cid] = rec
        self.pending_setup += 1
        self.log.call_generated(now)
        branch = sim.new_branch()
        rec.branch_invite = branch
        ct = ClientTxn(branch, cid, True, sim.sched_invite, -1)
        ct.started_us = now
        self.cli[branch] = ct
        self.link.send(SipMessage(K_INVITE, cid, branch, False, now))
        self.eq.schedule(now + ct.schedule[0], self._client_timer, ct)

    def deliver(self, msg):
        ct = self.cli.get(msg.branch)
        now = self.eq.now
        if ct is None:
            self.strays += 1
            self.log.stray(now)
            return
        was_calling = ct.state == CALLING
        final = ct.on_response(msg.kind)
        if not final:
            if was_calling and ct.is_invite and not ct.b_armed:
                ct.b_armed = True
                self.eq.schedule(ct.started_us + self.sim.timer_b_us, self._timer_b, ct)
            return
        del self.cli[msg.branch]
        rec = self.calls.get(ct.call_id)
        if rec is None:
            return
        if ct.is_invite:
            # Every INVITE final response is acknowledged; the ACK follows
            # the transaction path and is absorbed by the hop that
            # originated the response.  Under rejection storms these ACKs
            # are real inbound load at the rejecting proxy.
            self.link.send(SipMessage(K_ACK, rec.call_id, msg.branch, False, now))
            if msg.kind == K_OK_200_INVITE:
                self._set_outcome(rec, OUT_SUCCESS)
                self.log.setup_complete(now, now - rec.t_invite_us)
                self.eq.schedule(now + rec.hold_us, self._send_bye, rec)
            else:
                self._set_outcome(rec, OUT_REJECTED)
                self.log.call_rejected(now)
                del self.calls[rec.call_id]
        else:
            del self.calls[rec.call_id]

    def _send_bye(self, rec):
        now = self.eq.now
        sim = self.sim
        branch = sim.new_branch()
        ct = ClientTxn(branch, rec.call_id, False, sim.sched_noninvite, -1)
        ct.started_us = now
        self.cli[branch] = ct
        self.bye_started += 1
        self.link.send(SipMessage(K_BYE, rec.call_id, branch, False, now))
        self.eq.schedule(now + ct.schedule[0], self._client_timer, ct)

    def _client_timer(self, ct):
        iv = ct.on_timer()
        if iv == 0:
            return
        now = self.eq.now
        if iv > 0:
            kind = K_INVITE if ct.is_invite else K_BYE
            self.link.send(SipMessage(kind, ct.call_id, ct.branch, True, now))
            self.log.retx(now, ct.is_invite)
            self.eq.schedule(now + iv, self._client_timer, ct)
            return
        self._txn_dead(ct)

    def _timer_b(self, ct):
        if ct.state == TERMINATED:
            return
        ct.state = TERMINATED
        self._txn_dead(ct)

    def _txn_dead(self, ct):
        self.cli.pop(ct.branch, None)
        rec = self.calls.get(ct.call_id)
        if rec is None:
            return
        now = self.eq.now
        if ct.is_invite:
            self._set_outcome(rec, OUT_TIMEOUT)
            self.log.call_timeout(now)
        else:
            self.bye_timeouts += 1
        del self.calls[ct.call_id]

    def _set_outcome(self, rec, outcome):
        if rec.outcome != OUT_PENDING:
            raise SimulationError("call %d got two setup outcomes" % rec.call_id)
        rec.outcome = outcome
        self.pending_setup -= 1


class Uas:
    """Callee pool: 180 immediately, 200 after the answer delay, 200 per BYE."""

    __slots__ = ("sim", "eq", "link", "answer_us", "srv", "srv_expiry")

    def __init__(self, sim, answer_us):
        self.sim = sim
        self.eq = sim.eq
        self.link = None
        self.answer_us = answer_us
        self.srv = {}
        self.srv_expiry = deque()

    def deliver(self, msg):
        now = self.eq.now
        exp = self.srv_expiry
        srv = self.srv
        while exp and exp[0][0] <= now:
            srv.pop(exp.popleft()[1], None)
        kind = msg.kind
        if kind == K_INVITE:
            st = srv.get(msg.branch)
            if st is not None:
                if st.last_resp_kind:
                    out = SipMessage(st.last_resp_kind, msg.call_id, msg.branch, False, now)
                    self.link.send(out)
                return
            st = ServerTxn(msg.branch, msg.call_id, True)
            srv[msg.branch] = st
            exp.append((now + self.sim.srv_ttl_us, msg.branch))
            st.last_resp_kind = K_RINGING_180
            self.link.send(SipMessage(K_RINGING_180, msg.call_id, msg.branch, False, now))
            self.eq.schedule(now + self.answer_us, self._answer, st)
        elif kind == K_BYE:
            st = srv.get(msg.branch)
            if st is None:
                st = ServerTxn(msg.branch, msg.call_id, False)
                srv[msg.branch] = st
                exp.append((now + self.sim.srv_ttl_us, msg.branch))
                st.last_resp_kind = K_OK_200_BYE
            self.link.send(SipMessage(st.last_resp_kind, msg.call_id, msg.branch, False, now))
        # ACK confirms the dialog; nothing to send.

    def _answer(self, st):
        st.last_resp_kind = K_OK_200_INVITE
        now = self.eq.now
        self.link.send(SipMessage(K_OK_200_INVITE, st.call_id, st.branch, False, now))


class Simulation:
    """One wired run of the trapezoid: UAC - P1 - P2 - UAS.

    ``cfg`` is any object exposing the scenario attributes (see
    :class:`sipsim.scenario.ScenarioConfig`); ``rate_cps`` must already be
    resolved to a single offered rate.
    """

    __slots__ = (
        "cfg",
        "log",
        "eq",
        "rng_arrival",
        "rng_loss",
        "rng_hold",
        "sched_invite",
        "sched_noninvite",
        "timer_b_us",
        "srv_ttl_us",
        "duration_us",
        "uac",
        "uas",
        "p1",
        "p2",
        "_next_branch",
        "_next_call",
        "_scripts",
    )

    def __init__(self, cfg, log=None, scripts=None):
        self.cfg = cfg
        if log is None:
            log = EventLog(cfg.warmup_s, cfg.window_s, trace=getattr(cfg, "trace", False))
        self.log = log
        self.eq = EventQueue(trace=getattr(cfg, "trace", False))
        seed = cfg.seed
        self.rng_arrival = Random(seed + 1)
        self.rng_loss = Random(seed + 2)
        self.rng_hold = Random(seed + 3)
        t1_us = round(cfg.t1_ms * 1000)
        self.sched_invite = build_retx_schedule(True, t1_us)
        self.sched_noninvite = build_retx_schedule(False, t1_us)
        self.timer_b_us = BUDGET_T1_MULTIPLE * t1_us
        self.srv_ttl_us = self.timer_b_us + 2 * t1_us
        self.duration_us = round(cfg.duration_s * 1e6)
        self._next_branch = 0
        self._next_call = 0

        svc_down = max(1, round(1e6 / (cfg.downstream_capacity_cps * MESSAGES_PER_CALL)))
        svc_up = max(1, round(1e6 / (cfg.upstream_capacity_cps * MESSAGES_PER_CALL)))
        sensor = CpuSensor(round(cfg.cpu_window_ms * 1000), cfg.cpu_threshold)
        ctrl = None
        if cfg.control_enabled:
            ctrl = WindowController(
                round(cfg.z_th_ms * 1000),
                cfg.alpha,
                cfg.delay_history_size,
                cfg.initial_window,
                cfg.initial_win_th,
                comparator=cfg.comparator_code(),
            )
        self.uac = Uac(self)
        self.uas = Uas(self, round(cfg.answer_delay_ms * 1000))
        self.p1 = Proxy(self, "p1", svc_up, cfg.q_max, None, ctrl,
                        dns_us=round(cfg.dns_delay_ms * 1000))
        self.p2 = Proxy(self, "p2", svc_down, cfg.q_max, sensor, None)

        rng = self.rng_loss
        eq = self.eq

        def us(ms):
            return round(ms * 1000)

        self.uac.link = Link(eq, us(cfg.link_delay_uac_p1_ms), cfg.link_loss_uac_p1, rng, self.p1.deliver)
        self.p1.up_link = Link(eq, us(cfg.link_delay_uac_p1_ms), cfg.link_loss_uac_p1, rng, self.uac.deliver)
        self.p1.down_link = Link(eq, us(cfg.link_delay_p1_p2_ms), cfg.link_loss_p1_p2, rng, self.p2.deliver)
        self.p2.up_link = Link(eq, us(cfg.link_delay_p1_p2_ms), cfg.link_loss_p1_p2, rng, self.p1.deliver)
        self.p2.down_link = Link(eq, us(cfg.link_delay_p2_uas_ms), cfg.link_loss_p2_uas, rng, self.uas.deliver)
        self.uas.link = Link(eq, us(cfg.link_delay_p2_uas_ms), cfg.link_loss_p2_uas, rng, self.p2.deliver)

        if scripts is None:
            from sipsim.traffic import arrival_scripts

            scripts = arrival_scripts(
                cfg.offered_rate_cps,
                cfg.duration_s,
                self.rng_arrival,
                self.rng_hold,
                deterministic=(cfg.arrival_dist == "deterministic"),
                hold_mean_s=cfg.hold_time_mean_s,
                hold_constant=(cfg.hold_time_dist == "constant"),
            )
        self._scripts = iter(scripts)

    def new_branch(self):
        b = self._next_branch
        self._next_branch = b + 1
        return b

    def new_call_id(self):
        c = self._next_call
        self._next_call = c + 1
        return c

    def controller(self):
        return self.p1.ctrl

    def run(self):
        first = next(self._scripts, None)
        if first is not None:
            self.eq.schedule(first.arrival_us, self._on_arrival, first)
        self.eq.run_until(self.duration_us)
        self._finalize()
        return self

    def _on_arrival(self, script):
        self.uac.start_call(script)
        nxt = next(self._scripts, None)
        if nxt is not None:
            self.eq.schedule(nxt.arrival_us, self._on_arrival, nxt)

    def _finalize(self):
        log = self.log
        log.set_downstream_gauges(self.p2.busy_window_us, self.p2.queue_hw_window, self.cfg.q_max)
        log.set_end_state(
            inflight_setup=self.uac.pending_setup,
            bye_started=self.uac.bye_started,
            bye_timeouts=self.uac.bye_timeouts,
        )
