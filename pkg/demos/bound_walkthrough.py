"""Worst-case delay through one switch, computed and then checked by brute force.

A greedy (sigma, rho) source is the worst conformant traffic: it dumps its
whole burst at t = 0 and then sends at exactly rho.  The analytic bounds for
one switch (input FIFO followed by the output multiplexer) are checked against
a byte-by-byte replay of that traffic.
"""

import numpy as np

from nocqos import (
    ArrivalEnvelope,
    MuxSpec,
    ServerSpec,
    conforms,
    greedy_source,
    mux_delay_bound,
    queue_delay_bound,
    switch_delay_bound,
)

GB = 1e9
LINK = 2 * GB        # bytes/s on every link
PACKET = 4.0         # bytes; the largest packet a port may be serving

flow = ArrivalEnvelope(sigma=16, rho=0.8 * GB)
cross = ArrivalEnvelope(sigma=8, rho=0.6 * GB)

server = ServerSpec(c_in=LINK, c_out=LINK, max_packet_l=PACKET)
mux = MuxSpec(c_1=LINK, c_2=LINK, c_out=LINK, max_packet_l=PACKET)

d_queue = queue_delay_bound(flow, server)
d_mux = mux_delay_bound(flow, cross, mux)
d_noc = switch_delay_bound(flow, cross, server, mux)

print(f"flow  {flow}\ncross {cross}")
print(f"input queue bound : {d_queue.value * 1e9:7.3f} ns")
print(f"multiplexer bound : {d_mux.value * 1e9:7.3f} ns")
print(f"whole switch      : {d_noc.value * 1e9:7.3f} ns")

# The greedy traces hug their envelopes, so nothing conformant can do worse.
horizon = 40e-9
f_trace = greedy_source(flow, horizon, granularity=1)
c_trace = greedy_source(cross, horizon, granularity=1)
assert conforms(f_trace, flow) and conforms(c_trace, cross)


def serialize(ready, rate):
    out, free = [], -np.inf
    for r in ready:
        free = max(r, free) + 1 / rate
        out.append(free)
    return np.array(out)


def bytes_of(trace):
    return [t for t, a in trace for _ in range(int(a))]


# replay: input link -> FIFO -> mux, with the cross flow on the other mux input
arrive = serialize(bytes_of(f_trace), LINK)
leave_queue = serialize(arrive, LINK)
cross_arrive = serialize(bytes_of(c_trace), LINK)
order = sorted([(t, 0, i) for i, t in enumerate(leave_queue)] +
               [(t, 1, i) for i, t in enumerate(cross_arrive)])
depart = serialize([t for t, _, _ in order], LINK)
worst = max(d - arrive[i] for (_, s, i), d in zip(order, depart) if s == 0)

slack = 2 / LINK  # one byte of serialisation per stage
print(f"replayed worst    : {worst * 1e9:7.3f} ns "
      f"({'within' if worst <= d_noc.value + slack else 'OVER'} the bound)")
