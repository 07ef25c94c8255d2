"""Binary convolutional codes and a batched log-domain BCJR decoder."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import NumericalError


def _octal_taps(octal: int, memory: int) -> np.ndarray:
    """Tap vector [g_0, ..., g_memory] of an octal generator (MSB is D^0)."""
    bits = bin(int(str(octal), 8))[2:].ljust(memory + 1, "0")
    return np.array([int(b) for b in bits], dtype=np.int8)


@dataclass(frozen=True)
class ConvCode:
    """Rate-1/n recursive code ``1 / feedback`` with optional systematic output.

    ``ConvCode(7, (5,))`` is the systematic recursive [5,7] code; the
    accumulator 1/(1+D) is ``ConvCode(3, (1,), systematic=False)``.
    """

    feedback: int
    feedforward: tuple
    systematic: bool = True
    terminate: bool = True
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "feedforward", tuple(int(g) for g in self.feedforward))
        if not self.feedforward and not self.systematic:
            raise ValueError("code has no outputs")

    @property
    def memory(self) -> int:
        gens = [self.feedback, *self.feedforward]
        return max(len(bin(int(str(g), 8))) - 3 for g in gens)

    @property
    def n_out(self) -> int:
        return len(self.feedforward) + int(self.systematic)

    @property
    def rate(self) -> float:
        return 1.0 / self.n_out

    @property
    def n_states(self) -> int:
        return 2**self.memory

    def trellis(self) -> "Trellis":
        return Trellis.from_code(self)

    def encode(self, u: np.ndarray) -> np.ndarray:
        """Encode along the last axis; returns (..., T', n_out) with tail steps if terminated."""
        tr = self.trellis()
        u = np.asarray(u, dtype=np.int8)
        shape = u.shape[:-1]
        flat = u.reshape(-1, u.shape[-1])
        n_steps = flat.shape[1] + (self.memory if self.terminate else 0)
        out = np.zeros((flat.shape[0], n_steps, self.n_out), dtype=np.int8)
        state = np.zeros(flat.shape[0], dtype=np.int64)
        for t in range(n_steps):
            if t < flat.shape[1]:
                ut = flat[:, t].astype(np.int64)
            else:
                ut = tr.tail_input[state]
            b = 2 * state + ut
            out[:, t] = tr.outputs[b]
            state = tr.next_state[b]
        return out.reshape(shape + (n_steps, self.n_out))

    def inputs_with_tail(self, u: np.ndarray) -> np.ndarray:
        """Input sequence including the terminating tail inputs."""
        if not self.terminate:
            return np.asarray(u, dtype=np.int8)
        cw = self.encode(u)
        if self.systematic:
            return cw[..., 0]
        tr = self.trellis()
        flat = np.asarray(u).reshape(-1, np.shape(u)[-1])
        state = np.zeros(flat.shape[0], dtype=np.int64)
        tails = []
        for t in range(flat.shape[1] + self.memory):
            ut = flat[:, t].astype(np.int64) if t < flat.shape[1] else tr.tail_input[state]
            if t >= flat.shape[1]:
                tails.append(ut)
            state = tr.next_state[2 * state + ut]
        full = np.concatenate([flat, np.stack(tails, 1)], axis=1).astype(np.int8)
        return full.reshape(np.shape(u)[:-1] + (full.shape[1],))


@dataclass(frozen=True)
class Trellis:
    """Branch b = 2*state + input; ``incoming[s]`` lists the two branches entering s."""

    n_states: int
    next_state: np.ndarray
    outputs: np.ndarray
    tail_input: np.ndarray
    incoming: np.ndarray = field(repr=False)

    @classmethod
    def from_code(cls, code: ConvCode) -> "Trellis":
        nu = code.memory
        fb = _octal_taps(code.feedback, nu)
        ffs = [_octal_taps(g, nu) for g in code.feedforward]
        if fb[0] != 1:
            raise ValueError("feedback polynomial must have a unit constant term")
        S = 2**nu
        nxt = np.zeros(2 * S, dtype=np.int64)
        outs = np.zeros((2 * S, code.n_out), dtype=np.int8)
        tail = np.zeros(S, dtype=np.int64)
        for s in range(S):
            reg = [(s >> (nu - 1 - i)) & 1 for i in range(nu)]  # a_{t-1} .. a_{t-nu}
            fb_sum = sum(int(fb[i + 1]) * reg[i] for i in range(nu)) % 2
            tail[s] = fb_sum
            for u in (0, 1):
                a = (u + fb_sum) % 2
                full = [a] + reg
                o = [u] if code.systematic else []
                o += [sum(int(g[i]) * full[i] for i in range(nu + 1)) % 2 for g in ffs]
                ns = 0
                for bit in full[:nu]:
                    ns = (ns << 1) | bit
                b = 2 * s + u
                nxt[b] = ns
                outs[b] = o
        incoming = np.zeros((S, 2), dtype=np.int64)
        fill = np.zeros(S, dtype=np.int64)
        for b in range(2 * S):
            ns = nxt[b]
            if fill[ns] >= 2:
                raise ValueError("trellis is not a two-input butterfly")
            incoming[ns, fill[ns]] = b
            fill[ns] += 1
        return cls(S, nxt, outs, tail, incoming)


def bcjr(trellis: Trellis, l_out: np.ndarray, l_in: np.ndarray | None = None, terminated: bool = True,
         want_out: bool = False):
    """Batched max-free log-MAP BCJR.

    ``l_out``: (T, B, n) channel/a-priori LLRs on the code outputs;
    ``l_in``: (T, B) a-priori LLRs on the inputs, or None.
    Returns extrinsic input LLRs (T, B) and, if ``want_out``, extrinsic output LLRs (T, B, n).
    """
    T, B, n = l_out.shape
    S = trellis.n_states
    u_sign = np.tile([1.0, -1.0], S)  # (2S,)
    c_sign = 1.0 - 2.0 * trellis.outputs.astype(float)  # (2S, n)
    src = np.repeat(np.arange(S), 2)
    dst = trellis.next_state
    inc0, inc1 = trellis.incoming[:, 0], trellis.incoming[:, 1]

    def gamma(t):
        g = 0.5 * (l_out[t] @ c_sign.T)
        if l_in is not None:
            g = g + 0.5 * l_in[t][:, None] * u_sign
        return g

    alpha = np.empty((T + 1, B, S))
    alpha[0] = _NEG
    alpha[0][:, 0] = 0.0
    for t in range(T):
        cand = alpha[t][:, src] + gamma(t)
        a = np.logaddexp(cand[:, inc0], cand[:, inc1])
        alpha[t + 1] = a - a.max(axis=1, keepdims=True)

    beta = np.full((B, S), _NEG) if terminated else np.zeros((B, S))
    if terminated:
        beta[:, 0] = 0.0
    ext_in = np.empty((T, B))
    ext_out = np.empty((T, B, n)) if want_out else None
    zero_u = u_sign > 0
    for t in range(T - 1, -1, -1):
        g = gamma(t)
        full = alpha[t][:, src] + g + beta[:, dst]
        app_u = _lse(full[:, zero_u]) - _lse(full[:, ~zero_u])
        ext_in[t] = app_u - (l_in[t] if l_in is not None else 0.0)
        if want_out:
            for k in range(n):
                zk = c_sign[:, k] > 0
                ext_out[t, :, k] = _lse(full[:, zk]) - _lse(full[:, ~zk]) - l_out[t, :, k]
        b = beta[:, dst] + g
        b = np.logaddexp(b[:, 0::2], b[:, 1::2])
        beta = b - b.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(ext_in)) or (want_out and not np.all(np.isfinite(ext_out))):
        raise NumericalError("non-finite BCJR metric")
    return (ext_in, ext_out) if want_out else ext_in


# log-probability of an impossible state; finite so forbidden hypotheses do not produce NaN
_NEG = -1e200


def _lse(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=1)
    return m + np.log(np.sum(np.exp(x - m[:, None]), axis=1))
